"""Bandit laboratory for the position-based click model.

Provides the PBM click environment, a Metropolis-Hastings posterior sampler
over (theta, kappa), Thompson-sampling and greedy baseline policies, rank-1
parameter extraction from click data, and a replicated regret-experiment
runner with CSV outputs.
"""

from .core import (ClickStats, PbmParams, best_recommendation, draw_rewards,
                   expected_reward, make_rng, update_stats)
from .experiment import (ExperimentConfig, ExperimentResult, RegretTrace,
                         aggregate_traces, load_traces, persist_traces,
                         run_experiment, run_game, timing_report)
from .inference import (ClickLogRecord, click_matrix, filter_click_logs,
                        parse_click_log, svd_rank1_extract)
from .policies import PolicySpec
from .sampler import JointSample, MhConfig, mh_sample

__version__ = "0.1.0"

__all__ = [
    "ClickStats",
    "PbmParams",
    "best_recommendation",
    "draw_rewards",
    "expected_reward",
    "make_rng",
    "update_stats",
    "ExperimentConfig",
    "ExperimentResult",
    "RegretTrace",
    "aggregate_traces",
    "load_traces",
    "persist_traces",
    "run_experiment",
    "run_game",
    "timing_report",
    "ClickLogRecord",
    "click_matrix",
    "filter_click_logs",
    "parse_click_log",
    "svd_rank1_extract",
    "PolicySpec",
    "JointSample",
    "MhConfig",
    "mh_sample",
]
