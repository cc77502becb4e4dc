"""Replicated policy-vs-environment games with cumulative expected regret.

A game plays choose / draw clicks / feedback for a horizon of rounds and
accumulates the expected (not realized) per-round loss against the oracle
slate, so traces measure policy quality rather than click noise. Replications
are seeded independently and are bit-reproducible regardless of the degree of
parallelism.
"""

from __future__ import annotations

import csv
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import PbmParams, best_recommendation, check_recommendation, expected_reward
from .policies import PolicySpec

__all__ = [
    "ExperimentConfig",
    "ExperimentResult",
    "RegretTrace",
    "default_checkpoints",
    "run_game",
    "run_experiment",
    "aggregate_traces",
    "persist_traces",
    "load_traces",
    "write_summary",
    "load_summary",
    "timing_report",
]

SUMMARY_COLUMNS = ("policy", "t", "mean", "std", "min",
                   "q05", "q25", "q50", "q75", "q95", "max")
TRACE_COLUMNS = ("policy", "seed", "t", "regret")


def default_checkpoints(horizon: int) -> list[int]:
    """Log-spaced recording grid: 50 points from 10 up to the horizon, plus it."""
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    lo = min(10, horizon)
    grid = np.unique(np.rint(np.geomspace(lo, horizon, num=50)).astype(np.int64))
    return sorted(set(grid.tolist()) | {horizon})


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one replicated experiment."""

    env: PbmParams
    policies: tuple
    horizon: int
    n_runs: int = 20
    base_seed: int = 0
    checkpoints: tuple = ()

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.n_runs < 1:
            raise ValueError("n_runs must be at least 1")
        if not self.policies:
            raise ValueError("need at least one policy")
        object.__setattr__(self, "policies", tuple(self.policies))
        cps = tuple(self.checkpoints) or tuple(default_checkpoints(self.horizon))
        if any(b <= a for a, b in zip(cps, cps[1:])) or cps[-1] > self.horizon or cps[0] < 1:
            raise ValueError("checkpoints must be strictly increasing and within [1, horizon]")
        object.__setattr__(self, "checkpoints", cps)
        labels = [p.display_label for p in self.policies]
        if len(set(labels)) != len(labels):
            raise ValueError(f"policy labels must be unique, got {labels}")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {"env", "policies", "horizon", "n_runs", "base_seed", "checkpoints"}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown experiment fields: {sorted(unknown)}")
        try:
            env = PbmParams.from_dict(data["env"])
            policies = tuple(PolicySpec.from_dict(p) for p in data["policies"])
            horizon = int(data["horizon"])
        except KeyError as exc:
            raise ValueError(f"missing experiment field {exc}") from exc
        return cls(env=env, policies=policies, horizon=horizon,
                   n_runs=int(data.get("n_runs", 20)),
                   base_seed=int(data.get("base_seed", 0)),
                   checkpoints=tuple(int(c) for c in data.get("checkpoints", ())))

    def to_dict(self) -> dict:
        return {"env": self.env.to_dict(),
                "policies": [p.to_dict() for p in self.policies],
                "horizon": self.horizon, "n_runs": self.n_runs,
                "base_seed": self.base_seed, "checkpoints": list(self.checkpoints)}


@dataclass
class RegretTrace:
    """Cumulative expected regret of one run, recorded at the checkpoints."""

    policy: str
    seed: int
    steps: np.ndarray
    regret: np.ndarray

    def __eq__(self, other) -> bool:
        return (isinstance(other, RegretTrace)
                and self.policy == other.policy and self.seed == other.seed
                and np.array_equal(self.steps, other.steps)
                and np.array_equal(self.regret, other.regret))


def run_game(env: PbmParams, spec: PolicySpec, horizon: int, seed: int,
             checkpoints: tuple | None = None) -> RegretTrace:
    """Play one seeded game and return its regret trace.

    Environment clicks and policy randomness use independent substreams of
    the seed, so changing a policy's internal draws never perturbs the click
    sequence another policy would see under the same seed.
    """
    checkpoints = tuple(checkpoints) if checkpoints else tuple(default_checkpoints(horizon))
    env_ss, policy_ss = np.random.SeedSequence(seed).spawn(2)
    env_rng = np.random.default_rng(env_ss)
    policy_rng = np.random.default_rng(policy_ss)

    policy = spec.build(env)
    mu_star = expected_reward(env, best_recommendation(env))
    theta, kappa = env.theta, env.kappa
    n_positions = env.n_positions

    regrets = np.empty(len(checkpoints), dtype=np.float64)
    next_cp = 0
    cumulative = 0.0
    for t in range(1, horizon + 1):
        rec = check_recommendation(policy.choose(t, policy_rng),
                                   env.n_items, n_positions)
        p = theta[rec] * kappa
        rewards = (env_rng.random(n_positions) < p).astype(np.int64)
        policy.feedback(rec, rewards)
        cumulative += mu_star - float(p.sum())
        if t == checkpoints[next_cp]:
            regrets[next_cp] = cumulative
            next_cp += 1
    return RegretTrace(policy=spec.display_label, seed=seed,
                       steps=np.asarray(checkpoints, dtype=np.int64), regret=regrets)


def _run_game_task(args: tuple) -> tuple:
    env_dict, spec_dict, horizon, seed, checkpoints = args
    env = PbmParams.from_dict(env_dict)
    spec = PolicySpec.from_dict(spec_dict)
    started = time.perf_counter()
    try:
        trace = run_game(env, spec, horizon, seed, checkpoints)
    except Exception as exc:
        raise RuntimeError(
            f"game failed for policy {spec.display_label!r}, seed {seed}: {exc}") from exc
    return trace, time.perf_counter() - started


@dataclass
class ExperimentResult:
    """All traces of a replicated experiment plus per-run wall times."""

    config: ExperimentConfig
    traces: list = field(default_factory=list)
    wall_times: dict = field(default_factory=dict)  # label -> list of seconds


def run_experiment(config: ExperimentConfig, parallelism: int = 1) -> ExperimentResult:
    """Run n_runs games per policy, seeded base_seed + run index.

    The trace list is ordered by (policy, run) and is bit-identical for any
    parallelism degree; only the wall-time measurements vary between runs.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be at least 1")
    tasks = [(config.env.to_dict(), spec.to_dict(), config.horizon,
              config.base_seed + run, config.checkpoints)
             for spec in config.policies for run in range(config.n_runs)]
    if parallelism == 1:
        outcomes = [_run_game_task(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            outcomes = list(pool.map(_run_game_task, tasks))

    result = ExperimentResult(config=config)
    for (trace, elapsed) in outcomes:
        result.traces.append(trace)
        result.wall_times.setdefault(trace.policy, []).append(elapsed)
    return result


def aggregate_traces(traces: list) -> list[dict]:
    """Per-policy, per-checkpoint sample statistics over runs.

    The standard deviation uses the population convention (n denominator).
    All traces must share one checkpoint grid. Returns one row per
    (policy, checkpoint) with the SUMMARY_COLUMNS fields.
    """
    if not traces:
        return []
    steps = traces[0].steps
    by_policy: dict = {}
    for trace in traces:
        if not np.array_equal(trace.steps, steps):
            raise ValueError(f"trace for {trace.policy!r} (seed {trace.seed}) "
                             f"does not share the common checkpoints")
        by_policy.setdefault(trace.policy, []).append(trace.regret)

    rows = []
    for policy, regrets in by_policy.items():
        stack = np.vstack(regrets)
        q05, q25, q50, q75, q95 = np.quantile(stack, [0.05, 0.25, 0.5, 0.75, 0.95], axis=0)
        means = stack.mean(axis=0)
        stds = stack.std(axis=0)
        for j, t in enumerate(steps):
            rows.append({"policy": policy, "t": int(t),
                         "mean": float(means[j]), "std": float(stds[j]),
                         "min": float(stack[:, j].min()),
                         "q05": float(q05[j]), "q25": float(q25[j]),
                         "q50": float(q50[j]), "q75": float(q75[j]),
                         "q95": float(q95[j]), "max": float(stack[:, j].max())})
    return rows


def persist_traces(traces: list, path: str | Path) -> None:
    """Write traces as CSV (policy,seed,t,regret); floats keep 17 digits."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(TRACE_COLUMNS)
        for trace in traces:
            for t, regret in zip(trace.steps, trace.regret):
                writer.writerow([trace.policy, trace.seed, int(t), f"{regret:.17g}"])


def load_traces(path: str | Path) -> list:
    """Rebuild traces from CSV; row order in the file does not matter."""
    collected: dict = {}
    with open(path, "r", newline="") as handle:
        reader = csv.DictReader(handle)
        missing = set(TRACE_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"trace file {path} lacks columns {sorted(missing)}")
        for row in reader:
            key = (row["policy"], int(row["seed"]))
            collected.setdefault(key, []).append((int(row["t"]), float(row["regret"])))
    traces = []
    for (policy, seed) in sorted(collected):
        points = sorted(collected[(policy, seed)])
        traces.append(RegretTrace(policy=policy, seed=seed,
                                  steps=np.array([p[0] for p in points], dtype=np.int64),
                                  regret=np.array([p[1] for p in points])))
    return traces


def write_summary(rows: list[dict], path: str | Path) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=SUMMARY_COLUMNS)
        writer.writeheader()
        for row in rows:
            out = dict(row)
            for col in SUMMARY_COLUMNS[2:]:
                out[col] = f"{row[col]:.17g}"
            writer.writerow(out)


def load_summary(path: str | Path) -> list[dict]:
    with open(path, "r", newline="") as handle:
        reader = csv.DictReader(handle)
        missing = set(SUMMARY_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"summary file {path} lacks columns {sorted(missing)}")
        rows = []
        for row in reader:
            parsed = {"policy": row["policy"], "t": int(row["t"])}
            for col in SUMMARY_COLUMNS[2:]:
                parsed[col] = float(row[col])
            rows.append(parsed)
        return rows


def timing_report(result: ExperimentResult) -> list[dict]:
    """Wall-time table: total seconds and mean milliseconds per trial, per policy.

    Informational only; wall times depend on the machine and never feed the
    regret outputs.
    """
    horizon = result.config.horizon
    rows = []
    for policy, times in result.wall_times.items():
        total = float(sum(times))
        trials = horizon * len(times)
        rows.append({"policy": policy, "runs": len(times),
                     "total_seconds": total,
                     "ms_per_trial": 1000.0 * total / trials})
    return rows
