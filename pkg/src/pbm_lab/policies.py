"""Bandit policies behind one interface: choose a slate, then ingest feedback.

The posterior-sampling policy draws the joint (theta, kappa) from the exact
click posterior with the Metropolis-Hastings sampler. The baselines either
receive the true examination probabilities as input ("semi-oracle" variants)
or re-estimate both parameter vectors from the collected data by rank-1
extraction at every time-stamp ("greedy" variants).
"""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .core import ClickStats, PbmParams, best_recommendation, update_stats
from .inference import click_matrix, svd_rank1_extract
from .sampler import JointSample, MhConfig, mh_sample

__all__ = [
    "Policy",
    "PolicySpec",
    "PbMhbPolicy",
    "BcMptsPolicy",
    "PbmTsPolicy",
    "EpsGreedyPolicy",
    "GreedyPolicy",
    "UniformRandomPolicy",
    "OraclePolicy",
]

logger = logging.getLogger(__name__)

# Rejection-sampling budget per item for the Beta-proposal policy; on cap the
# last in-range proposal is kept so a round always terminates.
PBMTS_MAX_ATTEMPTS = 1000


class Policy(ABC):
    """A sequential recommender: choose(t) then feedback(), exactly once each.

    Instances are stateful and single-owner; run one game loop per instance.
    """

    def __init__(self, n_items: int, n_positions: int):
        self.n_items = n_items
        self.n_positions = n_positions
        self.stats = ClickStats(n_items, n_positions)

    @abstractmethod
    def choose(self, t: int, rng: np.random.Generator) -> np.ndarray:
        """Return the slate for time-stamp t: L distinct item indices."""

    def feedback(self, rec: np.ndarray, rewards: np.ndarray) -> None:
        """Fold the observed per-position clicks into the counters."""
        update_stats(self.stats, rec, rewards)


def _assign_by_rank(item_values: np.ndarray, pos_values: np.ndarray,
                    n_positions: int, rng: np.random.Generator) -> np.ndarray:
    """Slate with the k-th best item at the k-th most-examined position.

    Ties in either ranking are broken uniformly at random.
    """
    item_order = np.lexsort((rng.random(item_values.size), -item_values))[:n_positions]
    pos_order = np.lexsort((rng.random(pos_values.size), -pos_values))
    rec = np.empty(n_positions, dtype=np.int64)
    rec[pos_order] = item_order
    return rec


class PbMhbPolicy(Policy):
    """Thompson sampling over the exact joint posterior via Metropolis-Hastings.

    Each round draws (theta, kappa) from the posterior given the counters and
    ranks items/positions by the drawn values. With warm_start the chain at
    time t starts from the sample used at t - 1, which keeps the required
    number of sweeps per round at m = 1 once the chain has settled.
    """

    def __init__(self, n_items: int, n_positions: int, config: MhConfig | None = None):
        super().__init__(n_items, n_positions)
        self.config = config or MhConfig()
        self.last_sample: JointSample | None = None

    def choose(self, t: int, rng: np.random.Generator) -> np.ndarray:
        start = self.last_sample if self.config.warm_start else None
        sample = mh_sample(self.stats, self.config, t, rng, start=start)
        self.last_sample = sample
        return _assign_by_rank(sample.theta, sample.kappa, self.n_positions, rng)


def bcmpts_beta_shapes(stats: ClickStats, kappa: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-item Beta shapes for the pseudo-count posterior approximation.

    Item i gets Beta(S_i + 1, N_i - S_i + 1) where S_i sums clicks over
    positions and N_i = sum_l kappa[l] * displays[i, l] is the pseudo-expected
    number of observations. The second shape is clamped to 1 from below: the
    pseudo-count is a real number and can fall short of the click count.
    """
    s_item = stats.S.sum(axis=1)
    n_pseudo = stats.displays @ np.asarray(kappa, dtype=np.float64)
    a = s_item + 1.0
    b = np.maximum(n_pseudo - s_item + 1.0, 1.0)
    return a, b


class BcMptsPolicy(Policy):
    """Thompson sampling from a Beta approximation built on pseudo-counts.

    In semi-oracle mode the true examination probabilities are supplied; in
    greedy mode they are re-estimated from the smoothed counters by rank-1
    extraction at every time-stamp.
    """

    def __init__(self, n_items: int, n_positions: int, kappa: np.ndarray | None = None):
        super().__init__(n_items, n_positions)
        self.fixed_kappa = None if kappa is None else np.asarray(kappa, dtype=np.float64)

    def _current_kappa(self) -> np.ndarray:
        if self.fixed_kappa is not None:
            return self.fixed_kappa
        return svd_rank1_extract(click_matrix(self.stats)).kappa

    def choose(self, t: int, rng: np.random.Generator) -> np.ndarray:
        kappa = self._current_kappa()
        a, b = bcmpts_beta_shapes(self.stats, kappa)
        draws = rng.beta(a, b)
        return _assign_by_rank(draws, kappa, self.n_positions, rng)


def _log_beta_pdf(x, a: float, b: float):
    """Log density of Beta(a, b); works on scalars and arrays in (0, 1)."""
    norm = gammaln(a + b) - gammaln(a) - gammaln(b)
    with np.errstate(divide="ignore"):
        return (a - 1.0) * np.log(x) + (b - 1.0) * np.log1p(-x) + norm


class PbmTsPolicy(Policy):
    """Thompson sampling with a rejection-corrected Beta proposal per item.

    The proposal for item i rescales a Beta draw built from the counters at
    the item's most-displayed position; rejection sampling then corrects it
    to the item's exact conditional posterior. The envelope constant is the
    maximum of the target/proposal density ratio over a 1024-point grid,
    recomputed per item per round.
    """

    _GRID = (np.arange(1024, dtype=np.float64) + 1.0) / 1024.0  # (0, 1]

    def __init__(self, n_items: int, n_positions: int, kappa: np.ndarray | None = None):
        super().__init__(n_items, n_positions)
        self.fixed_kappa = None if kappa is None else np.asarray(kappa, dtype=np.float64)
        self.cap_hits = 0

    def _current_kappa(self) -> np.ndarray:
        if self.fixed_kappa is not None:
            return self.fixed_kappa
        return svd_rank1_extract(click_matrix(self.stats)).kappa

    def _log_target(self, x, s_row: np.ndarray, f_row: np.ndarray, kappa: np.ndarray):
        # Item-conditional posterior, up to a constant: works on grid arrays.
        x = np.asarray(x, dtype=np.float64)  # strictly positive values only
        with np.errstate(divide="ignore", invalid="ignore"):
            s_term = s_row.sum() * np.log(x)
            q = 1.0 - np.outer(x, kappa)
            f_term = np.where(f_row > 0, f_row * np.log(np.maximum(q, 0.0)), 0.0).sum(axis=1)
        return s_term + f_term

    def draw_item_theta(self, item: int, kappa: np.ndarray,
                        rng: np.random.Generator) -> float:
        """One posterior draw of theta[item] by rejection sampling."""
        displays = self.stats.displays[item]
        pos = int(np.argmax(displays))  # ties resolve to the lowest position
        a = float(self.stats.S[item, pos] + 1)
        b = float(self.stats.F[item, pos] + 1)
        k = float(kappa[pos])
        s_row = self.stats.S[item].astype(np.float64)
        f_row = self.stats.F[item].astype(np.float64)

        grid = self._GRID
        with np.errstate(invalid="ignore"):
            log_ratio_grid = (self._log_target(grid, s_row, f_row, kappa)
                              - _log_beta_pdf(np.minimum(grid * k, 1.0), a, b))
        # target and proposal can both vanish at the upper endpoint; such grid
        # points carry no envelope information
        log_ratio_grid = np.nan_to_num(log_ratio_grid, nan=-np.inf)
        log_envelope = float(np.max(log_ratio_grid))

        last_in_range = None
        for _ in range(PBMTS_MAX_ATTEMPTS):
            x = rng.beta(a, b) / k
            if x > 1.0:
                continue
            last_in_range = x
            log_ratio = (float(self._log_target(np.array([x]), s_row, f_row, kappa)[0])
                         - float(_log_beta_pdf(min(x * k, 1.0), a, b)))
            if np.log(rng.random()) < log_ratio - log_envelope:
                return x
        self.cap_hits += 1
        logger.debug("rejection cap hit for item %d", item)
        return last_in_range if last_in_range is not None else 1.0

    def choose(self, t: int, rng: np.random.Generator) -> np.ndarray:
        kappa = self._current_kappa()
        draws = np.array([self.draw_item_theta(i, kappa, rng)
                          for i in range(self.n_items)])
        return _assign_by_rank(draws, kappa, self.n_positions, rng)


class GreedyPolicy(Policy):
    """Recommends the best slate under parameters re-estimated every round."""

    def _inferred(self) -> PbmParams:
        return svd_rank1_extract(click_matrix(self.stats))

    def choose(self, t: int, rng: np.random.Generator) -> np.ndarray:
        return best_recommendation(self._inferred())


class EpsGreedyPolicy(GreedyPolicy):
    """Greedy with decaying per-slot random replacement.

    Each slot of the greedy slate is independently replaced, with probability
    min(1, c / t), by an item drawn uniformly among those not currently in
    the slate, so distinctness is preserved after every replacement.
    """

    def __init__(self, n_items: int, n_positions: int, c: float = 1000.0):
        super().__init__(n_items, n_positions)
        if c < 0:
            raise ValueError("exploration constant c must be nonnegative")
        self.c = float(c)

    def choose(self, t: int, rng: np.random.Generator) -> np.ndarray:
        rec = super().choose(t, rng)
        eps = min(1.0, self.c / t)
        if eps == 0.0:
            return rec
        for pos in range(self.n_positions):
            if rng.random() < eps:
                outside = np.setdiff1d(np.arange(self.n_items), rec)
                rec[pos] = outside[rng.integers(outside.size)]
        return rec


class UniformRandomPolicy(Policy):
    """Uniformly random ordered slate; the no-learning reference."""

    def choose(self, t: int, rng: np.random.Generator) -> np.ndarray:
        return rng.permutation(self.n_items)[: self.n_positions]


class OraclePolicy(Policy):
    """Plays the best slate for the true parameters at every time-stamp."""

    def __init__(self, params: PbmParams):
        super().__init__(params.n_items, params.n_positions)
        self._rec = best_recommendation(params)

    def choose(self, t: int, rng: np.random.Generator) -> np.ndarray:
        return self._rec.copy()


_MODES = ("semi-oracle", "greedy")


@dataclass(frozen=True)
class PolicySpec:
    """Declarative policy description, as found in experiment configs.

    Semi-oracle and oracle variants need environment truth (kappa or the full
    parameters); those are injected when the spec is built against an
    environment, not stored in the config.
    """

    kind: str
    options: dict = field(default_factory=dict)
    label: str | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "PolicySpec":
        data = dict(data)
        try:
            kind = data.pop("policy")
        except KeyError:
            raise ValueError("policy spec needs a 'policy' field") from None
        label = data.pop("label", None)
        spec = cls(kind=kind, options=data, label=label)
        spec.validate()
        return spec

    def to_dict(self) -> dict:
        out = {"policy": self.kind, **self.options}
        if self.label is not None:
            out["label"] = self.label
        return out

    def validate(self) -> None:
        kind, opts = self.kind, self.options
        if kind == "pb-mhb":
            MhConfig(c=float(opts.get("c", 100.0)), m=int(opts.get("m", 1)),
                     warm_start=bool(opts.get("warm_start", True)))
            unknown = set(opts) - {"c", "m", "warm_start"}
        elif kind in ("bc-mpts", "pbm-ts"):
            mode = opts.get("mode", "semi-oracle")
            if mode not in _MODES:
                raise ValueError(f"unknown mode {mode!r}, expected one of {_MODES}")
            unknown = set(opts) - {"mode"}
        elif kind == "eps-greedy":
            if float(opts.get("c", 1000.0)) < 0:
                raise ValueError("eps-greedy needs c >= 0")
            unknown = set(opts) - {"c"}
        elif kind in ("greedy", "uniform", "oracle"):
            unknown = set(opts)
        else:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if unknown:
            raise ValueError(f"unknown options for {kind}: {sorted(unknown)}")

    @property
    def display_label(self) -> str:
        if self.label is not None:
            return self.label
        opts = self.options
        if self.kind == "pb-mhb":
            c = float(opts.get("c", 100.0))
            m = int(opts.get("m", 1))
            warm = "warm" if opts.get("warm_start", True) else "cold"
            return f"pb-mhb(c={c:g},m={m},{warm})"
        if self.kind in ("bc-mpts", "pbm-ts"):
            return f"{self.kind}({opts.get('mode', 'semi-oracle')})"
        if self.kind == "eps-greedy":
            return f"eps-greedy(c={float(opts.get('c', 1000.0)):g})"
        return self.kind

    def build(self, env: PbmParams) -> Policy:
        """Instantiate the policy against an environment's dimensions."""
        n, l = env.n_items, env.n_positions
        opts = self.options
        if self.kind == "pb-mhb":
            config = MhConfig(c=float(opts.get("c", 100.0)), m=int(opts.get("m", 1)),
                              warm_start=bool(opts.get("warm_start", True)))
            return PbMhbPolicy(n, l, config)
        if self.kind == "bc-mpts":
            semi = opts.get("mode", "semi-oracle") == "semi-oracle"
            return BcMptsPolicy(n, l, kappa=env.kappa if semi else None)
        if self.kind == "pbm-ts":
            semi = opts.get("mode", "semi-oracle") == "semi-oracle"
            return PbmTsPolicy(n, l, kappa=env.kappa if semi else None)
        if self.kind == "eps-greedy":
            return EpsGreedyPolicy(n, l, c=float(opts.get("c", 1000.0)))
        if self.kind == "greedy":
            return GreedyPolicy(n, l)
        if self.kind == "uniform":
            return UniformRandomPolicy(n, l)
        if self.kind == "oracle":
            return OraclePolicy(env)
        raise ValueError(f"unknown policy kind {self.kind!r}")
