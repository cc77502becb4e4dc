"""Metropolis-Hastings sampling of (theta, kappa) from the exact click posterior.

With a uniform prior, the posterior over the joint parameter vector is
proportional to prod_{i,l} (theta_i kappa_l)^S[i,l] (1 - theta_i kappa_l)^F[i,l].
It factorizes over items given kappa and over positions given theta, so a
within-Gibbs scheme applies one truncated-Gaussian random-walk transition per
coordinate: theta_1..theta_N, then kappa_2..kappa_L (kappa_1 stays pinned at 1).

All target evaluations are in log space; raw products of the posterior terms
underflow once counts grow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ClickStats

__all__ = [
    "MhConfig",
    "JointSample",
    "ChainStep",
    "log_conditional_theta",
    "log_conditional_kappa",
    "truncated_gauss_step",
    "acceptance_log_ratio",
    "log_interval_mass",
    "mh_sample",
]

_SQRT2 = math.sqrt(2.0)
_NEG_INF = float("-inf")

# Redraw budget for the truncated-Gaussian rejection loop. For a mean inside
# [0, 1] the interval mass is at least ~0.3 per draw, so the cap is effectively
# unreachable; it only guarantees termination.
_TRUNC_MAX_REDRAWS = 1000


@dataclass(frozen=True)
class MhConfig:
    """Random-walk sampler knobs.

    c sets the step width sigma = c / sqrt(t); m is the number of sweeps run
    per requested sample; warm_start reuses the previous sample as the chain
    start instead of a fresh uniform draw.
    """

    c: float = 100.0
    m: int = 1
    warm_start: bool = True

    def __post_init__(self) -> None:
        if not self.c > 0:
            raise ValueError("step-width constant c must be positive")
        if self.m < 1:
            raise ValueError("iteration count m must be at least 1")


@dataclass(frozen=True)
class JointSample:
    """One (theta, kappa) draw from the joint posterior. kappa[0] is always 1."""

    theta: np.ndarray
    kappa: np.ndarray

    def __post_init__(self) -> None:
        theta = np.asarray(self.theta, dtype=np.float64)
        kappa = np.asarray(self.kappa, dtype=np.float64)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "kappa", kappa)
        if np.any(theta < 0) or np.any(theta > 1) or np.any(kappa < 0) or np.any(kappa > 1):
            raise ValueError("sample components must lie in [0, 1]")
        if kappa[0] != 1.0:
            raise ValueError("kappa[0] must be 1")


@dataclass(frozen=True)
class ChainStep:
    """One coordinate transition, as dumped by the diagnostics trace."""

    iteration: int
    coordinate: str
    value: float
    accepted: bool


def _theta_logpdf(value: float, s_total: int, f_row: list, kappa: list) -> float:
    # Log of the theta_i conditional up to an additive constant:
    # s_total*log(v) + sum_l F[i,l]*log(1 - v*kappa[l]).
    if s_total:
        if value <= 0.0:
            return _NEG_INF
        acc = s_total * math.log(value)
    else:
        acc = 0.0
    for pos, f in enumerate(f_row):
        if f:
            q = 1.0 - value * kappa[pos]
            if q <= 0.0:
                return _NEG_INF
            acc += f * math.log(q)
    return acc


def _kappa_logpdf(value: float, s_total: int, f_col: list, theta: list) -> float:
    # Log of the kappa_l conditional up to an additive constant:
    # s_total*log(v) + sum_i F[i,l]*log(1 - theta[i]*v).
    if s_total:
        if value <= 0.0:
            return _NEG_INF
        acc = s_total * math.log(value)
    else:
        acc = 0.0
    for item, f in enumerate(f_col):
        if f:
            q = 1.0 - theta[item] * value
            if q <= 0.0:
                return _NEG_INF
            acc += f * math.log(q)
    return acc


def log_conditional_theta(item: int, value: float, sample: JointSample,
                          stats: ClickStats) -> float:
    """Log conditional density of theta[item] given kappa and the click data.

    Up to an additive constant; minus infinity where the density vanishes.
    """
    if not 0.0 <= value <= 1.0:
        raise ValueError("value must lie in [0, 1]")
    s_total = int(stats.S[item].sum())
    return _theta_logpdf(value, s_total, stats.F[item].tolist(),
                         sample.kappa.tolist())


def log_conditional_kappa(pos: int, value: float, sample: JointSample,
                          stats: ClickStats) -> float:
    """Log conditional density of kappa[pos] given theta and the click data.

    The first position is pinned to 1 and has no conditional; pos must be >= 1
    (0-indexed). Up to an additive constant.
    """
    if pos < 1:
        raise ValueError("the first position is pinned to kappa = 1 and is never updated")
    if not 0.0 <= value <= 1.0:
        raise ValueError("value must lie in [0, 1]")
    s_total = int(stats.S[:, pos].sum())
    return _kappa_logpdf(value, s_total, stats.F[:, pos].tolist(),
                         sample.theta.tolist())


def truncated_gauss_step(current: float, sigma: float,
                         rng: np.random.Generator) -> float:
    """Draw from N(current, sigma) conditioned on [0, 1], by redrawing.

    The first in-range draw wins. Once a single draw misses, further redraws
    come in batches sized to the interval mass, which keeps wide-step
    proposals (sigma much larger than 1) from looping one draw at a time.
    Falls back to a uniform draw if the redraw cap is ever hit.
    """
    candidate = rng.normal(current, sigma)
    if 0.0 <= candidate <= 1.0:
        return candidate
    budget = _TRUNC_MAX_REDRAWS - 1
    batch = 3.0 / max(math.exp(log_interval_mass(current, sigma)), 1e-3)
    batch = int(min(max(batch, 4.0), 256.0))
    while budget > 0:
        draws = rng.normal(current, sigma, size=min(batch, budget))
        budget -= draws.size
        inside = np.nonzero((draws >= 0.0) & (draws <= 1.0))[0]
        if inside.size:
            return float(draws[inside[0]])
    return rng.random()


def log_interval_mass(x: float, sigma: float) -> float:
    """log of the N(x, sigma) probability mass on [0, 1].

    This is the proposal-asymmetry correction of the truncated random walk:
    the density of proposing y from x is phi(y | x, sigma) divided by this mass.
    """
    hi = 0.5 * (1.0 + math.erf((1.0 - x) / (sigma * _SQRT2)))
    lo = 0.5 * (1.0 + math.erf((0.0 - x) / (sigma * _SQRT2)))
    return math.log(hi - lo)


def acceptance_log_ratio(current: float, candidate: float, log_target,
                         sigma: float) -> float:
    """Log Metropolis-Hastings acceptance ratio for one truncated-walk step.

    log_target is the log density (up to a constant) of the coordinate being
    updated. Accept the candidate when log(uniform) < the returned value.
    """
    return (log_target(candidate) - log_target(current)
            + log_interval_mass(current, sigma) - log_interval_mass(candidate, sigma))


def _run_chain(stats: ClickStats, config: MhConfig, t: int,
               rng: np.random.Generator, start: JointSample | None,
               record: list | None) -> JointSample:
    n_items = stats.n_items
    n_positions = stats.n_positions
    sigma = config.c / math.sqrt(t)

    if start is None:
        theta = rng.random(n_items).tolist()
        kappa = rng.random(n_positions).tolist()
        kappa[0] = 1.0
    else:
        if start.theta.size != n_items or start.kappa.size != n_positions:
            raise ValueError("start sample dimensions do not match the stats")
        theta = start.theta.tolist()
        kappa = start.kappa.tolist()

    # Count layout chosen for the per-coordinate loops: row sums and F rows
    # feed the theta conditionals, column sums and F columns the kappa ones.
    s_row = stats.S.sum(axis=1).tolist()
    s_col = stats.S.sum(axis=0).tolist()
    f_rows = stats.F.tolist()
    f_cols = stats.F.T.tolist()

    uniform = rng.random
    for sweep in range(1, config.m + 1):
        for i in range(n_items):
            current = theta[i]
            candidate = truncated_gauss_step(current, sigma, rng)
            log_ratio = (_theta_logpdf(candidate, s_row[i], f_rows[i], kappa)
                         - _theta_logpdf(current, s_row[i], f_rows[i], kappa)
                         + log_interval_mass(current, sigma)
                         - log_interval_mass(candidate, sigma))
            accepted = math.log(uniform()) < log_ratio
            if accepted:
                theta[i] = candidate
            if record is not None:
                record.append(ChainStep(sweep, f"theta[{i}]", theta[i], accepted))
        for pos in range(1, n_positions):
            current = kappa[pos]
            candidate = truncated_gauss_step(current, sigma, rng)
            log_ratio = (_kappa_logpdf(candidate, s_col[pos], f_cols[pos], theta)
                         - _kappa_logpdf(current, s_col[pos], f_cols[pos], theta)
                         + log_interval_mass(current, sigma)
                         - log_interval_mass(candidate, sigma))
            accepted = math.log(uniform()) < log_ratio
            if accepted:
                kappa[pos] = candidate
            if record is not None:
                record.append(ChainStep(sweep, f"kappa[{pos}]", kappa[pos], accepted))
    return JointSample(theta=np.array(theta), kappa=np.array(kappa))


def mh_sample(stats: ClickStats, config: MhConfig, t: int,
              rng: np.random.Generator, start: JointSample | None = None,
              record: list | None = None) -> JointSample:
    """Draw one joint (theta, kappa) sample from the click posterior.

    Runs m sweeps of per-coordinate transitions with step width c / sqrt(t),
    starting from `start` when given (warm start) and from an independent
    uniform draw otherwise. A sweep touches every theta coordinate in index
    order, then every kappa coordinate except the first, for a total of
    m * (N + L - 1) random-walk steps.

    When `record` is a list, one ChainStep per coordinate transition is
    appended to it (used by the diagnostics CLI).
    """
    if t < 1:
        raise ValueError("time-stamp t must be at least 1")
    return _run_chain(stats, config, t, rng, start, record)
