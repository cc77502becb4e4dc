"""Domain types and click environment for the position-based model (PBM).

Under PBM, a display slate has L positions and the catalog has N items.
A user examines position l with probability kappa[l] and, having examined
it, clicks the shown item i with probability theta[i], so the click at
position l is Bernoulli(theta[i] * kappa[l]), independent across positions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "PbmParams",
    "ClickStats",
    "make_rng",
    "draw_rewards",
    "expected_reward",
    "best_recommendation",
    "update_stats",
    "check_recommendation",
]


def make_rng(seed: int | np.random.SeedSequence | None = None) -> np.random.Generator:
    """Deterministic random stream; identical seed yields identical draws."""
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class PbmParams:
    """Ground-truth or sampled (theta, kappa) pair defining a PBM environment.

    theta[i] is the per-item click probability, kappa[l] the per-position
    examination probability. The first position is the reference and must
    have kappa exactly 1.
    """

    theta: np.ndarray
    kappa: np.ndarray

    def __post_init__(self) -> None:
        theta = np.asarray(self.theta, dtype=np.float64)
        kappa = np.asarray(self.kappa, dtype=np.float64)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "kappa", kappa)
        if theta.ndim != 1 or kappa.ndim != 1:
            raise ValueError("theta and kappa must be 1-D vectors")
        if kappa.size < 1 or theta.size < kappa.size:
            raise ValueError(
                f"need at least as many items as positions, "
                f"got {theta.size} items and {kappa.size} positions"
            )
        if np.any(theta < 0.0) or np.any(theta > 1.0):
            raise ValueError("theta entries must lie in [0, 1]")
        if np.any(kappa < 0.0) or np.any(kappa > 1.0):
            raise ValueError("kappa entries must lie in [0, 1]")
        if kappa[0] != 1.0:
            raise ValueError(f"kappa[0] must be exactly 1, got {kappa[0]!r}")

    @property
    def n_items(self) -> int:
        return self.theta.size

    @property
    def n_positions(self) -> int:
        return self.kappa.size

    def to_dict(self) -> dict:
        return {"theta": self.theta.tolist(), "kappa": self.kappa.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "PbmParams":
        try:
            return cls(theta=np.asarray(data["theta"], dtype=np.float64),
                       kappa=np.asarray(data["kappa"], dtype=np.float64))
        except KeyError as exc:
            raise ValueError(f"missing field {exc} in params object") from exc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "PbmParams":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class ClickStats:
    """Per-(item, position) click and no-click counters.

    S[i, l] counts rounds where item i was shown at position l and clicked,
    F[i, l] the rounds where it was shown there and not clicked. Together
    they are the sufficient statistic of the click history. Single-owner
    mutable: one game loop owns and updates an instance.
    """

    n_items: int
    n_positions: int
    S: np.ndarray = field(init=False)
    F: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        if self.n_items < self.n_positions or self.n_positions < 1:
            raise ValueError("need n_items >= n_positions >= 1")
        self.S = np.zeros((self.n_items, self.n_positions), dtype=np.int64)
        self.F = np.zeros((self.n_items, self.n_positions), dtype=np.int64)

    @classmethod
    def from_counts(cls, S: np.ndarray, F: np.ndarray) -> "ClickStats":
        S = np.asarray(S, dtype=np.int64)
        F = np.asarray(F, dtype=np.int64)
        if S.shape != F.shape or S.ndim != 2:
            raise ValueError("S and F must be 2-D arrays of identical shape")
        if np.any(S < 0) or np.any(F < 0):
            raise ValueError("counts must be nonnegative")
        stats = cls(n_items=S.shape[0], n_positions=S.shape[1])
        stats.S[...] = S
        stats.F[...] = F
        return stats

    @property
    def displays(self) -> np.ndarray:
        """Number of times each (item, position) cell was shown."""
        return self.S + self.F

    def total_count(self) -> int:
        return int(self.S.sum() + self.F.sum())

    def copy(self) -> "ClickStats":
        return ClickStats.from_counts(self.S, self.F)


def check_recommendation(rec: np.ndarray, n_items: int, n_positions: int) -> np.ndarray:
    """Validate a display slate: L distinct item indices, one per position."""
    rec = np.asarray(rec, dtype=np.int64)
    if rec.shape != (n_positions,):
        raise ValueError(f"recommendation must have length {n_positions}, got shape {rec.shape}")
    if np.any(rec < 0) or np.any(rec >= n_items):
        raise ValueError(f"item indices must lie in [0, {n_items})")
    if np.unique(rec).size != rec.size:
        raise ValueError("recommendation items must be distinct")
    return rec


def draw_rewards(params: PbmParams, rec: np.ndarray,
                 rng: np.random.Generator) -> np.ndarray:
    """Simulate one round of clicks for a slate.

    Entry l is an independent Bernoulli draw with success probability
    theta[rec[l]] * kappa[l]. Returns a 0/1 vector of length L.
    """
    rec = check_recommendation(rec, params.n_items, params.n_positions)
    p = params.theta[rec] * params.kappa
    return (rng.random(params.n_positions) < p).astype(np.int64)


def expected_reward(params: PbmParams, rec: np.ndarray) -> float:
    """Expected number of clicks for a slate: sum_l theta[rec[l]] * kappa[l]."""
    rec = check_recommendation(rec, params.n_items, params.n_positions)
    return float(params.theta[rec] @ params.kappa)


def best_recommendation(params: PbmParams) -> np.ndarray:
    """Reward-maximizing slate for known parameters.

    Puts the k-th largest theta item at the position with the k-th largest
    kappa. Ties broken by lowest item index, then lowest position index,
    so the oracle is deterministic.
    """
    item_order = np.argsort(-params.theta, kind="stable")[: params.n_positions]
    pos_order = np.argsort(-params.kappa, kind="stable")
    rec = np.empty(params.n_positions, dtype=np.int64)
    rec[pos_order] = item_order
    return rec


def update_stats(stats: ClickStats, rec: np.ndarray, rewards: np.ndarray) -> ClickStats:
    """Fold one round of feedback into the counters (in place).

    For each position l, increments S[rec[l], l] on a click and
    F[rec[l], l] otherwise. Returns the same ClickStats for chaining.
    """
    rec = check_recommendation(rec, stats.n_items, stats.n_positions)
    rewards = np.asarray(rewards)
    if rewards.shape != (stats.n_positions,):
        raise ValueError("rewards length must equal the number of positions")
    if np.any((rewards != 0) & (rewards != 1)):
        raise ValueError("rewards must be 0/1")
    S, F = stats.S, stats.F
    for pos in range(stats.n_positions):
        if rewards[pos]:
            S[rec[pos], pos] += 1
        else:
            F[rec[pos], pos] += 1
    return stats
