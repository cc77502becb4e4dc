"""Rank-1 extraction of (theta, kappa) from click matrices and click logs.

A PBM click-probability matrix is theta kappa^T, a rank-1 outer product, so
its leading singular triple recovers the parameters up to a scale that the
kappa[0] = 1 convention pins down. The same extraction feeds both the greedy
policies (on smoothed counters) and the offline log pipeline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple

import numpy as np

from .core import ClickStats, PbmParams

__all__ = [
    "DegenerateMatrixError",
    "LogParseError",
    "ClickLogRecord",
    "QueryClickMatrix",
    "click_matrix",
    "top_singular_triple",
    "svd_rank1_extract",
    "parse_click_log",
    "filter_click_logs",
    "infer_params_per_query",
]


class DegenerateMatrixError(ValueError):
    """Raised when a matrix has no usable leading singular structure."""


class LogParseError(ValueError):
    """Malformed click-log line; carries the 1-based line number."""

    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no


class ClickLogRecord(NamedTuple):
    """One aggregated log line: a session's outcome for an ad at a position."""

    query: str
    ad: str
    position: int  # 1-based, as in the log files
    clicks: int
    displays: int


@dataclass(frozen=True)
class QueryClickMatrix:
    """Per-query click-rate estimates, rows aligned with the `ads` labels."""

    query: str
    ads: tuple
    values: np.ndarray


def click_matrix(stats: ClickStats) -> np.ndarray:
    """Smoothed click-probability estimate per (item, position) cell.

    Uses add-one smoothing, (S + 1) / (S + F + 2), so the matrix is defined
    before any data arrives and every cell stays strictly inside (0, 1).
    """
    return (stats.S + 1.0) / (stats.S + stats.F + 2.0)


def top_singular_triple(M: np.ndarray, tol: float = 1e-12,
                        max_iter: int = 10_000) -> tuple[float, np.ndarray, np.ndarray]:
    """Leading singular triple (sigma, u, v) of a small matrix by power iteration.

    Signs are fixed so the dominant entry of v is positive; tiny negative
    entries left over from roundoff (above -1e-12) are clamped to zero.
    Raises DegenerateMatrixError on an all-zero matrix.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError("matrix must be 2-D")
    if not M.any():
        raise DegenerateMatrixError("matrix is identically zero")

    B = M.T @ M
    v = np.full(M.shape[1], 1.0 / math.sqrt(M.shape[1]))
    for _ in range(max_iter):
        w = B @ v
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            raise DegenerateMatrixError("power iteration collapsed to zero")
        w /= norm
        if float(np.abs(w - v).max()) < tol:
            v = w
            break
        v = w

    Mv = M @ v
    sigma = float(np.linalg.norm(Mv))
    if sigma == 0.0:
        raise DegenerateMatrixError("leading singular value is zero")
    u = Mv / sigma

    if v[int(np.argmax(np.abs(v)))] < 0.0:
        v = -v
        u = -u
    v = np.where((v < 0.0) & (v > -1e-12), 0.0, v)
    u = np.where((u < 0.0) & (u > -1e-12), 0.0, u)
    return sigma, u, v


def svd_rank1_extract(M: np.ndarray) -> PbmParams:
    """Recover (theta, kappa) from a click matrix via its top singular triple.

    With (sigma, u, v) the leading triple, theta = v[0] * sigma * u and
    kappa = v / v[0], so kappa[0] = 1 and theta . kappa = sigma * (u . v).
    Both vectors are clamped into [0, 1]; the clamp is inactive on exact
    rank-1 inputs and only guards against noise pushing estimates out of range.
    """
    sigma, u, v = top_singular_triple(M)
    if v[0] == 0.0:
        raise DegenerateMatrixError("leading position carries no weight (v[0] = 0)")
    theta = np.clip(v[0] * sigma * u, 0.0, 1.0)
    kappa = np.clip(v / v[0], 0.0, 1.0)
    kappa[0] = 1.0
    return PbmParams(theta=theta, kappa=kappa)


def _parse_record(fields: list, line_no: int) -> ClickLogRecord:
    if len(fields) != 5:
        raise LogParseError(line_no, f"expected 5 tab-separated fields, got {len(fields)}")
    query, ad = fields[0], fields[1]
    try:
        position = int(fields[2])
        clicks = int(fields[3])
        displays = int(fields[4])
    except ValueError:
        raise LogParseError(line_no, f"non-integer position/click/impression in {fields[2:]!r}")
    if position < 1:
        raise LogParseError(line_no, f"position must be >= 1, got {position}")
    if clicks < 0 or displays < 0:
        raise LogParseError(line_no, "counts must be nonnegative")
    if clicks > displays:
        raise LogParseError(line_no, f"clicks ({clicks}) exceed impressions ({displays})")
    return ClickLogRecord(query, ad, position, clicks, displays)


def parse_click_log(path: str | Path) -> Iterator[ClickLogRecord]:
    """Stream records from a tab-separated log file.

    Columns: query, ad, position, click, impression. A single header line is
    tolerated. Any later malformed line raises LogParseError with its number.
    """
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            fields = line.split("\t")
            try:
                yield _parse_record(fields, line_no)
            except LogParseError:
                if line_no == 1:
                    continue  # header line
                raise


def filter_click_logs(records: Iterable[ClickLogRecord], min_displays: int = 1000,
                      min_ads: int = 5, n_positions: int = 3) -> dict:
    """Aggregate log records into per-query click matrices, with filtering.

    Click probabilities are per session: each record counts as one session,
    clicked iff its click count is positive, and the impression field is
    ignored. An ad survives only if it has at least min_displays sessions at
    every one of the n_positions positions; queries keeping fewer than
    min_ads ads are dropped. Records for positions beyond n_positions are
    ignored.

    Returns a mapping query id -> QueryClickMatrix with ads sorted by label.
    """
    sessions: dict = {}
    clicks: dict = {}
    for rec in records:
        if rec.position > n_positions:
            continue
        key = (rec.query, rec.ad, rec.position - 1)
        sessions[key] = sessions.get(key, 0) + 1
        clicks[key] = clicks.get(key, 0) + min(rec.clicks, 1)

    per_query_ads: dict = {}
    for query, ad, _ in sessions:
        per_query_ads.setdefault(query, set()).add(ad)

    result = {}
    for query in sorted(per_query_ads):
        kept = [ad for ad in sorted(per_query_ads[query])
                if all(sessions.get((query, ad, pos), 0) >= min_displays
                       for pos in range(n_positions))]
        if len(kept) < min_ads:
            continue
        matrix = np.empty((len(kept), n_positions), dtype=np.float64)
        for row, ad in enumerate(kept):
            for pos in range(n_positions):
                matrix[row, pos] = clicks[(query, ad, pos)] / sessions[(query, ad, pos)]
        result[query] = QueryClickMatrix(query=query, ads=tuple(kept), values=matrix)
    return result


def infer_params_per_query(matrices: dict) -> dict:
    """Run the rank-1 extraction on every surviving query matrix.

    Within each query the ads are reordered by decreasing estimated theta, so
    the stored parameter vectors are sorted the way summary tables expect.
    Returns query id -> (PbmParams, ad labels in theta order).
    """
    out = {}
    for query, qcm in matrices.items():
        params = svd_rank1_extract(qcm.values)
        order = np.argsort(-params.theta, kind="stable")
        sorted_params = PbmParams(theta=params.theta[order], kappa=params.kappa)
        out[query] = (sorted_params, tuple(qcm.ads[i] for i in order))
    return out
