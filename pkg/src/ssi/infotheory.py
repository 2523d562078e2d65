"""Plug-in mutual information on histogram-discretized features (bits)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BinningSpec:
    n_bins: int = 10

    def __post_init__(self):
        if self.n_bins < 2:
            raise ValueError("n_bins must be >= 2")


def contingency(a, b) -> np.ndarray:
    """Count table of two non-negative integer label vectors."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    table = np.zeros((a.max() + 1, b.max() + 1), dtype=np.int64)
    np.add.at(table, (a, b), 1)
    return table


def mutual_information(table) -> float:
    """Plug-in MI of a contingency table, in bits.

    Cell ratios are formed from integer counts so that a table which
    factorizes exactly yields exactly 0.
    """
    t = np.asarray(table)
    if t.ndim != 2 or np.any(t < 0):
        raise ValueError("table must be a 2-D array of non-negative counts")
    counts = [[int(v) for v in row] for row in t]
    total = sum(map(sum, counts))
    if total < 1:
        raise ValueError("table total must be >= 1")
    rows = [sum(r) for r in counts]
    cols = [sum(c) for c in zip(*counts)]
    mi = 0.0
    for i, row in enumerate(counts):
        for j, n_ij in enumerate(row):
            if n_ij == 0:
                continue
            mi += (n_ij / total) * math.log2((n_ij * total) / (rows[i] * cols[j]))
    # rounding can leave a -1e-17 residue on near-independent tables
    return max(mi, 0.0)


def discretize(values, spec: BinningSpec = BinningSpec(), lo: float | None = None, hi: float | None = None) -> np.ndarray:
    """Equal-width bin indices over [lo, hi] (default: the data range).

    The maximum maps to the last bin; a degenerate range maps everything to 0.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("cannot discretize an empty sample")
    lo = float(v.min()) if lo is None else lo
    hi = float(v.max()) if hi is None else hi
    if not hi > lo:
        return np.zeros(v.shape, dtype=np.int64)
    idx = np.floor((v - lo) / (hi - lo) * spec.n_bins).astype(np.int64)
    return np.clip(idx, 0, spec.n_bins - 1)


def feature_scores(cluster_positives, negatives, spec: BinningSpec = BinningSpec()) -> np.ndarray:
    """I(binned f_j; membership) for every feature j; bins span the pooled values."""
    P = np.atleast_2d(np.asarray(cluster_positives, dtype=np.float64))
    N = np.atleast_2d(np.asarray(negatives, dtype=np.float64))
    if P.size == 0 or N.size == 0:
        raise ValueError("both groups must be non-empty")
    if P.shape[1] != N.shape[1]:
        raise ValueError("groups differ in dimension")
    pooled = np.vstack([P, N])
    y = np.concatenate([np.ones(len(P), dtype=np.int64), np.zeros(len(N), dtype=np.int64)])
    scores = np.empty(pooled.shape[1])
    for j in range(pooled.shape[1]):
        bins = discretize(pooled[:, j], spec)
        table = np.zeros((spec.n_bins, 2), dtype=np.int64)
        np.add.at(table, (bins, y), 1)
        scores[j] = mutual_information(table)
    return scores


def partition_separability(cluster_positives, negatives, spec: BinningSpec = BinningSpec()) -> float:
    """Best single-feature MI between cluster membership and the binned features."""
    return float(feature_scores(cluster_positives, negatives, spec).max())


def select_features(cluster_positives, negatives, m: int, spec: BinningSpec = BinningSpec()) -> list[int]:
    """Indices of the m highest-scoring features, best first; ties go to the lower index."""
    scores = feature_scores(cluster_positives, negatives, spec)
    d = len(scores)
    if not 1 <= m <= d:
        raise ValueError(f"m must lie in [1, {d}], got {m}")
    order = sorted(range(d), key=lambda j: (-scores[j], j))
    return order[:m]
