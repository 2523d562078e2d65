"""Seeded k-means (k-means++ init, Lloyd iterations).

Everything here is deterministic given (point order, k, seed). Distance ties
resolve to the lowest cluster index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_ITER = 100
REL_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class ClusterModel:
    k: int
    centroids: np.ndarray  # (k, d)
    assignments: np.ndarray  # (n,)
    inertia: float
    iterations_run: int
    inertia_history: tuple[float, ...] = ()

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.k)

    def members(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == j)


@dataclass(frozen=True)
class ClusterStat:
    size: int
    positives: int
    negatives: int


def sq_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centroids[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def assign(points: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-centroid labels (argmin picks the lowest index on ties) and their squared distances."""
    d2 = sq_distances(points, centroids)
    labels = np.argmin(d2, axis=1)
    return labels, d2[np.arange(len(points)), labels]


def kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    chosen = [int(rng.integers(n))]
    closest = np.sum((points - points[chosen[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            # every point already coincides with a center; take the first unused index
            rest = np.setdiff1d(np.arange(n), chosen)
            idx = int(rest[0])
        else:
            cum = np.cumsum(closest)
            idx = int(np.searchsorted(cum, rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        chosen.append(idx)
        closest = np.minimum(closest, np.sum((points - points[idx]) ** 2, axis=1))
    return points[chosen].copy()


def _repair_empty(points, centroids, labels, dist2, k):
    """Move the farthest point of a multi-member cluster into each empty cluster."""
    labels = labels.copy()
    dist2 = dist2.copy()
    centroids = centroids.copy()
    for j in range(k):
        counts = np.bincount(labels, minlength=k)
        if counts[j] > 0:
            continue
        movable = counts[labels] > 1
        cand = np.where(movable, dist2, -1.0)
        i = int(np.argmax(cand))
        labels[i] = j
        dist2[i] = 0.0
        centroids[j] = points[i]
    return centroids, labels, dist2


def _means(points, labels, k, old):
    sums = np.zeros_like(old)
    np.add.at(sums, labels, points)
    counts = np.bincount(labels, minlength=k)
    out = old.copy()
    nz = counts > 0
    out[nz] = sums[nz] / counts[nz, None]
    return out


def kmeans(points, k: int, seed: int, max_iter: int = MAX_ITER, tol: float = REL_TOL) -> ClusterModel:
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError("points must be a 2-D array")
    n = len(points)
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of points ({n})")

    rng = np.random.Generator(np.random.PCG64(int(seed)))
    centroids = kmeans_pp_init(points, k, rng)
    labels, d2 = assign(points, centroids)
    centroids, labels, d2 = _repair_empty(points, centroids, labels, d2, k)
    inertia = float(d2.sum())
    history = [inertia]

    it = 0
    while it < max_iter:
        it += 1
        centroids = _means(points, labels, k, centroids)
        new_labels, d2 = assign(points, centroids)
        centroids, new_labels, d2 = _repair_empty(points, centroids, new_labels, d2, k)
        new_inertia = float(d2.sum())
        history.append(new_inertia)
        changed = not np.array_equal(new_labels, labels)
        labels = new_labels
        improvement = inertia - new_inertia
        inertia = new_inertia
        if not changed:
            break
        if improvement <= tol * max(history[-2], np.finfo(float).tiny):
            # converged on inertia; keep going only while a repair left a non-nearest assignment
            if np.array_equal(assign(points, centroids)[0], labels):
                break

    return ClusterModel(
        k=k,
        centroids=centroids,
        assignments=labels,
        inertia=inertia,
        iterations_run=it,
        inertia_history=tuple(history),
    )


def cluster_stats(model: ClusterModel, labels) -> list[ClusterStat]:
    """Per-cluster (size, positives, negatives) for boolean ``labels``."""
    labels = np.asarray(labels, dtype=bool)
    if labels.shape != model.assignments.shape:
        raise ValueError(f"{len(labels)} labels for {len(model.assignments)} points")
    pos = np.bincount(model.assignments[labels], minlength=model.k)
    neg = np.bincount(model.assignments[~labels], minlength=model.k)
    return [ClusterStat(int(p + q), int(p), int(q)) for p, q in zip(pos, neg)]
