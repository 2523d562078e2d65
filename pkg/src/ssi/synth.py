"""Synthetic partially separable data.

Negatives and "background" positives share one spherical normal. A subset of
positive subjects additionally draw some of their instances from one of K
well-separated Gaussian subgroups; the remaining positive subjects have no
separable instance at all.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .dataset import Dataset

_EPS = 1e-9


def _ceil(x: float) -> int:
    # guards against 0.1*30 = 3.0000000000000004 style products
    return math.ceil(x - _EPS)


@dataclass(frozen=True)
class SynthConfig:
    dim: int = 2
    n_neg_subjects: int = 20
    n_pos_subjects: int = 20
    instances_per_subject: int = 10
    n_subgroups: int = 2
    subgroup_offset: float = 6.0
    subgroup_sigma: float = 0.5
    separable_fraction: float = 0.3
    inseparable_subject_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        for name in ("dim", "n_neg_subjects", "n_pos_subjects", "instances_per_subject"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        if not isinstance(self.n_subgroups, (int, np.integer)) or self.n_subgroups < 0:
            raise ValueError(f"n_subgroups must be a non-negative integer, got {self.n_subgroups!r}")
        if not self.subgroup_offset > 0:
            raise ValueError("subgroup_offset must be > 0")
        if not self.subgroup_sigma > 0:
            raise ValueError("subgroup_sigma must be > 0")
        for name in ("separable_fraction", "inseparable_subject_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def n_inseparable_subjects(self) -> int:
        if self.n_subgroups == 0:
            return self.n_pos_subjects
        return _ceil(self.inseparable_subject_fraction * self.n_pos_subjects)

    @property
    def n_separable_instances(self) -> int:
        return _ceil(self.separable_fraction * self.instances_per_subject)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class GroundTruth:
    subgroup: np.ndarray  # per instance; 0 = background
    has_separable_instance: dict[str, bool]
    centers: np.ndarray  # (K, dim)


def subgroup_centers(dim: int, k: int, offset: float) -> np.ndarray:
    """Unit directions scaled by ``offset``.

    For k <= 2*dim the directions are signed axes in the order
    +e1, -e1, +e2, -e2, ...; otherwise they are evenly spaced on the circle
    spanned by the first two coordinates.
    """
    centers = np.zeros((k, dim))
    if k <= 2 * dim:
        for j in range(k):
            centers[j, j // 2] = 1.0 if j % 2 == 0 else -1.0
    else:
        ang = 2 * np.pi * np.arange(k) / k
        centers[:, 0] = np.cos(ang)
        if dim > 1:
            centers[:, 1] = np.sin(ang)
    return offset * centers


def box_muller(rng: np.random.Generator, n: int) -> np.ndarray:
    """n standard normal draws from pairs of uniforms."""
    m = (n + 1) // 2
    u1 = 1.0 - rng.random(m)  # (0, 1], keeps log finite
    u2 = rng.random(m)
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.empty(2 * m)
    z[0::2] = r * np.cos(2 * np.pi * u2)
    z[1::2] = r * np.sin(2 * np.pi * u2)
    return z[:n]


def instance_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(index)])))


def generate(cfg: SynthConfig) -> tuple[Dataset, GroundTruth]:
    m = cfg.instances_per_subject
    centers = subgroup_centers(cfg.dim, cfg.n_subgroups, cfg.subgroup_offset)
    n_insep = cfg.n_inseparable_subjects
    n_sep_inst = cfg.n_separable_instances

    subjects, labels, groups = [], [], []
    for s in range(cfg.n_neg_subjects):
        sid = f"neg{s:03d}"
        subjects += [sid] * m
        labels += [False] * m
        groups += [0] * m
    has_sep = {f"neg{s:03d}": False for s in range(cfg.n_neg_subjects)}
    for s in range(cfg.n_pos_subjects):
        sid = f"pos{s:03d}"
        if s < n_insep:
            g = [0] * m
        else:
            k = (s - n_insep) % cfg.n_subgroups + 1
            g = [k] * n_sep_inst + [0] * (m - n_sep_inst)
        subjects += [sid] * m
        labels += [True] * m
        groups += g
        has_sep[sid] = any(v > 0 for v in g)

    n = len(subjects)
    X = np.empty((n, cfg.dim))
    for i, g in enumerate(groups):
        z = box_muller(instance_rng(cfg.seed, i), cfg.dim)
        X[i] = z if g == 0 else centers[g - 1] + cfg.subgroup_sigma * z

    data = Dataset(
        X=X,
        y=np.array(labels, dtype=bool),
        subject_ids=tuple(subjects),
        feature_names=tuple(f"f{j + 1}" for j in range(cfg.dim)),
    )
    truth = GroundTruth(subgroup=np.array(groups, dtype=np.int64), has_separable_instance=has_sep, centers=centers)
    return data, truth


def save_truth(truth: GroundTruth, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("instance_index,subgroup_id\n")
        for i, g in enumerate(truth.subgroup):
            fh.write(f"{i},{int(g)}\n")


def load_truth(path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "instance_index,subgroup_id":
            raise ValueError(f"{path}: unexpected header {header!r}")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    out = np.zeros(len(rows), dtype=np.int64)
    for i, g in rows:
        out[int(i)] = int(g)
    return out
