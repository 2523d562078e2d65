"""Labeled, subject-grouped instance data.

Instances are rows of a feature matrix. Each row carries a binary label and
the id of the subject (bag) it came from. Row order is the canonical identity
used by every downstream module.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

STD_FLOOR = 1e-12


class Label(enum.IntEnum):
    NEGATIVE = 0
    POSITIVE = 1


class DatasetError(ValueError):
    """Malformed or inconsistent instance data."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable labeled instances.

    ``X`` has shape (n, d); ``y`` is a boolean vector (True = positive);
    ``subject_ids`` is a tuple of n strings.
    """

    X: np.ndarray
    y: np.ndarray
    subject_ids: tuple[str, ...]
    feature_names: tuple[str, ...]

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim != 2:
            raise DatasetError(f"feature matrix must be 2-D, got shape {X.shape}")
        y = np.asarray(self.y).astype(bool)
        n, d = X.shape
        if y.shape != (n,):
            raise DatasetError(f"label vector has shape {y.shape}, expected ({n},)")
        if len(self.subject_ids) != n:
            raise DatasetError(f"{len(self.subject_ids)} subject ids for {n} instances")
        if len(self.feature_names) != d:
            raise DatasetError(f"{len(self.feature_names)} feature names for dimension {d}")
        if d < 1:
            raise DatasetError("dataset needs at least one feature")
        if not np.all(np.isfinite(X)):
            row, col = np.argwhere(~np.isfinite(X))[0]
            raise DatasetError(f"non-finite feature at instance {row}, feature {col}")
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "subject_ids", tuple(str(s) for s in self.subject_ids))
        object.__setattr__(self, "feature_names", tuple(str(f) for f in self.feature_names))

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def label(self, i: int) -> Label:
        return Label.POSITIVE if self.y[i] else Label.NEGATIVE

    def subset(self, indices: Sequence[int]) -> "Dataset":
        idx = np.asarray(indices, dtype=np.intp)
        return Dataset(
            X=self.X[idx],
            y=self.y[idx],
            subject_ids=tuple(self.subject_ids[i] for i in idx),
            feature_names=self.feature_names,
        )

    def with_features(self, X: np.ndarray) -> "Dataset":
        return Dataset(X=X, y=self.y, subject_ids=self.subject_ids, feature_names=self.feature_names)

    def require_both_classes(self) -> None:
        if not self.y.any():
            raise DatasetError("dataset has no positive instances")
        if self.y.all():
            raise DatasetError("dataset has no negative instances")

    def equals(self, other: "Dataset") -> bool:
        return (
            self.subject_ids == other.subject_ids
            and self.feature_names == other.feature_names
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.X, other.X)
        )


@dataclass(frozen=True, eq=False)
class StandardizationParams:
    mean: np.ndarray
    stddev: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", _frozen(np.asarray(self.mean, dtype=np.float64)))
        object.__setattr__(self, "stddev", _frozen(np.asarray(self.stddev, dtype=np.float64)))

    @classmethod
    def identity(cls, dim: int) -> "StandardizationParams":
        return cls(np.zeros(dim), np.ones(dim))

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.dim:
            raise DatasetError(f"dimension mismatch: data has {X.shape[-1]} features, standardizer {self.dim}")
        return (X - self.mean) / self.stddev

    def inverse(self, Z: np.ndarray) -> np.ndarray:
        return np.asarray(Z) * self.stddev + self.mean


def load_csv(path: str | Path) -> Dataset:
    """Read ``subject_id,label,<features...>`` rows.

    Labels are 1 (positive) or 0 (negative). Errors name the 1-based data
    row and the offending column.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if len(header) < 3 or header[0] != "subject_id" or header[1] != "label":
            raise DatasetError(
                f"{path}: header must be 'subject_id,label,<feature>...', got {','.join(header)!r}"
            )
        seen = set()
        for name in header:
            if name in seen:
                raise DatasetError(f"{path}: duplicate header column {name!r}")
            if not name:
                raise DatasetError(f"{path}: empty header column name")
            seen.add(name)
        names = header[2:]
        ncol = len(header)

        subjects, labels, rows = [], [], []
        for rownum, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != ncol:
                raise DatasetError(f"{path}: row {rownum} has {len(row)} columns, expected {ncol}")
            lab = row[1].strip()
            if lab not in ("0", "1"):
                raise DatasetError(f"{path}: row {rownum}, column 'label': expected 0 or 1, got {lab!r}")
            values = []
            for name, cell in zip(names, row[2:]):
                try:
                    v = float(cell)
                except ValueError:
                    raise DatasetError(
                        f"{path}: row {rownum}, column {name!r}: not a number: {cell!r}"
                    ) from None
                if not math.isfinite(v):
                    raise DatasetError(f"{path}: row {rownum}, column {name!r}: non-finite value {cell!r}")
                values.append(v)
            subjects.append(row[0].strip())
            labels.append(lab == "1")
            rows.append(values)

    if not rows:
        raise DatasetError(f"{path}: no data rows")
    return Dataset(
        X=np.array(rows, dtype=np.float64),
        y=np.array(labels, dtype=bool),
        subject_ids=tuple(subjects),
        feature_names=tuple(names),
    )


def save_csv(data: Dataset, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subject_id", "label", *data.feature_names])
        for sid, lab, row in zip(data.subject_ids, data.y, data.X):
            w.writerow([sid, int(lab), *(repr(float(v)) for v in row)])


def fit_standardizer(data: Dataset) -> StandardizationParams:
    """Per-feature mean and population stddev, floored at ``STD_FLOOR``."""
    if len(data) == 0:
        raise DatasetError("cannot fit a standardizer on an empty dataset")
    mean = data.X.mean(axis=0)
    std = data.X.std(axis=0, ddof=0)
    return StandardizationParams(mean, np.maximum(std, STD_FLOOR))


def apply_standardizer(data: Dataset, p: StandardizationParams) -> Dataset:
    return data.with_features(p.transform(data.X))


def split_by_label(data: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Return (positive indices, negative indices), each in ascending order."""
    return np.flatnonzero(data.y), np.flatnonzero(~data.y)


def group_by_subject(data: Dataset) -> dict[str, list[int]]:
    """Map subject id to its instance indices, in first-appearance order.

    A subject whose instances carry both labels is an error.
    """
    groups: dict[str, list[int]] = {}
    label_of: dict[str, bool] = {}
    for i, sid in enumerate(data.subject_ids):
        lab = bool(data.y[i])
        if sid in label_of and label_of[sid] != lab:
            raise DatasetError(f"subject {sid!r} has instances with both labels (instance {i})")
        label_of[sid] = lab
        groups.setdefault(sid, []).append(i)
    return groups


def subject_labels(data: Dataset) -> dict[str, bool]:
    return {sid: bool(data.y[idx[0]]) for sid, idx in group_by_subject(data).items()}
