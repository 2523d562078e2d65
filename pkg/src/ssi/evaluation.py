"""Subject-level metrics, pooling rules, and subject-grouped cross-validation."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from decimal import ROUND_DOWN, Decimal
from typing import Callable, Sequence

import numpy as np

from . import classify
from .classify import ClassifierSpec, TrainedClassifier
from .dataset import Dataset, StandardizationParams, fit_standardizer, group_by_subject
from .ensemble import SSIConfig, fit

POOLING_KINDS = ("majority", "best_chance", "any_instance")
SENTINEL = 1.0 + 1e-9  # above every fraction: labels all bags negative


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @classmethod
    def from_predictions(cls, truth: Sequence[bool], pred: Sequence[bool]) -> "ConfusionCounts":
        t = np.asarray(truth, dtype=bool)
        p = np.asarray(pred, dtype=bool)
        return cls(
            tp=int(np.sum(t & p)),
            fp=int(np.sum(~t & p)),
            tn=int(np.sum(~t & ~p)),
            fn=int(np.sum(t & ~p)),
        )

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def sensitivity(c: ConfusionCounts) -> float:
    if c.tp + c.fn < 1:
        raise ValueError("sensitivity is undefined without positive units")
    return c.tp / (c.tp + c.fn)


def specificity(c: ConfusionCounts) -> float:
    if c.tn + c.fp < 1:
        raise ValueError("specificity is undefined without negative units")
    return c.tn / (c.tn + c.fp)


def accuracy(c: ConfusionCounts) -> float:
    if c.total < 1:
        raise ValueError("accuracy is undefined without units")
    return (c.tp + c.tn) / c.total


def format_percent(value: float) -> str:
    """Render a rate as a percentage truncated to two decimals, trailing zeros dropped.

    0.857142... -> '85.71', 0.714285... -> '71.42', 1.0 -> '100'.
    """
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "nan"
    pct = (Decimal(repr(float(value))) * 100).quantize(Decimal("0.01"), rounding=ROUND_DOWN)
    text = format(pct, "f")
    if "." in text:
        text = text.rstrip("0").rstrip(".")
    return text


@dataclass(frozen=True)
class PoolingStrategy:
    kind: str = "majority"
    threshold: float = 0.5

    def __post_init__(self):
        if self.kind not in POOLING_KINDS:
            raise ValueError(f"unknown pooling kind {self.kind!r}")
        if self.kind == "majority" and self.threshold != 0.5:
            raise ValueError("majority pooling uses threshold 0.5")
        if not 0.0 <= self.threshold <= SENTINEL:
            raise ValueError("pooling threshold must lie in [0, 1]")

    @classmethod
    def majority(cls) -> "PoolingStrategy":
        return cls("majority", 0.5)

    @classmethod
    def any_instance(cls) -> "PoolingStrategy":
        return cls("any_instance", 0.0)


def pool_subject(instance_flags: Sequence[bool], strategy: PoolingStrategy) -> bool:
    flags = np.asarray(instance_flags, dtype=bool)
    if flags.size == 0:
        raise ValueError("cannot pool an empty bag")
    if strategy.kind == "any_instance":
        return bool(flags.any())
    return bool(flags.mean() >= strategy.threshold)


def _accuracy_at(fractions: np.ndarray, labels: np.ndarray, thr: float) -> float:
    return float(np.mean((fractions >= thr) == labels))


def best_chance_threshold(fractions: Sequence[float], bag_labels: Sequence[bool]) -> tuple[float, float]:
    """Bag-fraction threshold with the best accuracy on these very labels.

    This peeks at the evaluation labels: it is an oracle baseline, not a
    method. Ties prefer 0.5, then the lowest threshold.
    """
    f = np.asarray(fractions, dtype=np.float64)
    lab = np.asarray(bag_labels, dtype=bool)
    if f.size == 0:
        raise ValueError("need at least one bag")
    if f.shape != lab.shape:
        raise ValueError("fractions and labels differ in length")
    candidates = sorted({0.0, 0.5, SENTINEL, *map(float, f)})
    scores = {thr: _accuracy_at(f, lab, thr) for thr in candidates}
    best = max(scores.values())
    if scores[0.5] == best:
        return 0.5, best
    return min(t for t, a in scores.items() if a == best), best


@dataclass(frozen=True)
class MetricsReport:
    method: str
    pooling: str
    counts: ConfusionCounts
    threshold: float
    oracle: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def sensitivity(self) -> float:
        return sensitivity(self.counts) if self.counts.tp + self.counts.fn else float("nan")

    @property
    def specificity(self) -> float:
        return specificity(self.counts) if self.counts.tn + self.counts.fp else float("nan")

    @property
    def accuracy(self) -> float:
        return accuracy(self.counts)

    CSV_HEADER = "method,pooling,sensitivity,specificity,accuracy,threshold"

    def to_csv_row(self) -> str:
        return ",".join(
            [
                self.method,
                self.pooling,
                format_percent(self.sensitivity),
                format_percent(self.specificity),
                format_percent(self.accuracy),
                repr(float(self.threshold)),
            ]
        )

    def to_text(self) -> str:
        lines = [
            f"method = {self.method}",
            f"pooling = {self.pooling}",
            f"tp = {self.counts.tp}",
            f"fp = {self.counts.fp}",
            f"tn = {self.counts.tn}",
            f"fn = {self.counts.fn}",
            f"sensitivity = {format_percent(self.sensitivity)}",
            f"specificity = {format_percent(self.specificity)}",
            f"accuracy = {format_percent(self.accuracy)}",
            f"threshold = {float(self.threshold)!r}",
        ]
        if self.oracle:
            lines.append("note = oracle baseline (threshold chosen on the evaluation labels)")
        lines += [f"{k} = {v}" for k, v in self.extra.items()]
        return "\n".join(lines)


def bag_fractions(data: Dataset, instance_flags) -> tuple[list[str], np.ndarray, np.ndarray]:
    """Per-subject (ids, flagged fraction, label), in first-appearance order."""
    flags = np.asarray(instance_flags, dtype=bool)
    if flags.shape != (len(data),):
        raise ValueError("one flag per instance required")
    groups = group_by_subject(data)
    ids = list(groups)
    fr = np.array([flags[groups[s]].mean() for s in ids])
    lab = np.array([bool(data.y[groups[s][0]]) for s in ids])
    return ids, fr, lab


def evaluate_subjects(
    data: Dataset, instance_flags, pooling: str, method: str = "ssi", subjects: Sequence[str] | None = None
) -> MetricsReport:
    """Subject-level confusion counts under one pooling rule.

    ``subjects`` restricts which subjects are scored (e.g. only those with a
    separable instance); best-chance thresholds are still chosen over that
    same restricted set.
    """
    ids, fr, lab = bag_fractions(data, instance_flags)
    flags = np.asarray(instance_flags, dtype=bool)
    groups = group_by_subject(data)
    if subjects is not None:
        keep = set(subjects)
        sel = np.array([s in keep for s in ids], dtype=bool)
        ids = [s for s, k in zip(ids, sel) if k]
        fr, lab = fr[sel], lab[sel]
    anyflag = np.array([flags[groups[s]].any() for s in ids], dtype=bool)

    oracle = False
    if pooling == "any_instance":
        thr, pred = 0.0, anyflag
    elif pooling == "majority":
        thr = 0.5
        pred = fr >= thr
    elif pooling == "best_chance":
        thr, _ = best_chance_threshold(fr, lab)
        pred = fr >= thr
        oracle = True
    else:
        raise ValueError(f"unknown pooling kind {pooling!r}")
    return MetricsReport(method, pooling, ConfusionCounts.from_predictions(lab, pred), thr, oracle)


def _fold_assignment(data: Dataset, folds: int, seed: int) -> dict[str, int]:
    groups = group_by_subject(data)
    labels = {s: bool(data.y[idx[0]]) for s, idx in groups.items()}
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    fold_of: dict[str, int] = {}
    for cls in (True, False):
        subjects = [s for s in groups if labels[s] == cls]
        if len(subjects) < folds:
            kind = "positive" if cls else "negative"
            raise ValueError(f"only {len(subjects)} {kind} subjects for {folds} folds")
        for pos, i in enumerate(rng.permutation(len(subjects))):
            fold_of[subjects[i]] = pos % folds
    return fold_of


@dataclass(frozen=True)
class CrossValidationResult:
    folds: tuple[MetricsReport, ...]
    mean: dict
    std: dict
    test_subjects: tuple[tuple[str, ...], ...]


def ssi_fit_predict(cfg: SSIConfig) -> Callable[[Dataset, Dataset], np.ndarray]:
    def run(train: Dataset, test: Dataset) -> np.ndarray:
        model, _ = fit(train, cfg)
        return model.flags(test.X)

    return run


def cross_validate(
    data: Dataset,
    cfg: SSIConfig | None = None,
    folds: int = 5,
    seed: int = 0,
    pooling: str = "any_instance",
    method: str = "ssi",
    threads: int = 1,
    fit_predict: Callable[[Dataset, Dataset], np.ndarray] | None = None,
) -> CrossValidationResult:
    """Subject-level, label-stratified k-fold evaluation.

    Each fold fits on the training subjects (SSI with ``cfg`` unless a
    ``fit_predict(train, test) -> test instance flags`` callable is given) and
    scores the held-out subjects.
    """
    if fit_predict is None:
        fit_predict = ssi_fit_predict(cfg if cfg is not None else SSIConfig())
    if folds < 2:
        raise ValueError("folds must be >= 2")
    fold_of = _fold_assignment(data, folds, seed)

    def run(k):
        test_idx = [i for i, s in enumerate(data.subject_ids) if fold_of[s] == k]
        train_idx = [i for i, s in enumerate(data.subject_ids) if fold_of[s] != k]
        train, test = data.subset(train_idx), data.subset(test_idx)
        flags = fit_predict(train, test)
        rep = evaluate_subjects(test, flags, pooling, method)
        return replace(rep, extra={"fold": k}), tuple(dict.fromkeys(test.subject_ids))

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(run, range(folds)))
    else:
        results = [run(k) for k in range(folds)]

    reports = tuple(r for r, _ in results)
    mean, std = {}, {}
    for key in ("sensitivity", "specificity", "accuracy"):
        vals = np.array([getattr(r, key) for r in reports])
        mean[key] = float(np.mean(vals))
        std[key] = float(np.std(vals, ddof=0))
    return CrossValidationResult(reports, mean, std, tuple(s for _, s in results))


@dataclass(frozen=True, eq=False)
class GlobalBaseline:
    """One classifier trained on every positive against every negative."""

    classifier: TrainedClassifier
    standardizer: StandardizationParams
    decision_threshold: float = 0.5

    @classmethod
    def fit(cls, train: Dataset, spec: ClassifierSpec, standardize: bool = True) -> "GlobalBaseline":
        train.require_both_classes()
        std = fit_standardizer(train) if standardize else StandardizationParams.identity(train.dim)
        Z = std.transform(train.X)
        return cls(classify.train(Z[train.y], Z[~train.y], spec), std)

    def flags(self, X) -> np.ndarray:
        return self.classifier.predict_proba(self.standardizer.transform(X)) >= self.decision_threshold
