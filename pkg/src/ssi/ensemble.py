"""Iterative exclusive-cluster discovery and the OR-ensemble built from it.

The training loop clusters the remaining positives together with all
negatives for n = 2, 3, ... clusters. As soon as some cluster is
"exclusive" (enough positives, few negatives among them), one classifier is
trained per such cluster against every negative, kept if it recovers enough
of that cluster's positives, and the cluster's positives are dropped from the
pool before the count restarts. The loop ends once every cluster is at most
``rho`` instances large (or the cluster count hits ``k_max``).

An instance is positive if any kept classifier flags it; a subject is
positive if any of its instances is.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import classify, infotheory
from .classify import ClassifierSpec, TrainedClassifier
from .cluster import ClusterStat, cluster_stats, kmeans
from .dataset import Dataset, StandardizationParams, fit_standardizer, group_by_subject, split_by_label


@dataclass(frozen=True)
class Rho:
    """Cluster-size stop threshold: an absolute count or a fraction of the current pool."""

    value: float
    fraction: bool = False

    def __post_init__(self):
        if self.fraction and not 0 < self.value <= 1:
            raise ValueError("fractional rho must lie in (0, 1]")
        if not self.fraction and (self.value < 1 or self.value != int(self.value)):
            raise ValueError("absolute rho must be an integer >= 1")

    def resolve(self, pool_size: int) -> int:
        if self.fraction:
            return max(1, math.ceil(self.value * pool_size))
        return int(self.value)

    @classmethod
    def parse(cls, text: str) -> "Rho":
        text = str(text).strip()
        if text.endswith("%"):
            return cls(float(text[:-1]) / 100.0, fraction=True)
        return cls(int(text))

    def __str__(self) -> str:
        return f"{self.value * 100:g}%" if self.fraction else str(int(self.value))


@dataclass(frozen=True)
class SSIConfig:
    rho: Rho | None = None  # None: max(2(s+1), ceil(0.05 * pool))
    min_positives: int | None = None  # s; None: max(5, ceil(0.01 |P|))
    neg_tolerance: float = 0.2  # t
    min_sensitivity: float = 0.9  # st
    k_max: int | None = None  # None: min(50, |P u N|)
    # unweighted: balanced weights let a half-plane "recover" any small background cluster
    classifier: ClassifierSpec = field(default_factory=lambda: ClassifierSpec(class_weighting="none"))
    standardize: bool = True
    seed: int = 0
    remove_only_if_accepted: bool = False
    gate_holdout_fraction: float = 0.0
    gate_threshold: float = 0.5
    feature_select: int | None = None
    n_bins: int = 10
    decision_threshold: float = 0.5
    threads: int = 1

    def __post_init__(self):
        if self.min_positives is not None and self.min_positives < 1:
            raise ValueError("min_positives (s) must be >= 1")
        if self.neg_tolerance < 0:
            raise ValueError("neg_tolerance (t) must be >= 0")
        if not 0.0 <= self.min_sensitivity <= 1.0:
            raise ValueError("min_sensitivity (st) must lie in [0, 1]")
        if self.k_max is not None and self.k_max < 2:
            raise ValueError("k_max must be >= 2")
        if not 0.0 <= self.gate_holdout_fraction < 1.0:
            raise ValueError("gate_holdout_fraction must lie in [0, 1)")
        if self.feature_select is not None and self.feature_select < 1:
            raise ValueError("feature_select must be >= 1")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    def resolve_s(self, n_pos: int) -> int:
        if self.min_positives is not None:
            return self.min_positives
        return max(5, math.ceil(0.01 * n_pos))

    def resolve_rho(self, pool_size: int, s: int) -> int:
        if self.rho is not None:
            return self.rho.resolve(pool_size)
        return max(2 * (s + 1), math.ceil(0.05 * pool_size))

    def resolve_k_max(self, n_total: int) -> int:
        return min(50, n_total) if self.k_max is None else self.k_max

    def to_dict(self) -> dict:
        d = asdict(self)
        d["rho"] = None if self.rho is None else str(self.rho)
        return d


@dataclass(frozen=True, eq=False)
class ExclusiveCluster:
    positive_members: tuple[int, ...]  # dataset indices
    negative_members: tuple[int, ...]
    centroid: tuple[float, ...]  # in the (standardized) training space
    round: int
    n: int
    cluster: int

    @property
    def n_pos(self) -> int:
        return len(self.positive_members)

    @property
    def n_neg(self) -> int:
        return len(self.negative_members)


@dataclass(frozen=True, eq=False)
class Detector:
    classifier: TrainedClassifier
    source: ExclusiveCluster
    gate_sensitivity: float
    accepted: bool
    selected_features: tuple[int, ...] | None = None
    feature_scores: tuple[float, ...] | None = None

    def proba(self, Z: np.ndarray) -> np.ndarray:
        """Probabilities for standardized inputs ``Z``."""
        if self.selected_features is not None:
            Z = Z[:, list(self.selected_features)]
        return self.classifier.predict_proba(Z)


@dataclass(frozen=True)
class TraceEvent:
    round: int
    n: int
    cluster: int
    size: int
    P_j: int
    N_j: int
    decision: str
    extra: tuple[tuple[str, str], ...] = ()

    def to_line(self) -> str:
        parts = [
            f"round={self.round}",
            f"n={self.n}",
            f"cluster={self.cluster}",
            f"size={self.size}",
            f"P_j={self.P_j}",
            f"N_j={self.N_j}",
            f"decision={self.decision}",
        ]
        parts += [f"{k}={v}" for k, v in self.extra]
        return " ".join(parts)

    @classmethod
    def from_line(cls, line: str) -> "TraceEvent":
        kv = dict(tok.split("=", 1) for tok in line.split())
        base = {k: kv.pop(k) for k in ("round", "n", "cluster", "size", "P_j", "N_j", "decision")}
        return cls(
            round=int(base["round"]),
            n=int(base["n"]),
            cluster=int(base["cluster"]),
            size=int(base["size"]),
            P_j=int(base["P_j"]),
            N_j=int(base["N_j"]),
            decision=base["decision"],
            extra=tuple(kv.items()),
        )

    def get(self, key: str, default=None):
        return dict(self.extra).get(key, default)


@dataclass
class FitTrace:
    events: list[TraceEvent] = field(default_factory=list)
    initial_positives: tuple[int, ...] = ()
    remaining_positives: tuple[int, ...] = ()
    warnings: list[str] = field(default_factory=list)

    def exclusive_clusters(self) -> list[TraceEvent]:
        return [e for e in self.events if e.decision == "exclusive"]

    def removals(self) -> list[tuple[int, ...]]:
        out = []
        for e in self.events:
            if e.decision == "removed":
                members = e.get("members", "")
                out.append(tuple(int(v) for v in members.split(",") if v))
        return out

    def replay_remaining(self) -> tuple[int, ...]:
        gone = set()
        for r in self.removals():
            gone.update(r)
        return tuple(i for i in self.initial_positives if i not in gone)

    def to_lines(self) -> list[str]:
        return [e.to_line() for e in self.events]


@dataclass(frozen=True, eq=False)
class EnsembleModel:
    detectors: tuple[Detector, ...]
    standardizer: StandardizationParams
    config: dict
    decision_threshold: float = 0.5

    @property
    def dim(self) -> int:
        return self.standardizer.dim

    def probabilities(self, X) -> np.ndarray:
        """Per-detector probabilities, shape (n, number of detectors)."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.dim:
            raise ValueError(f"dimension mismatch: input has {X.shape[1]} features, model expects {self.dim}")
        Z = self.standardizer.transform(X)
        if not self.detectors:
            return np.zeros((len(X), 0))
        return np.column_stack([d.proba(Z) for d in self.detectors])

    def flags(self, X) -> np.ndarray:
        return np.any(self.probabilities(X) >= self.decision_threshold, axis=1)


def find_exclusive_clusters(stats: Sequence[ClusterStat], t: float, s: int) -> list[int]:
    """Clusters with more than ``s`` positives and a negative/positive ratio below ``t``."""
    return [j for j, c in enumerate(stats) if c.positives > 0 and c.positives > s and c.negatives / c.positives < t]


def _derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1, np.uint64)[0])


def _train_detector(Z, ec: ExclusiveCluster, neg_idx, cfg: SSIConfig, s: int) -> Detector:
    pos = np.asarray(ec.positive_members)
    holdout = np.array([], dtype=np.intp)
    if cfg.gate_holdout_fraction > 0 and len(pos) >= 2:
        rng = np.random.Generator(np.random.PCG64(_derive_seed(cfg.seed, ec.round, ec.n, ec.cluster)))
        perm = rng.permutation(len(pos))
        n_hold = min(len(pos) - 1, max(1, math.floor(cfg.gate_holdout_fraction * len(pos))))
        holdout = np.sort(pos[perm[:n_hold]])
        train_pos = np.sort(pos[perm[n_hold:]])
    else:
        train_pos = pos

    sel = scores = None
    Zp, Zn = Z[train_pos], Z[neg_idx]
    if cfg.feature_select is not None:
        spec = infotheory.BinningSpec(cfg.n_bins)
        scores = tuple(float(v) for v in infotheory.feature_scores(Zp, Zn, spec))
        sel = tuple(infotheory.select_features(Zp, Zn, min(cfg.feature_select, Z.shape[1]), spec))
        Zp, Zn = Zp[:, list(sel)], Zn[:, list(sel)]

    clf = classify.train(Zp, Zn, cfg.classifier)
    gate_idx = holdout if len(holdout) else train_pos
    Zg = Z[gate_idx] if sel is None else Z[gate_idx][:, list(sel)]
    sens = classify.sensitivity_on(clf, Zg, cfg.gate_threshold)
    return Detector(
        classifier=clf,
        source=ec,
        gate_sensitivity=sens,
        accepted=sens > cfg.min_sensitivity,
        selected_features=sel,
        feature_scores=scores,
    )


def fit(data: Dataset, cfg: SSIConfig = SSIConfig()) -> tuple[EnsembleModel, FitTrace]:
    data.require_both_classes()
    pos_idx, neg_idx = split_by_label(data)
    std = fit_standardizer(data) if cfg.standardize else StandardizationParams.identity(data.dim)
    Z = std.transform(data.X)
    y = data.y

    s = cfg.resolve_s(len(pos_idx))
    k_max = cfg.resolve_k_max(len(data))
    trace = FitTrace(initial_positives=tuple(int(i) for i in pos_idx))
    remaining = pos_idx.copy()
    detectors: list[Detector] = []

    round_no, n = 1, 1
    sizes = [len(remaining) + len(neg_idx)]
    pool = np.sort(np.concatenate([remaining, neg_idx]))
    executor = ThreadPoolExecutor(cfg.threads) if cfg.threads > 1 else None
    try:
        while True:
            rho = cfg.resolve_rho(len(pool), s)
            if not (n == 1 or max(sizes) > rho):
                break
            if len(remaining) == 0:
                # no exclusive cluster can form without positives
                break
            cap = min(k_max, len(pool))
            if n >= cap:
                msg = f"k_max reached (n={n}, largest cluster {max(sizes)} > rho={rho})"
                trace.warnings.append(msg)
                trace.events.append(TraceEvent(round_no, n, -1, max(sizes), 0, 0, "kmax_reached", (("rho", str(rho)),)))
                break
            n += 1
            model = kmeans(Z[pool], n, seed=_derive_seed(cfg.seed, round_no, n))
            stats = cluster_stats(model, y[pool])
            sizes = [c.size for c in stats]
            ec_ids = find_exclusive_clusters(stats, cfg.neg_tolerance, s)
            for j, c in enumerate(stats):
                trace.events.append(
                    TraceEvent(round_no, n, j, c.size, c.positives, c.negatives,
                               "exclusive" if j in ec_ids else "not_exclusive")
                )
            if not ec_ids:
                continue

            clusters = []
            for j in ec_ids:
                members = pool[model.assignments == j]
                clusters.append(
                    ExclusiveCluster(
                        positive_members=tuple(int(i) for i in members[y[members]]),
                        negative_members=tuple(int(i) for i in members[~y[members]]),
                        centroid=tuple(float(v) for v in model.centroids[j]),
                        round=round_no,
                        n=n,
                        cluster=j,
                    )
                )
            job = lambda ec: _train_detector(Z, ec, neg_idx, cfg, s)  # noqa: E731
            results = list(executor.map(job, clusters)) if executor else [job(ec) for ec in clusters]

            removed: set[int] = set()
            for det in results:
                ec = det.source
                extra = (("gate_sensitivity", repr(det.gate_sensitivity)),)
                if det.selected_features is not None:
                    extra += (
                        ("features", ",".join(map(str, det.selected_features))),
                        ("mi_bits", ",".join(f"{v:.6g}" for v in det.feature_scores)),
                    )
                trace.events.append(
                    TraceEvent(round_no, n, ec.cluster, ec.n_pos + ec.n_neg, ec.n_pos, ec.n_neg,
                               "accepted" if det.accepted else "rejected", extra)
                )
                if det.accepted:
                    detectors.append(det)
                if det.accepted or not cfg.remove_only_if_accepted:
                    removed.update(ec.positive_members)
                    trace.events.append(
                        TraceEvent(round_no, n, ec.cluster, ec.n_pos + ec.n_neg, ec.n_pos, ec.n_neg, "removed",
                                   (("members", ",".join(map(str, ec.positive_members))),))
                    )
            if not removed:
                # every cluster rejected and retained: keep growing n rather than re-running the same round
                continue
            remaining = np.array([i for i in remaining if int(i) not in removed], dtype=np.intp)
            pool = np.sort(np.concatenate([remaining, neg_idx]))
            round_no += 1
            n = 1
            sizes = [len(pool)]
    finally:
        if executor:
            executor.shutdown()

    trace.remaining_positives = tuple(int(i) for i in remaining)
    config = cfg.to_dict()
    config["resolved_min_positives"] = s
    config["resolved_k_max"] = k_max
    model = EnsembleModel(
        detectors=tuple(detectors),
        standardizer=std,
        config=config,
        decision_threshold=cfg.decision_threshold,
    )
    return model, trace


def predict_instance(model: EnsembleModel, x) -> tuple[bool, list[float]]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("predict_instance expects a single feature vector")
    probs = model.probabilities(x[None, :])[0]
    return bool(np.any(probs >= model.decision_threshold)), [float(p) for p in probs]


def predict_subject(model: EnsembleModel, bag) -> bool:
    bag = np.atleast_2d(np.asarray(bag, dtype=np.float64))
    if bag.size == 0:
        raise ValueError("cannot classify an empty bag")
    return bool(model.flags(bag).any())


def predict_subjects(model: EnsembleModel, data: Dataset) -> dict[str, bool]:
    flags = model.flags(data.X)
    return {sid: bool(flags[idx].any()) for sid, idx in group_by_subject(data).items()}
