"""JSON model files for fitted ensembles.

Floats are written by ``json`` with ``repr`` semantics, the shortest string
that round-trips, so a load/save cycle reproduces every parameter bit for bit.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .classify import TrainedClassifier
from .dataset import StandardizationParams
from .ensemble import Detector, EnsembleModel, ExclusiveCluster

FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    pass


def _floats(a) -> list:
    return [float(v) for v in np.asarray(a, dtype=np.float64).ravel()]


def _detector_to_dict(det: Detector) -> dict:
    clf = det.classifier
    src = det.source
    out = {
        "kind": clf.kind,
        "weights": _floats(clf.weights),
        "bias": float(clf.bias),
        "gate_sensitivity": float(det.gate_sensitivity),
        "selected_features": None if det.selected_features is None else list(det.selected_features),
        "feature_scores": None if det.feature_scores is None else list(det.feature_scores),
        "source_cluster": {
            "round": src.round,
            "n": src.n,
            "cluster": src.cluster,
            "P_j": src.n_pos,
            "N_j": src.n_neg,
            "centroid": list(src.centroid),
            "positive_members": list(src.positive_members),
            "negative_members": list(src.negative_members),
        },
    }
    if clf.kind == "rbf":
        out["gamma"] = float(clf.gamma)
        out["references"] = [_floats(r) for r in clf.references]
    return out


def _detector_from_dict(d: dict) -> Detector:
    kind = d["kind"]
    refs = None
    gamma = None
    if kind == "rbf":
        refs = np.array(d["references"], dtype=np.float64)
        gamma = float(d["gamma"])
    clf = TrainedClassifier(
        kind=kind,
        weights=np.array(d["weights"], dtype=np.float64),
        bias=float(d["bias"]),
        gamma=gamma,
        references=refs,
    )
    src = d["source_cluster"]
    ec = ExclusiveCluster(
        positive_members=tuple(src["positive_members"]),
        negative_members=tuple(src["negative_members"]),
        centroid=tuple(src["centroid"]),
        round=src["round"],
        n=src["n"],
        cluster=src["cluster"],
    )
    sel = d.get("selected_features")
    scores = d.get("feature_scores")
    return Detector(
        classifier=clf,
        source=ec,
        gate_sensitivity=float(d["gate_sensitivity"]),
        accepted=True,
        selected_features=None if sel is None else tuple(sel),
        feature_scores=None if scores is None else tuple(scores),
    )


def model_to_dict(model: EnsembleModel, run_config: dict | None = None) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "type": "ssi-ensemble",
        "seed": model.config.get("seed"),
        "decision_threshold": float(model.decision_threshold),
        "standardizer": {"mean": _floats(model.standardizer.mean), "stddev": _floats(model.standardizer.stddev)},
        "fit_config": model.config,
        "config": run_config if run_config is not None else model.config,
        "detectors": [_detector_to_dict(d) for d in model.detectors],
    }


def model_from_dict(doc: dict) -> EnsembleModel:
    if doc.get("format_version") != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format_version {doc.get('format_version')!r}")
    try:
        std = StandardizationParams(doc["standardizer"]["mean"], doc["standardizer"]["stddev"])
        dets = tuple(_detector_from_dict(d) for d in doc["detectors"])
        return EnsembleModel(
            detectors=dets,
            standardizer=std,
            config=doc.get("fit_config", {}),
            decision_threshold=float(doc["decision_threshold"]),
        )
    except (KeyError, TypeError) as exc:
        raise ModelFormatError(f"malformed model file: {exc}") from exc


def dumps(model: EnsembleModel, run_config: dict | None = None) -> str:
    return json.dumps(model_to_dict(model, run_config), indent=1, sort_keys=True, allow_nan=False) + "\n"


def save(model: EnsembleModel, path: str | Path, run_config: dict | None = None) -> None:
    Path(path).write_text(dumps(model, run_config), encoding="utf-8")


def load(path: str | Path) -> EnsembleModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not a model file ({exc})") from exc
    return model_from_dict(doc)
