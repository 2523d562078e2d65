"""Flat run configuration: defaults, then a ``key = value`` file, then flags."""

from __future__ import annotations

from pathlib import Path
from typing import Any, Callable

from .classify import ClassifierSpec
from .ensemble import Rho, SSIConfig
from .synth import SynthConfig


class ConfigError(ValueError):
    pass


def _int(lo: int | None = None):
    def parse(v):
        try:
            x = int(str(v).strip())
        except ValueError:
            raise ConfigError(f"expected an integer, got {v!r}") from None
        if lo is not None and x < lo:
            raise ConfigError(f"must be >= {lo}, got {x}")
        return x

    return parse


def _float(lo: float | None = None, hi: float | None = None, strict_lo: bool = False):
    def parse(v):
        try:
            x = float(str(v).strip())
        except ValueError:
            raise ConfigError(f"expected a number, got {v!r}") from None
        if x != x or x in (float("inf"), float("-inf")):
            raise ConfigError(f"expected a finite number, got {v!r}")
        if lo is not None and (x < lo or (strict_lo and x == lo)):
            raise ConfigError(f"must be {'>' if strict_lo else '>='} {lo}, got {x}")
        if hi is not None and x > hi:
            raise ConfigError(f"must be <= {hi}, got {x}")
        return x

    return parse


def _bool(v):
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {v!r}")


def _choice(*options, aliases: dict | None = None):
    aliases = aliases or {}

    def parse(v):
        s = aliases.get(str(v).strip(), str(v).strip())
        if s not in options:
            raise ConfigError(f"expected one of {', '.join(options)}, got {v!r}")
        return s

    return parse


def _auto(inner):
    def parse(v):
        if v is None or str(v).strip().lower() in ("auto", "none", "off", ""):
            return None
        return inner(v)

    return parse


def _rho(v):
    try:
        return Rho.parse(v)
    except ValueError as exc:
        raise ConfigError(f"rho: {exc}") from None


# key -> (default, parser)
SCHEMA: dict[str, tuple[Any, Callable]] = {
    "seed": (0, _int(0)),
    "threads": (1, _int(1)),
    # synthetic data
    "dim": (2, _int(1)),
    "n_neg_subjects": (20, _int(1)),
    "n_pos_subjects": (20, _int(1)),
    "instances_per_subject": (10, _int(1)),
    "subgroups": (2, _int(0)),
    "subgroup_offset": (6.0, _float(0.0, strict_lo=True)),
    "subgroup_sigma": (0.5, _float(0.0, strict_lo=True)),
    "separable_fraction": (0.3, _float(0.0, 1.0)),
    "inseparable_subject_fraction": (0.2, _float(0.0, 1.0)),
    # exclusive-cluster loop
    "rho": (None, _auto(_rho)),
    "min_positives": (None, _auto(_int(1))),
    "neg_tolerance": (0.2, _float(0.0)),
    "min_sensitivity": (0.9, _float(0.0, 1.0)),
    "kmax": (None, _auto(_int(2))),
    "standardize": (True, _bool),
    "remove_only_if_accepted": (False, _bool),
    "gate_holdout_fraction": (0.0, _float(0.0, 0.99)),
    "gate_threshold": (0.5, _float(0.0, 1.0)),
    "feature_select": (None, _auto(_int(1))),
    "bins": (10, _int(2)),
    "decision_threshold": (0.5, _float(0.0, 1.0)),
    # detector classifier
    "classifier": ("linear", _choice("linear", "rbf")),
    "gamma": (0.5, _float(0.0, strict_lo=True)),
    "l2_lambda": (1e-3, _float(0.0)),
    "learning_rate": (0.1, _float(0.0, strict_lo=True)),
    "max_epochs": (2000, _int(1)),
    "tolerance": (1e-6, _float(0.0, strict_lo=True)),
    "class_weighting": ("none", _choice("balanced", "none")),
    # global baseline classifier
    "baseline_classifier": ("rbf", _choice("linear", "rbf")),
    "baseline_class_weighting": ("balanced", _choice("balanced", "none")),
    # evaluation
    "pooling": ("any_instance", _choice("any_instance", "majority", "best_chance",
                                        aliases={"any": "any_instance", "best-chance": "best_chance"})),
    "baseline": ("none", _choice("none", "global")),
    "folds": (5, _int(2)),
}


def defaults() -> dict:
    return {k: v for k, (v, _) in SCHEMA.items()}


def parse_value(key: str, value) -> Any:
    if key not in SCHEMA:
        raise ConfigError(f"unknown configuration key {key!r}")
    try:
        return SCHEMA[key][1](value)
    except ConfigError as exc:
        raise ConfigError(f"{key}: {exc}") from None


def read_config_file(path: str | Path) -> dict:
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        key = key.replace("-", "_")
        try:
            out[key] = parse_value(key, value)
        except ConfigError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from None
    return out


def resolve(file_path: str | Path | None = None, overrides: dict | None = None) -> dict:
    cfg = defaults()
    if file_path is not None:
        cfg.update(read_config_file(file_path))
    for key, value in (overrides or {}).items():
        if value is not None:
            cfg[key] = parse_value(key, value)
    return cfg


def echo(cfg: dict) -> dict:
    """JSON-friendly copy of a resolved config."""
    return {k: (str(v) if isinstance(v, Rho) else v) for k, v in sorted(cfg.items())}


def synth_config(cfg: dict) -> SynthConfig:
    try:
        return SynthConfig(
            dim=cfg["dim"],
            n_neg_subjects=cfg["n_neg_subjects"],
            n_pos_subjects=cfg["n_pos_subjects"],
            instances_per_subject=cfg["instances_per_subject"],
            n_subgroups=cfg["subgroups"],
            subgroup_offset=cfg["subgroup_offset"],
            subgroup_sigma=cfg["subgroup_sigma"],
            separable_fraction=cfg["separable_fraction"],
            inseparable_subject_fraction=cfg["inseparable_subject_fraction"],
            seed=cfg["seed"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def classifier_spec(cfg: dict, baseline: bool = False) -> ClassifierSpec:
    kind = cfg["baseline_classifier"] if baseline else cfg["classifier"]
    weighting = cfg["baseline_class_weighting"] if baseline else cfg["class_weighting"]
    try:
        return ClassifierSpec(
            kind=kind,
            l2_lambda=cfg["l2_lambda"],
            rbf_gamma=cfg["gamma"] if kind == "rbf" else None,
            learning_rate=cfg["learning_rate"],
            max_epochs=cfg["max_epochs"],
            tolerance=cfg["tolerance"],
            class_weighting=weighting,
            seed=cfg["seed"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def ssi_config(cfg: dict) -> SSIConfig:
    try:
        return SSIConfig(
            rho=cfg["rho"],
            min_positives=cfg["min_positives"],
            neg_tolerance=cfg["neg_tolerance"],
            min_sensitivity=cfg["min_sensitivity"],
            k_max=cfg["kmax"],
            classifier=classifier_spec(cfg),
            standardize=cfg["standardize"],
            seed=cfg["seed"],
            remove_only_if_accepted=cfg["remove_only_if_accepted"],
            gate_holdout_fraction=cfg["gate_holdout_fraction"],
            gate_threshold=cfg["gate_threshold"],
            feature_select=cfg["feature_select"],
            n_bins=cfg["bins"],
            decision_threshold=cfg["decision_threshold"],
            threads=cfg["threads"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
