"""Class-weighted L2 logistic regression, primal or over an RBF feature map.

Training is full-batch gradient descent from zero. The rbf kind expands every
input into kernel values against all training points (the reference set), so
its score is ``sum_i coef_i * exp(-gamma * |x - r_i|^2) + bias``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

LOSS_SLACK = 1e-12


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str = "linear"
    l2_lambda: float = 1e-3
    rbf_gamma: float | None = None
    learning_rate: float = 0.1
    max_epochs: int = 2000
    tolerance: float = 1e-6
    class_weighting: str = "balanced"
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("linear", "rbf"):
            raise ValueError(f"unknown classifier kind {self.kind!r}")
        if self.kind == "rbf":
            if self.rbf_gamma is None:
                object.__setattr__(self, "rbf_gamma", 0.5)
            if not self.rbf_gamma > 0:
                raise ValueError("rbf_gamma must be > 0")
        elif self.rbf_gamma is not None:
            raise ValueError("rbf_gamma is only valid for the rbf kind")
        if self.l2_lambda < 0:
            raise ValueError("l2_lambda must be >= 0")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be > 0")
        if self.class_weighting not in ("balanced", "none"):
            raise ValueError(f"unknown class_weighting {self.class_weighting!r}")

    def with_kind(self, kind: str, gamma: float | None = None) -> "ClassifierSpec":
        return replace(self, kind=kind, rbf_gamma=gamma if kind == "rbf" else None)


@dataclass(frozen=True)
class TrainingReport:
    final_loss: float
    epochs: int
    step_size: float
    converged: bool
    train_sensitivity: float


@dataclass(frozen=True, eq=False)
class TrainedClassifier:
    kind: str
    weights: np.ndarray  # primal weights, or one dual coefficient per reference point
    bias: float
    gamma: float | None = None
    references: np.ndarray | None = None
    report: TrainingReport | None = field(default=None, compare=False)

    @property
    def dim(self) -> int:
        if self.kind == "rbf":
            return self.references.shape[1]
        return self.weights.shape[0]

    def features(self, X: np.ndarray) -> np.ndarray:
        if self.kind == "linear":
            return X
        return rbf_features(X, self.references, self.gamma)

    def decision_function(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.dim:
            raise ValueError(f"dimension mismatch: input has {X.shape[1]} features, model expects {self.dim}")
        return self.features(X) @ self.weights + self.bias

    def predict_proba(self, X) -> np.ndarray:
        return sigmoid(self.decision_function(X))

    def predict(self, X, threshold: float = 0.5) -> np.ndarray:
        return self.predict_proba(X) >= threshold


_P_LO = np.finfo(np.float64).tiny
_P_HI = 1.0 - 2.0**-53


def sigmoid(z):
    # exp(-|z|) never overflows; clipping keeps the result strictly inside (0, 1)
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(-np.abs(z))
    return np.clip(np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e)), _P_LO, _P_HI)


def rbf_features(X: np.ndarray, refs: np.ndarray, gamma: float) -> np.ndarray:
    diff = X[:, None, :] - refs[None, :, :]
    return np.exp(-gamma * np.einsum("nrd,nrd->nr", diff, diff))


def class_weights(n_pos: int, n_neg: int, scheme: str) -> tuple[float, float]:
    """Per-instance weights (positive, negative).

    ``balanced`` gives each class a total weight of 1/2; ``none`` weights every
    instance by 1/n.
    """
    if scheme == "balanced":
        return 0.5 / max(1, n_pos), 0.5 / max(1, n_neg)
    n = n_pos + n_neg
    return 1.0 / n, 1.0 / n


def loss_and_grad(params: np.ndarray, Phi: np.ndarray, t: np.ndarray, c: np.ndarray, lam: float):
    """Weighted logistic loss plus (lam/2)|w|^2; the last entry of ``params`` is the unregularized bias.

    ``t`` holds 0/1 targets and ``c`` per-instance weights.
    """
    w, b = params[:-1], params[-1]
    z = Phi @ w + b
    # log(1 + exp(-z)) for t=1, log(1 + exp(z)) for t=0
    per = np.logaddexp(0.0, np.where(t > 0, -z, z))
    loss = float(c @ per + 0.5 * lam * (w @ w))
    r = c * (sigmoid(z) - t)
    grad = np.empty_like(params)
    grad[:-1] = Phi.T @ r + lam * w
    grad[-1] = r.sum()
    return loss, grad


def _lipschitz(Phi: np.ndarray, c: np.ndarray, lam: float) -> float:
    aug = np.hstack([Phi, np.ones((len(Phi), 1))]) * np.sqrt(c)[:, None]
    return 0.25 * float(np.linalg.norm(aug, 2)) ** 2 + lam


def train(pos, neg, spec: ClassifierSpec) -> TrainedClassifier:
    """Fit a classifier separating ``pos`` (label 1) from ``neg`` (label 0).

    The configured learning rate is an upper bound: the step is capped at
    1/L for the loss's gradient Lipschitz constant L, which keeps descent
    monotone for wide kernel feature maps. A loss increase beyond
    ``LOSS_SLACK`` still raises.
    """
    pos = np.atleast_2d(np.asarray(pos, dtype=np.float64))
    neg = np.atleast_2d(np.asarray(neg, dtype=np.float64))
    if pos.size == 0 or neg.size == 0:
        raise TrainingError("both classes need at least one instance")
    if pos.shape[1] != neg.shape[1]:
        raise TrainingError("positive and negative instances differ in dimension")

    X = np.vstack([pos, neg])
    t = np.concatenate([np.ones(len(pos)), np.zeros(len(neg))])
    cp, cn = class_weights(len(pos), len(neg), spec.class_weighting)
    c = np.where(t > 0, cp, cn)

    refs = X.copy() if spec.kind == "rbf" else None
    Phi = rbf_features(X, refs, spec.rbf_gamma) if spec.kind == "rbf" else X

    step = min(spec.learning_rate, 1.0 / _lipschitz(Phi, c, spec.l2_lambda))
    params = np.zeros(Phi.shape[1] + 1)
    loss, grad = loss_and_grad(params, Phi, t, c, spec.l2_lambda)
    epochs = 0
    converged = False
    for epochs in range(1, spec.max_epochs + 1):
        if np.max(np.abs(grad)) < spec.tolerance:
            converged = True
            epochs -= 1
            break
        cand = params - step * grad
        new_loss, new_grad = loss_and_grad(cand, Phi, t, c, spec.l2_lambda)
        if not math.isfinite(new_loss):
            raise TrainingError(f"loss diverged at epoch {epochs}")
        if new_loss > loss + LOSS_SLACK:
            raise TrainingError(
                f"loss increased at epoch {epochs} ({loss!r} -> {new_loss!r}); learning rate {spec.learning_rate} rejected"
            )
        params, loss, grad = cand, new_loss, new_grad
    else:
        converged = bool(np.max(np.abs(grad)) < spec.tolerance)

    model = TrainedClassifier(
        kind=spec.kind,
        weights=params[:-1].copy(),
        bias=float(params[-1]),
        gamma=spec.rbf_gamma,
        references=refs,
    )
    sens = float(np.mean(model.predict_proba(pos) >= 0.5))
    report = TrainingReport(final_loss=loss, epochs=epochs, step_size=step, converged=converged, train_sensitivity=sens)
    return replace(model, report=report)


def predict_proba(model: TrainedClassifier, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("predict_proba expects a single feature vector")
    return float(model.predict_proba(x[None, :])[0])


def sensitivity_on(model: TrainedClassifier, pos, threshold: float = 0.5) -> float:
    """Fraction of ``pos`` with probability >= threshold."""
    pos = np.atleast_2d(np.asarray(pos, dtype=np.float64))
    if pos.size == 0:
        raise ValueError("sensitivity needs at least one positive instance")
    return float(np.mean(model.predict_proba(pos) >= threshold))
