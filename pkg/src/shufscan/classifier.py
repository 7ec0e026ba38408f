"""L2-regularized logistic regression solved by damped Newton iteration.

The objective follows the liblinear sum convention,

    J(w, b) = (penalty / 2) * ||w||^2 + sum_i log(1 + exp(-y'_i (w.x_i + b)))

with labels ``y' in {-1, +1}`` and the bias term left out of the penalty.
All log/exp work routes through ``numpy.logaddexp`` so extreme margins
produce exact zeros or linear growth instead of overflow.  The solver is
plain Newton with an Armijo backtracking line search and an escalating
ridge fallback when the Hessian is numerically singular; it starts from
zero (or a caller-supplied warm start) and stops when the gradient
infinity norm drops to the requested tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Probabilities are clamped into [_PROB_FLOOR, _PROB_CEIL]: strictly inside
# (0, 1) at float64 resolution, so odds and log-odds are always finite.
_PROB_FLOOR = 5e-324
_PROB_CEIL = float(np.nextafter(1.0, 0.0))

_ARMIJO_SLOPE = 1e-4
_MAX_BACKTRACKS = 60


class SingleClassError(ValueError):
    """Training was asked to separate a set containing only one label."""


@dataclass(frozen=True)
class LinearModel:
    """A linear scorer ``z = weights . x + bias``."""

    weights: np.ndarray
    bias: float = 0.0

    def __post_init__(self):
        weights = np.array(self.weights, dtype=np.float64)  # copy: never lock caller memory
        if weights.ndim != 1:
            raise ValueError(f"weights must be 1-dimensional, got shape {weights.shape}")
        if not np.isfinite(weights).all() or not np.isfinite(self.bias):
            raise ValueError("model parameters must be finite")
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "bias", float(self.bias))


@dataclass(frozen=True)
class TrainSpec:
    """Solver settings for one training call."""

    l2_penalty: float = 1.0
    tolerance: float = 1e-8
    max_iterations: int = 500
    fit_intercept: bool = True

    def __post_init__(self):
        if self.l2_penalty < 0:
            raise ValueError(f"l2_penalty must be >= 0, got {self.l2_penalty}")
        if self.tolerance <= 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")


@dataclass(frozen=True)
class TrainResult:
    """A fitted model plus how the solver got there."""

    model: LinearModel
    converged: bool
    iterations: int
    grad_norm: float


def _check_dataset(features: np.ndarray, labels: np.ndarray):
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    if features.ndim != 2:
        raise ValueError(f"features must be 2-dimensional, got shape {features.shape}")
    if labels.ndim != 1 or labels.shape[0] != features.shape[0]:
        raise ValueError(
            f"labels shape {labels.shape} does not match {features.shape[0]} feature rows"
        )
    if features.shape[0] < 1:
        raise ValueError("need at least one example")
    if not np.isin(labels, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    return features, labels.astype(np.float64)


def loss(model: LinearModel, features, labels, l2_penalty: float) -> float:
    """Penalized negative log-likelihood of ``labels`` under ``model``."""
    features, labels = _check_dataset(features, labels)
    if features.shape[1] != model.weights.shape[0]:
        raise ValueError(
            f"model has {model.weights.shape[0]} weights, features have {features.shape[1]} columns"
        )
    margins = (2.0 * labels - 1.0) * (features @ model.weights + model.bias)
    data_term = float(np.logaddexp(0.0, -margins).sum())
    return 0.5 * l2_penalty * float(model.weights @ model.weights) + data_term


def gradient(model: LinearModel, features, labels, l2_penalty: float):
    """Return ``(weight_gradient, bias_gradient)`` of the penalized loss."""
    features, labels = _check_dataset(features, labels)
    if features.shape[1] != model.weights.shape[0]:
        raise ValueError(
            f"model has {model.weights.shape[0]} weights, features have {features.shape[1]} columns"
        )
    probs = _sigmoid(features @ model.weights + model.bias)
    residual = probs - labels
    return features.T @ residual + l2_penalty * model.weights, float(residual.sum())


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # exp(-logaddexp(0, -z)) never overflows and saturates cleanly.
    return np.exp(-np.logaddexp(0.0, -z))


def train(features, labels, spec: TrainSpec = TrainSpec(), init: LinearModel | None = None) -> TrainResult:
    """Fit logistic regression on a 0/1-labeled dataset.

    Returns the last Newton iterate; ``converged`` records whether the
    gradient infinity norm reached ``spec.tolerance`` within the iteration
    budget.  The line search only ever accepts descent steps, so the
    returned loss is the best seen.  Raises ``SingleClassError`` when all
    labels agree, since every such problem is degenerate.
    """
    features, labels = _check_dataset(features, labels)
    if labels.min() == labels.max():
        raise SingleClassError(f"all {labels.shape[0]} labels are {int(labels[0])}")

    d = features.shape[1]
    if init is not None:
        if init.weights.shape[0] != d:
            raise ValueError(f"init has {init.weights.shape[0]} weights, need {d}")
        weights = init.weights.copy()
        bias = init.bias if spec.fit_intercept else 0.0
    else:
        weights = np.zeros(d)
        bias = 0.0

    current = _objective(weights, bias, features, labels, spec.l2_penalty)
    iterations = 0
    grad_inf = np.inf
    for iterations in range(1, spec.max_iterations + 1):
        z = features @ weights + bias
        probs = _sigmoid(z)
        residual = probs - labels
        grad_w = features.T @ residual + spec.l2_penalty * weights
        grad_b = float(residual.sum()) if spec.fit_intercept else 0.0
        grad_inf = max(float(np.abs(grad_w).max(initial=0.0)), abs(grad_b))
        if grad_inf <= spec.tolerance:
            return TrainResult(LinearModel(weights, bias), True, iterations - 1, grad_inf)

        step_w, step_b = _newton_step(features, probs, grad_w, grad_b, spec)
        descent = float(grad_w @ step_w) + grad_b * step_b
        if descent >= 0:  # fallback direction lost descent; bail out honestly
            break

        step_size = 1.0
        accepted = False
        for _ in range(_MAX_BACKTRACKS):
            cand_w = weights + step_size * step_w
            cand_b = bias + step_size * step_b
            cand = _objective(cand_w, cand_b, features, labels, spec.l2_penalty)
            if cand <= current + _ARMIJO_SLOPE * step_size * descent:
                weights, bias, current = cand_w, cand_b, cand
                accepted = True
                break
            step_size *= 0.5
        if not accepted:
            break  # at numerical floor; no step improves the objective

    return TrainResult(LinearModel(weights, bias), False, iterations, grad_inf)


def _objective(weights, bias, features, labels, l2_penalty):
    margins = (2.0 * labels - 1.0) * (features @ weights + bias)
    return 0.5 * l2_penalty * float(weights @ weights) + float(np.logaddexp(0.0, -margins).sum())


def _newton_step(features, probs, grad_w, grad_b, spec: TrainSpec):
    """Solve the (possibly ridged) Newton system for a descent direction."""
    d = features.shape[1]
    weights_hess = probs * (1.0 - probs)
    weighted = features * weights_hess[:, None]
    h_ww = features.T @ weighted + spec.l2_penalty * np.eye(d)
    if spec.fit_intercept:
        h = np.empty((d + 1, d + 1))
        h[:d, :d] = h_ww
        h[:d, d] = weighted.sum(axis=0)
        h[d, :d] = h[:d, d]
        h[d, d] = float(weights_hess.sum())
        g = np.append(grad_w, grad_b)
    else:
        h = h_ww
        g = grad_w

    ridge = 0.0
    scale = max(float(np.abs(h).max()), 1.0)
    for _ in range(30):
        try:
            step = np.linalg.solve(h + ridge * np.eye(h.shape[0]), -g)
        except np.linalg.LinAlgError:
            step = None
        if step is not None and np.isfinite(step).all() and float(g @ step) < 0:
            break
        ridge = scale * 1e-12 if ridge == 0.0 else ridge * 10.0
    else:
        step = -g  # last resort: plain gradient descent direction

    if spec.fit_intercept:
        return step[:d], float(step[d])
    return step, 0.0


def predict_proba(model: LinearModel, features):
    """Probability of label 1 for one frame (1-D) or a batch (2-D).

    Outputs are clamped to the largest float64 interval strictly inside
    (0, 1), so downstream odds ratios stay finite.
    """
    arr = np.asarray(features, dtype=np.float64)
    if arr.ndim not in (1, 2):
        raise ValueError(f"features must be 1- or 2-dimensional, got shape {arr.shape}")
    if arr.shape[-1] != model.weights.shape[0]:
        raise ValueError(
            f"model has {model.weights.shape[0]} weights, features have {arr.shape[-1]} columns"
        )
    probs = _sigmoid(arr @ model.weights + model.bias)
    probs = np.clip(probs, _PROB_FLOOR, _PROB_CEIL)
    if arr.ndim == 1:
        return float(probs)
    return probs
