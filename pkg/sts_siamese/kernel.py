"""
Dense numeric kernel: activations, shape-checked linear algebra, seeded
Gaussian initialization, the Adadelta optimizer and a central-difference
gradient checker.

All arrays are float64 numpy arrays. Kernels never broadcast silently:
mismatched shapes raise ShapeMismatchError.
"""
from dataclasses import dataclass, field
from typing import Callable, Dict, Mapping, Tuple

import numpy as np

from sts_siamese.errors import NumericError, ShapeMismatchError


DTYPE = np.float64

Params = Dict[str, np.ndarray]
LossFn = Callable[[Params], Tuple[float, Params]]


def _require_same_shape(a: np.ndarray, b: np.ndarray, what: str) -> None:
    if a.shape != b.shape:
        raise ShapeMismatchError(f"{what}: shapes {a.shape} and {b.shape} differ")


def require_finite(values: np.ndarray, what: str) -> None:
    """Raise NumericError if any entry of `values` is NaN or infinite."""
    if not np.all(np.isfinite(values)):
        raise NumericError(f"{what}: non-finite value encountered")


def tanh_vec(x: np.ndarray) -> np.ndarray:
    return np.tanh(x)


def sigmoid_vec(x: np.ndarray) -> np.ndarray:
    """Logistic function written through tanh so it never overflows."""
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=DTYPE)))


def hadamard(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _require_same_shape(a, b, "hadamard")
    return a * b


def add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _require_same_shape(a, b, "add")
    return a + b


def matvec(matrix: np.ndarray, vector: np.ndarray) -> np.ndarray:
    """Matrix-vector product with an explicit shape check."""
    if matrix.ndim != 2 or vector.ndim != 1 or matrix.shape[1] != vector.shape[0]:
        raise ShapeMismatchError(f"matvec: cannot multiply {matrix.shape} by {vector.shape}")
    return matrix @ vector


def concat(*vectors: np.ndarray) -> np.ndarray:
    """Concatenate 1-D vectors preserving order."""
    for v in vectors:
        if v.ndim != 1:
            raise ShapeMismatchError(f"concat: expected 1-D vectors, got shape {v.shape}")
    return np.concatenate(vectors)


def gaussian_init(shape: Tuple[int, ...], stddev: float, seed: int) -> np.ndarray:
    """
    Draw a matrix of i.i.d. N(0, stddev^2) entries from a seeded generator.

    Args:
        shape: Output shape; every dimension must be positive.
        stddev: Standard deviation of the entries.
        seed: Generator seed; equal (shape, stddev, seed) give identical output.

    Returns:
        float64 array of the requested shape.

    Raises:
        ValueError: If stddev is not positive or the shape has no entries.
    """
    if stddev <= 0:
        raise ValueError(f"stddev must be positive, got {stddev}")
    shape = tuple(int(s) for s in shape)
    if not shape or any(s <= 0 for s in shape):
        raise ValueError(f"cannot initialize zero-sized shape {shape}")
    rng = np.random.default_rng(seed)
    return rng.normal(0.0, stddev, size=shape).astype(DTYPE)


@dataclass
class AdadeltaState:
    """Running averages E[g^2] and E[dx^2] for one parameter."""
    sq_grad: np.ndarray
    sq_delta: np.ndarray
    rho: float = 0.95
    epsilon: float = 1e-6
    lr_scale: float = 0.01

    @classmethod
    def zeros_like(cls, param: np.ndarray, rho: float = 0.95, epsilon: float = 1e-6,
                   lr_scale: float = 0.01) -> 'AdadeltaState':
        if not 0.0 < rho < 1.0:
            raise ValueError(f"rho must be in (0, 1), got {rho}")
        if epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {epsilon}")
        if lr_scale < 0:
            raise ValueError(f"lr_scale must be non-negative, got {lr_scale}")
        return cls(
            sq_grad=np.zeros_like(param, dtype=DTYPE),
            sq_delta=np.zeros_like(param, dtype=DTYPE),
            rho=rho,
            epsilon=epsilon,
            lr_scale=lr_scale,
        )


def adadelta_step(param: np.ndarray, grad: np.ndarray, state: AdadeltaState) -> Tuple[np.ndarray, AdadeltaState]:
    """
    Apply one Adadelta update.

    The accumulators in `state` are updated in place; the parameter is
    returned as a new array.

    Args:
        param: Current parameter values.
        grad: Gradient of the loss with respect to `param`.
        state: Accumulators for this parameter.

    Returns:
        (updated parameter, state)

    Raises:
        ShapeMismatchError: If param, grad and accumulators disagree in shape.
        NumericError: If the gradient is not finite.
    """
    _require_same_shape(param, grad, "adadelta_step")
    _require_same_shape(param, state.sq_grad, "adadelta_step accumulator")
    require_finite(grad, "adadelta_step gradient")

    rho, eps = state.rho, state.epsilon
    state.sq_grad *= rho
    state.sq_grad += (1.0 - rho) * grad * grad
    delta = -(np.sqrt(state.sq_delta + eps) / np.sqrt(state.sq_grad + eps)) * grad
    state.sq_delta *= rho
    state.sq_delta += (1.0 - rho) * delta * delta
    return param + state.lr_scale * delta, state


class Adadelta:
    """
    Adadelta over a named set of parameters.

    State is created lazily the first time a parameter name is seen, so
    sparse updates (embedding rows) only allocate what they touch.
    """

    def __init__(self, rho: float = 0.95, epsilon: float = 1e-6, lr_scale: float = 0.01):
        self.rho = rho
        self.epsilon = epsilon
        self.lr_scale = lr_scale
        self.states: Dict[str, AdadeltaState] = {}

    def step(self, params: Params, grads: Mapping[str, np.ndarray]) -> None:
        """Update every parameter that has a gradient, in place in `params`."""
        for name, grad in grads.items():
            state = self.states.get(name)
            if state is None:
                state = AdadeltaState.zeros_like(params[name], self.rho, self.epsilon, self.lr_scale)
                self.states[name] = state
            updated, _ = adadelta_step(params[name], grad, state)
            params[name][...] = updated


def clip_global_norm(grads: Params, max_norm: float) -> float:
    """Scale `grads` in place so their joint L2 norm is at most max_norm; return the original norm."""
    total = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if total > max_norm:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return total


@dataclass
class GradCheckReport:
    """Per-parameter maximum relative error between analytic and numeric gradients."""
    errors: Dict[str, float] = field(default_factory=dict)
    tolerance: float = 1e-4

    @property
    def max_error(self) -> float:
        return max(self.errors.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_error < self.tolerance

    def worst(self) -> Tuple[str, float]:
        name = max(self.errors, key=self.errors.get)
        return name, self.errors[name]


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    """|a - n| / max(|a|, |n|, 1e-8), elementwise."""
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return np.abs(analytic - numeric) / scale


def grad_check(loss_fn: LossFn, params: Params, h: float = 1e-5, tolerance: float = 1e-4) -> GradCheckReport:
    """
    Compare analytic gradients against central finite differences.

    Args:
        loss_fn: Maps a parameter dict to (loss, gradient dict). Only the loss
            is used at perturbed points.
        params: Parameters to check. Perturbed in place and restored.
        h: Perturbation size.
        tolerance: Threshold used by `report.passed`.

    Returns:
        GradCheckReport with the max relative error of every parameter.

    Raises:
        NumericError: If the loss is not finite at a perturbed point.
    """
    if h <= 0:
        raise ValueError(f"perturbation must be positive, got {h}")

    _, analytic = loss_fn(params)
    report = GradCheckReport(tolerance=tolerance)

    for name, value in params.items():
        numeric = np.zeros_like(value)
        flat = value.reshape(-1)
        if not np.shares_memory(flat, value):
            raise ValueError(f"grad_check: parameter {name} must be contiguous")
        numeric_flat = numeric.reshape(-1)
        for idx in range(flat.size):
            original = flat[idx]
            flat[idx] = original + h
            plus, _ = loss_fn(params)
            flat[idx] = original - h
            minus, _ = loss_fn(params)
            flat[idx] = original
            if not (np.isfinite(plus) and np.isfinite(minus)):
                raise NumericError(f"grad_check: non-finite loss perturbing {name}[{idx}]")
            numeric_flat[idx] = (plus - minus) / (2.0 * h)

        grad = analytic.get(name)
        if grad is None:
            grad = np.zeros_like(value)
        _require_same_shape(value, grad, f"grad_check gradient for {name}")
        report.errors[name] = float(np.max(relative_error(grad, numeric))) if value.size else 0.0

    return report
