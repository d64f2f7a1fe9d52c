"""Dense float64 numeric substrate: a two-layer MLP with closed-form
backprop, the Adam optimizer, and a finite-difference gradient checker.

All functions are pure: state (Adam moments) is passed in and returned,
never mutated in place. Everything is double precision so the 1e-4
gradient-check tolerance used throughout the test suite is meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .errors import ConfigError, DimensionError, EvaluationError

Array = np.ndarray


def as_f64(x, name: str) -> Array:
    """Coerce to a float64 ndarray, rejecting non-finite entries."""
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise EvaluationError(f"{name} contains non-finite values")
    return arr


def check_vector(x, dim: int | None, name: str) -> Array:
    arr = as_f64(x, name)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be a vector, got shape {arr.shape}")
    if dim is not None and arr.size != dim:
        raise DimensionError(f"{name} has size {arr.size}, expected {dim}")
    return arr


def check_matrix(x, shape: tuple[int | None, int | None], name: str) -> Array:
    arr = as_f64(x, name)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be a matrix, got shape {arr.shape}")
    rows, cols = shape
    if rows is not None and arr.shape[0] != rows:
        raise DimensionError(f"{name} has {arr.shape[0]} rows, expected {rows}")
    if cols is not None and arr.shape[1] != cols:
        raise DimensionError(f"{name} has {arr.shape[1]} columns, expected {cols}")
    return arr


def sigmoid(x):
    """Numerically stable logistic function."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class Mlp2Cache:
    """Intermediate activations of one mlp2_forward call, kept for backprop."""

    x: Array
    pre_hidden: Array   # W1 @ x + b1
    hidden: Array       # relu(pre_hidden)


def mlp2_forward(W1: Array, b1: Array, w2: Array, b2: float, x: Array) -> tuple[float, Mlp2Cache]:
    """Two fully-connected layers: b2 + w2 . relu(W1 @ x + b1).

    Returns the scalar output and the intermediate activations needed by
    mlp2_backward.
    """
    W1 = check_matrix(W1, (None, None), "W1")
    hidden_dim, in_dim = W1.shape
    x = check_vector(x, None, "x")
    if x.size != in_dim:
        raise DimensionError(f"W1 has {in_dim} columns but x has size {x.size}")
    b1 = check_vector(b1, hidden_dim, "b1")
    w2 = check_vector(w2, hidden_dim, "w2")
    b2 = float(b2)
    pre = W1 @ x + b1
    hidden = np.maximum(pre, 0.0)
    out = float(w2 @ hidden + b2)
    return out, Mlp2Cache(x=x, pre_hidden=pre, hidden=hidden)


def mlp2_backward(W1: Array, w2: Array, cache: Mlp2Cache, dout: float):
    """Gradients of a scalar loss through mlp2_forward.

    `dout` is dL/doutput. Returns (dW1, db1, dw2, db2, dx). The ReLU
    subgradient at exactly zero is taken to be zero.
    """
    db2 = float(dout)
    dw2 = dout * cache.hidden
    dhidden = dout * w2
    dpre = dhidden * (cache.pre_hidden > 0.0)
    db1 = dpre
    dW1 = np.outer(dpre, cache.x)
    dx = W1.T @ dpre
    return dW1, db1, dw2, db2, dx


@dataclass(frozen=True)
class AdamState:
    """Per-parameter-block Adam moments and hyperparameters."""

    first_moment: Array
    second_moment: Array
    step_count: int
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def init(cls, shape, lr: float, beta1: float = 0.9, beta2: float = 0.999,
             epsilon: float = 1e-8) -> "AdamState":
        return cls(
            first_moment=np.zeros(shape, dtype=np.float64),
            second_moment=np.zeros(shape, dtype=np.float64),
            step_count=0,
            lr=lr, beta1=beta1, beta2=beta2, epsilon=epsilon,
        )


def adam_step(params: Array, grads: Array, state: AdamState) -> tuple[Array, AdamState]:
    """One bias-corrected Adam update. Returns new params and new state."""
    params = as_f64(params, "params")
    grads = as_f64(grads, "grads")
    if params.shape != grads.shape:
        raise DimensionError(
            f"grads shape {grads.shape} does not match params shape {params.shape}")
    if state.first_moment.shape != params.shape:
        raise DimensionError(
            f"state moments shape {state.first_moment.shape} does not match "
            f"params shape {params.shape}")
    t = state.step_count + 1
    m = state.beta1 * state.first_moment + (1.0 - state.beta1) * grads
    v = state.beta2 * state.second_moment + (1.0 - state.beta2) * grads * grads
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    new_params = params - state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
    new_state = replace(state, first_moment=m, second_moment=v, step_count=t)
    return new_params, new_state


def grad_check(f: Callable[[Array], float], params: Array, analytic_grads: Array,
               h: float = 1e-4) -> float:
    """Max relative error between analytic gradients and central differences.

    The error for parameter i is |analytic - numeric| / max(1, |analytic|,
    |numeric|), and the max over i is returned. `f` must map the full
    parameter array to a finite scalar.
    """
    if h <= 0:
        raise ConfigError("grad_check step h must be positive")
    params = as_f64(params, "params")
    analytic = as_f64(analytic_grads, "analytic_grads")
    if params.shape != analytic.shape:
        raise DimensionError(
            f"analytic_grads shape {analytic.shape} does not match params "
            f"shape {params.shape}")
    flat = params.ravel()
    flat_analytic = analytic.ravel()
    worst = 0.0
    for i in range(flat.size):
        orig = flat[i]
        perturbed = params.copy().ravel()
        perturbed[i] = orig + h
        f_plus = float(f(perturbed.reshape(params.shape)))
        perturbed[i] = orig - h
        f_minus = float(f(perturbed.reshape(params.shape)))
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise EvaluationError(f"f returned a non-finite value near parameter {i}")
        numeric = (f_plus - f_minus) / (2.0 * h)
        a = flat_analytic[i]
        err = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
        worst = max(worst, err)
    return worst
