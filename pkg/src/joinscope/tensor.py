"""Dense linear algebra helpers, Adam optimizer, and finite-difference gradient checks.

Everything is double precision; a NaN/Inf anywhere is a bug, not a value to propagate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ShapeError(ValueError):
    pass


def _check(cond: bool, msg: str) -> None:
    if not cond:
        raise ShapeError(msg)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _check(a.ndim == 2 and b.ndim == 2 and a.shape[1] == b.shape[0],
           f"matmul shapes {a.shape} x {b.shape}")
    return a @ b


def matvec(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    _check(a.ndim == 2 and x.ndim == 1 and a.shape[1] == x.shape[0],
           f"matvec shapes {a.shape} x {x.shape}")
    return a @ x


def add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _check(a.shape == b.shape, f"add shapes {a.shape} vs {b.shape}")
    return a + b


def scale(a: np.ndarray, c: float) -> np.ndarray:
    return a * c


def hadamard(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _check(a.shape == b.shape, f"hadamard shapes {a.shape} vs {b.shape}")
    return a * b


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable elementwise logistic."""
    out = np.empty_like(x, dtype=float)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def xavier_uniform(shape: tuple[int, ...], rng: np.random.RandomState) -> np.ndarray:
    fan_in = shape[-1] if len(shape) > 1 else shape[0]
    fan_out = shape[0]
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: AdamState) -> None:
    """In-place bias-corrected Adam update over a named parameter dict."""
    state.step += 1
    t = state.step
    for name in sorted(params):
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for {name}")
        if name not in state.m:
            state.m[name] = np.zeros_like(params[name])
            state.v[name] = np.zeros_like(params[name])
        state.m[name] = state.beta1 * state.m[name] + (1 - state.beta1) * g
        state.v[name] = state.beta2 * state.v[name] + (1 - state.beta2) * g * g
        m_hat = state.m[name] / (1 - state.beta1 ** t)
        v_hat = state.v[name] / (1 - state.beta2 ** t)
        params[name] -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


def finite_diff(loss_fn, params: dict[str, np.ndarray], h: float = 1e-5) -> dict[str, np.ndarray]:
    """Central-difference numeric gradient of `loss_fn(params)` per named parameter."""
    grads = {}
    for name, p in params.items():
        g = np.zeros_like(p)
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            plus = loss_fn(params)
            flat[i] = orig - h
            minus = loss_fn(params)
            flat[i] = orig
            gflat[i] = (plus - minus) / (2 * h)
        grads[name] = g
    return grads
