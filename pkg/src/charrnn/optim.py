"""Adam with bias-corrected moment estimates (Kingma & Ba)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .model import ModelParams

ALPHA = 0.001
BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8


@dataclass
class AdamState:
    t: int
    m: np.ndarray
    v: np.ndarray
    alpha: float = ALPHA
    beta1: float = BETA1
    beta2: float = BETA2
    eps: float = EPS

    def copy(self) -> AdamState:
        return AdamState(self.t, self.m.copy(), self.v.copy(), self.alpha, self.beta1, self.beta2, self.eps)


def adam_init(params_shape, alpha: float = ALPHA, beta1: float = BETA1,
              beta2: float = BETA2, eps: float = EPS) -> AdamState:
    """Fresh optimizer state.

    ``params_shape`` is a :class:`ModelParams`, an array, or an integer size.
    """
    if not alpha > 0:
        raise ContractError(f"alpha must be positive, got {alpha}")
    if not (0 <= beta1 < 1 and 0 <= beta2 < 1):
        raise ContractError(f"betas must lie in [0, 1), got {beta1}, {beta2}")
    if not eps > 0:
        raise ContractError(f"eps must be positive, got {eps}")
    if isinstance(params_shape, ModelParams):
        n = params_shape.flat.size
    elif isinstance(params_shape, np.ndarray):
        n = params_shape.size
    else:
        n = int(params_shape)
    return AdamState(0, np.zeros(n), np.zeros(n), float(alpha), float(beta1), float(beta2), float(eps))


def adam_step(params, grads, state: AdamState):
    """One Adam update; returns new ``(params, state)`` and leaves the inputs untouched.

    ``params`` and ``grads`` are both :class:`ModelParams` or both flat arrays.
    """
    as_model = isinstance(params, ModelParams)
    theta = params.flat if as_model else np.asarray(params, dtype=np.float64)
    g = grads.flat if isinstance(grads, ModelParams) else np.asarray(grads, dtype=np.float64)
    if theta.shape != g.shape or theta.shape != state.m.shape:
        raise ContractError(f"shape mismatch: params {theta.shape}, grads {g.shape}, state {state.m.shape}")
    if not np.all(np.isfinite(g)):
        raise ContractError("non-finite gradient")

    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * g
    v = state.beta2 * state.v + (1.0 - state.beta2) * (g * g)
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    new_theta = theta - state.alpha * m_hat / (np.sqrt(v_hat) + state.eps)

    new_state = AdamState(t, m, v, state.alpha, state.beta1, state.beta2, state.eps)
    if as_model:
        return ModelParams(params.V, params.H, new_theta), new_state
    return new_theta, new_state
