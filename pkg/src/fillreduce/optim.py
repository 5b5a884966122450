"""Adam on a flat parameter vector."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["AdamConfig", "AdamState", "adam_init", "adam_step"]


@dataclass(frozen=True)
class AdamConfig:
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")


@dataclass(frozen=True)
class AdamState:
    params: np.ndarray
    m: np.ndarray
    v: np.ndarray
    t: int = 0


def adam_init(params: np.ndarray) -> AdamState:
    p = np.array(params, dtype=np.float64)
    return AdamState(p, np.zeros_like(p), np.zeros_like(p), 0)


def adam_step(state: AdamState, grad: np.ndarray, config: AdamConfig) -> AdamState:
    """One bias-corrected Adam update; returns a new state."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != state.params.shape:
        raise ValueError("gradient shape does not match parameters")
    if not np.all(np.isfinite(grad)):
        raise FloatingPointError("non-finite gradient")
    t = state.t + 1
    b1, b2 = config.beta1, config.beta2
    m = b1 * state.m + (1.0 - b1) * grad
    v = b2 * state.v + (1.0 - b2) * grad * grad
    m_hat = m / (1.0 - b1**t)
    v_hat = v / (1.0 - b2**t)
    params = state.params - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.eps)
    return AdamState(params, m, v, t)
