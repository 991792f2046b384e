"""Bias-corrected Adam for tape parameters."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .autodiff import Node, zero_grad


@dataclass
class AdamState:
    """First/second moment accumulators plus hyperparameters.

    Moments are lazily shaped on the first step and must then keep matching
    the parameter list.
    """

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_step(state: AdamState, params: Sequence[Node], grads=None) -> AdamState:
    """One Adam update in place on `params`; returns the mutated state.

    `grads` defaults to the accumulated adjoints of the parameters; adjoints
    are cleared after the update either way. Raises on non-finite gradients,
    naming the offending parameter.
    """
    if grads is None:
        grads = [p.grad for p in params]
    if len(grads) != len(params):
        raise ValueError("gradient / parameter count mismatch")
    if not state.m:
        state.m = [np.zeros_like(p.value) for p in params]
        state.v = [np.zeros_like(p.value) for p in params]
    if len(state.m) != len(params):
        raise ValueError("optimizer state does not match parameter list")

    for p, g in zip(params, grads):
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(
                f"non-finite gradient for parameter {p.name or '<unnamed>'}"
            )

    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for i, (p, g) in enumerate(zip(params, grads)):
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * (g * g)
        m_hat = state.m[i] / bc1
        v_hat = state.v[i] / bc2
        p.value = p.value - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    zero_grad(params)
    return state
