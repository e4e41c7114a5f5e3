from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels

BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8


class NonFiniteGradient(FloatingPointError):
    pass


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, size: int) -> "AdamState":
        return cls(np.zeros(size), np.zeros(size), 0)


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState, lr: float) -> None:
    """One in-place Adam update. Non-finite gradients raise and leave everything untouched."""
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ValueError("parameter, gradient and state shapes differ")
    if not np.all(np.isfinite(grads)):
        raise NonFiniteGradient("non-finite gradient; step aborted")
    state.t += 1
    _kernels.kernels.adam_update(params, grads, state.m, state.v, float(lr), BETA1, BETA2, EPS, float(state.t))


class Adam:
    """Adam over a list of blocks, each exposing flat ``params``/``grads`` vectors."""

    def __init__(self, blocks, lr: float = 1e-3):
        self.blocks = list(blocks)
        self.lr = lr
        self.states = [AdamState.zeros(b.params.size) for b in self.blocks]

    def zero_grad(self):
        for b in self.blocks:
            b.zero_grad()

    def step(self):
        for b in self.blocks:
            if not np.all(np.isfinite(b.grads)):
                raise NonFiniteGradient(f"non-finite gradient in block {b.name!r}")
        for b, st in zip(self.blocks, self.states):
            adam_step(b.params, b.grads, st, self.lr)
