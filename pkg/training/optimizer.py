"""Adam with decoupled weight decay and per-parameter step scaling."""

from __future__ import annotations

import logging
from typing import Mapping

import numpy as np

from core.tensor import Parameter

logger = logging.getLogger(__name__)

STEP_KEY = 'optim.step'
FIRST_MOMENT_PREFIX = 'optim.m.'
SECOND_MOMENT_PREFIX = 'optim.v.'


class AdamW:
    """Adam whose weight decay shrinks parameters directly rather than through the gradient.

    ``step(scales=...)`` blends each named parameter towards its proposed
    update: ``p + s * (p_new - p)``. A scale of exactly 0 leaves the
    parameter untouched bit for bit.
    """

    def __init__(
        self,
        params: Mapping[str, Parameter],
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        weight_decay: float = 1e-6,
    ):
        self.params = dict(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.m = {name: np.zeros_like(p.values) for name, p in self.params.items()}
        self.v = {name: np.zeros_like(p.values) for name, p in self.params.items()}
        self.step_count = 0

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def step(self, lr: float | None = None, scales: Mapping[str, float] | None = None) -> None:
        lr = self.lr if lr is None else lr
        scales = scales or {}
        unknown = set(scales) - set(self.params)
        if unknown:
            raise KeyError(f'step scales for unknown parameters: {sorted(unknown)[:3]}')
        self.step_count += 1
        t = self.step_count
        for name, p in self.params.items():
            grad = p.grad if p.grad is not None else np.zeros_like(p.values)
            self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * grad
            self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * grad * grad
            m_hat = self.m[name] / (1 - self.beta1**t)
            v_hat = self.v[name] / (1 - self.beta2**t)
            proposed = p.values * (1 - lr * self.weight_decay) - lr * m_hat / (np.sqrt(v_hat) + self.eps)
            scale = scales.get(name)
            if scale is None:
                p.values[...] = proposed
            elif scale != 0.0:
                p.values[...] = p.values + scale * (proposed - p.values)

    def state_dict(self) -> dict[str, np.ndarray]:
        state = {STEP_KEY: np.full((1, 1, 1, 1), float(self.step_count))}
        for name in self.params:
            state[f'{FIRST_MOMENT_PREFIX}{name}'] = self.m[name].copy()
            state[f'{SECOND_MOMENT_PREFIX}{name}'] = self.v[name].copy()
        return state

    def load_state_dict(self, state: Mapping[str, np.ndarray]) -> None:
        if STEP_KEY not in state:
            raise KeyError(f'optimizer state lacks {STEP_KEY!r}')
        for name, p in self.params.items():
            for prefix, buffers in ((FIRST_MOMENT_PREFIX, self.m), (SECOND_MOMENT_PREFIX, self.v)):
                key = f'{prefix}{name}'
                if key not in state:
                    raise KeyError(f'optimizer state lacks {key!r}')
                if state[key].shape != p.values.shape:
                    raise ValueError(
                        f'{key}: stored shape {state[key].shape} != parameter shape {p.values.shape}'
                    )
                buffers[name] = np.array(state[key], dtype=np.float64)
        self.step_count = int(np.asarray(state[STEP_KEY]).reshape(-1)[0])
