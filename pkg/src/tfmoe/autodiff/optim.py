"""Adam with per-group learning rates."""

from __future__ import annotations

import numpy as np

from ..errors import InvariantError
from .params import ParamStore


class Adam:
    """Standard Adam with bias correction.

    Tracks first/second moments per parameter. ``lr`` may be a single float
    or a mapping from group label to learning rate; every tracked group must
    have a rate. ``step`` consumes and zeroes gradients.
    """

    def __init__(
        self,
        store: ParamStore,
        lr,
        groups: tuple[str, ...] | None = None,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        if groups is None:
            tracked = list(store.items())
        else:
            tracked = store.group_items(*groups)
        self._tracked = [(name, tensor, store.group_of(name)) for name, tensor in tracked]
        if isinstance(lr, dict):
            self._lr = dict(lr)
        else:
            self._lr = {g: float(lr) for _, _, g in self._tracked}
        for _, _, g in self._tracked:
            if g not in self._lr:
                raise InvariantError(f"no learning rate for group {g!r}")
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.step_count = 0
        self._m = {name: np.zeros_like(t.data) for name, t, _ in self._tracked}
        self._v = {name: np.zeros_like(t.data) for name, t, _ in self._tracked}

    def zero_grad(self) -> None:
        """Populate every tracked gradient with zeros, ready to accumulate."""
        for _, t, _ in self._tracked:
            t.grad = np.zeros_like(t.data)

    def step(self) -> None:
        for name, t, _ in self._tracked:
            if t.grad is None:
                raise InvariantError(f"parameter {name} has no gradient")
        self.step_count += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1**self.step_count
        bc2 = 1.0 - b2**self.step_count
        for name, t, group in self._tracked:
            g = t.grad
            m = self._m[name]
            v = self._v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            t.data -= self._lr[group] * update
            t.grad = np.zeros_like(t.data)
