"""Named parameter storage with training-group labels."""

from __future__ import annotations

import numpy as np

from ..errors import InvariantError
from .tensor import Tensor

PARAM_GROUPS = ("pretrain_reconstructor", "reconstructor", "predictor")


class ParamStore:
    """Flat map from parameter path to Tensor, each tagged with a group.

    Paths are unique; groups drive per-group learning rates and
    checkpoint layout.
    """

    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self._groups: dict[str, str] = {}

    def add(self, name: str, data: np.ndarray, group: str) -> Tensor:
        if name in self._params:
            raise InvariantError(f"duplicate parameter path: {name}")
        if group not in PARAM_GROUPS:
            raise InvariantError(f"unknown parameter group: {group}")
        t = Tensor(np.asarray(data, dtype=np.float64), requires_grad=True)
        self._params[name] = t
        self._groups[name] = group
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def group_of(self, name: str) -> str:
        return self._groups[name]

    def items(self):
        return self._params.items()

    def names(self) -> list[str]:
        return list(self._params)

    def group_items(self, *groups: str):
        """(name, tensor) pairs for the requested groups, in insertion order."""
        return [(n, t) for n, t in self._params.items() if self._groups[n] in groups]

    def load_values(self, values: dict[str, np.ndarray]) -> None:
        """Overwrite parameter data in place (shapes must match)."""
        for name, arr in values.items():
            t = self._params[name]
            if t.data.shape != arr.shape:
                raise InvariantError(
                    f"shape mismatch loading {name}: {t.data.shape} vs {arr.shape}"
                )
            t.data = np.ascontiguousarray(arr, dtype=np.float64)

    def snapshot(self) -> dict[str, np.ndarray]:
        """Copy of all parameter arrays (used to freeze previous-task state)."""
        return {n: t.data.copy() for n, t in self._params.items()}


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)
