"""Finite-difference gradient oracle.

Central differences on every parameter entry, compared against the tape's
analytic gradient. Used both by the test suite and the ``gradcheck`` CLI
command.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor


@dataclass
class GradCheckReport:
    passed: bool
    max_rel_err: float
    worst_param: str
    tol: float
    h: float
    per_param: dict[str, float] = field(default_factory=dict)

    def __str__(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return (
            f"{status}: max rel err {self.max_rel_err:.3e} "
            f"(param {self.worst_param}, tol {self.tol:g})"
        )


def finite_difference_check(
    loss_fn,
    params: dict[str, Tensor],
    h: float = 1e-5,
    tol: float = 1e-4,
) -> GradCheckReport:
    """Compare analytic gradients of a scalar loss against central differences.

    ``loss_fn`` must be a pure function of the current parameter values and
    return a scalar Tensor. Relative error uses a small absolute floor so
    near-zero gradients do not dominate.
    """
    for t in params.values():
        t.grad = np.zeros_like(t.data)
    loss = loss_fn()
    loss.backward()
    analytic = {name: t.grad.copy() for name, t in params.items()}

    per_param: dict[str, float] = {}
    worst = ("", 0.0)
    for name, t in params.items():
        flat = t.data.reshape(-1)
        a_flat = analytic[name].reshape(-1)
        worst_here = 0.0
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + h
            up = float(loss_fn().data)
            flat[idx] = orig - h
            down = float(loss_fn().data)
            flat[idx] = orig
            fd = (up - down) / (2.0 * h)
            a = a_flat[idx]
            rel = abs(a - fd) / max(abs(a), abs(fd), 1e-3)
            if rel > worst_here:
                worst_here = rel
        per_param[name] = worst_here
        if worst_here > worst[1]:
            worst = (name, worst_here)
        t.grad = None
    return GradCheckReport(
        passed=worst[1] <= tol,
        max_rel_err=worst[1],
        worst_param=worst[0],
        tol=tol,
        h=h,
        per_param=per_param,
    )
