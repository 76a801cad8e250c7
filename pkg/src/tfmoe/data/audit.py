"""Flow-access auditing.

Continual training at task > 1 must touch raw flow data of exactly the new
and replayed nodes. All engine-side flow reads go through an AccessAudit so
that contract is enforced structurally rather than by convention: reads
outside the allowed set during a restricted scope are recorded as
violations, and the per-task report exposes exactly which nodes were read.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass, field

import numpy as np

from .series import TaskDataset


@dataclass
class AuditReport:
    reads_by_scope: dict[str, set[int]] = field(default_factory=dict)
    violations: list[tuple[str, int]] = field(default_factory=list)

    def nodes_read(self, scope: str) -> set[int]:
        return set(self.reads_by_scope.get(scope, set()))


class AccessAudit:
    """Wraps a TaskDataset; every flow read is attributed to a named scope.

    A scope opened with an ``allowed`` set flags reads of any other node as
    violations (the data is still returned; the audit is an observer, the
    test gate is zero violations).
    """

    def __init__(self, dataset: TaskDataset):
        self.dataset = dataset
        self.report = AuditReport()
        self._scope = "unscoped"
        self._allowed: set[int] | None = None

    @contextlib.contextmanager
    def scope(self, name: str, allowed=None):
        prev = (self._scope, self._allowed)
        self._scope = name
        self._allowed = None if allowed is None else set(allowed)
        try:
            yield self
        finally:
            self._scope, self._allowed = prev

    def flow_block(self, node_ids, lo: int, hi: int) -> np.ndarray:
        node_ids = list(node_ids)
        seen = self.report.reads_by_scope.setdefault(self._scope, set())
        for node in node_ids:
            seen.add(node)
            if self._allowed is not None and node not in self._allowed:
                self.report.violations.append((self._scope, node))
        return self.dataset.flow_block(node_ids, lo, hi)
