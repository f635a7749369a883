"""Shared exception types."""

from __future__ import annotations


class SolverDivergenceError(RuntimeError):
    """An implicit solve failed to converge.

    Carries the index of the time step at which the fixed-point iteration
    gave up, so callers (and the CLI, which maps this to exit code 4) can
    report where a run went numerically bad.
    """

    def __init__(self, step: int, message: str | None = None):
        self.step = int(step)
        super().__init__(message or f"implicit solve did not converge at step {self.step}")
