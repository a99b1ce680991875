# File: /cqnls/errors.py
"""
Exception hierarchy for cqnls.
"""

from __future__ import annotations
from typing import Any, Dict, List, Sequence


class CqnlsError(Exception):
    """Base class for every error raised by the toolkit."""


class InvalidParameterError(CqnlsError, ValueError):
    pass


class ZeroFieldError(CqnlsError, ValueError):
    pass


class QuadratureFailureError(CqnlsError):
    pass


class WeightConstructionError(CqnlsError):
    pass


class NotNearOrbitError(CqnlsError):
    def __init__(self, delta: float, gate: float):
        super().__init__(f"delta={delta:.6g} exceeds modulation gate {gate:.6g}")
        self.delta = delta
        self.gate = gate


class RunCancelledError(CqnlsError):
    """A run was told to stop before it finished."""

    def __init__(self, t: float):
        super().__init__(f"run cancelled at t={t:g}")
        self.t = t


class InfeasibleThresholdError(CqnlsError):
    """No amplitude puts the shape on the requested side of the threshold."""

    def __init__(self, side: str, roots: Sequence[float], grad_ratios: Sequence[float]):
        listed = ", ".join(f"a^2={x:.6g} (grad ratio {g:.4g})" for x, g in zip(roots, grad_ratios))
        super().__init__(f"no threshold root on side '{side}'; roots: [{listed}]")
        self.side = side
        self.roots = list(roots)
        self.grad_ratios = list(grad_ratios)


class InvalidConfigError(CqnlsError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class SweepError(CqnlsError):
    def __init__(self, statuses: List[Dict[str, Any]]):
        failed = sum(1 for s in statuses if s.get("status") != "ok")
        super().__init__(f"{failed} of {len(statuses)} sweep runs failed")
        self.statuses = statuses
