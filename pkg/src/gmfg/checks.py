"""Bound-check reports returned by the runtime estimate checks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from .errors import BoundViolation


@dataclass
class BoundReport:
    """Outcome of checking ``actual <= bound`` with an absolute slack ``tol``.

    Two-sided checks (Harnack) are expressed through ``lower`` as well:
    then the report passes iff ``lower - tol <= actual_min`` too.
    """

    name: str
    actual: float
    bound: float
    tol: float = 0.0
    lower: float | None = None
    actual_min: float | None = None
    details: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        ok = self.actual <= self.bound + self.tol
        if self.lower is not None and self.actual_min is not None:
            ok = ok and self.actual_min >= self.lower - self.tol
        return bool(ok)

    @property
    def margin(self) -> float:
        m = self.bound - self.actual
        if self.lower is not None and self.actual_min is not None:
            m = min(m, self.actual_min - self.lower)
        return float(m)

    def raise_if_failed(self) -> "BoundReport":
        if not self.passed:
            raise BoundViolation(self)
        return self

    def to_dict(self) -> dict[str, Any]:
        out = {
            "name": self.name,
            "passed": self.passed,
            "actual": float(self.actual),
            "bound": float(self.bound),
            "tol": float(self.tol),
            "margin": self.margin,
        }
        if self.lower is not None:
            out["lower"] = float(self.lower)
            out["actual_min"] = float(self.actual_min)
        if self.details:
            out["details"] = self.details
        return out

    def __str__(self) -> str:
        status = "ok" if self.passed else "VIOLATED"
        if self.lower is not None:
            return (
                f"{self.name}: {status} ({self.lower:.6g} <= [{self.actual_min:.6g}, "
                f"{self.actual:.6g}] <= {self.bound:.6g}, tol {self.tol:.1e})"
            )
        return f"{self.name}: {status} ({self.actual:.6g} <= {self.bound:.6g}, tol {self.tol:.1e})"
