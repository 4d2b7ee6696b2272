"""Sampled scalar time series with a declared monotonicity direction.

Every functional in this package that is supposed to be monotone (or
conserved) along a flow is emitted as a MonotoneSeries so the direction
claim and any attached dissipation-identity residuals can be checked
uniformly by monotone_check.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .tensors import DomainError

DIRECTIONS = ("nonincreasing", "nondecreasing", "constant")


@dataclass
class MonotoneSeries:
    """Named scalar samples with the direction they are claimed to move in.

    residuals: per-interval residuals of an exact dissipation identity where
    one exists (len(times) - 1), else None. meta carries provenance
    (source trajectory span, rigidity flags, quadrature settings).
    """

    name: str
    times: np.ndarray
    values: np.ndarray
    direction: str
    residuals: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.direction not in DIRECTIONS:
            raise DomainError(f"direction must be one of {DIRECTIONS}, got {self.direction!r}")
        if self.times.ndim != 1 or self.times.shape != self.values.shape:
            raise DomainError("times and values must be 1-d arrays of equal length")
        if len(self.times) < 2:
            raise DomainError("a series needs at least two samples")
        if np.any(np.diff(self.times) <= 0):
            raise DomainError(f"times must be strictly increasing in series {self.name!r}")
        if self.residuals is not None:
            self.residuals = np.asarray(self.residuals, dtype=float)
            if self.residuals.shape != (len(self.times) - 1,):
                raise DomainError("residuals must be per-interval (len(times) - 1)")

    def signed_violations(self) -> np.ndarray:
        """Per-step movement against the declared direction (positive = violation).

        For direction "constant" this is the per-step absolute variation.
        """
        d = np.diff(self.values)
        if self.direction == "nonincreasing":
            return d
        if self.direction == "nondecreasing":
            return -d
        return np.abs(d)

    def max_violation(self) -> float:
        return float(np.max(self.signed_violations()))

    def total_variation(self) -> float:
        return float(np.sum(np.abs(np.diff(self.values))))

    def scale(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass
class CheckVerdict:
    passed: bool
    max_violation: float
    at_index: Optional[int]
    detail: str = ""

    def __bool__(self) -> bool:
        return self.passed


def monotone_check(series: MonotoneSeries, tol: float) -> CheckVerdict:
    """Pass iff the worst per-step violation of the declared direction is <= tol.

    Series declared "constant" additionally require total variation <= tol.
    The located index is the left endpoint of the worst interval.
    """
    v = series.signed_violations()
    idx = int(np.argmax(v))
    worst = float(v[idx])
    if worst > tol:
        return CheckVerdict(
            False, worst, idx,
            f"{series.name}: step {idx} (t={series.times[idx]:.6g} -> "
            f"{series.times[idx + 1]:.6g}) moves {worst:.3e} against "
            f"'{series.direction}' (tol {tol:.1e})",
        )
    if series.direction == "constant":
        tv = series.total_variation()
        if tv > tol:
            return CheckVerdict(
                False, tv, None,
                f"{series.name}: total variation {tv:.3e} exceeds {tol:.1e} "
                f"for a constant series",
            )
    return CheckVerdict(True, worst, None, f"{series.name}: ok")


@dataclass
class FunctionalReport:
    """Aggregated verdicts for one scenario's worth of series checks."""

    scenario_id: str
    checks: dict = field(default_factory=dict)       # name -> CheckVerdict
    residual_norms: dict = field(default_factory=dict)  # name -> max |residual|
    meta: dict = field(default_factory=dict)

    def add(self, name: str, verdict: CheckVerdict, residual_norm: Optional[float] = None):
        self.checks[name] = verdict
        if residual_norm is not None:
            self.residual_norms[name] = float(residual_norm)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.checks.values())

    def to_dict(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "passed": self.passed,
            "checks": {
                k: {
                    "passed": v.passed,
                    "max_violation": v.max_violation,
                    "at_index": v.at_index,
                    "detail": v.detail,
                }
                for k, v in self.checks.items()
            },
            "residual_norms": self.residual_norms,
            "meta": self.meta,
        }
