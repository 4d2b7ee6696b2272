"""Shared value types: CMC slice states, symmetry splits, sampled trajectories."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .tensors import DomainError, spd_eigh, traceless_split, hnorm_sq

N_SPATIAL = 3


@dataclass(frozen=True)
class SymmetrySplit:
    """Declares a fiber/base block structure of the slice frame.

    fiber: frame indices spanned by the symmetry directions (the tensor
    blocks must be invariant and block-diagonal in these indices);
    base: the remaining indices.
    """

    fiber: tuple[int, ...]
    base: tuple[int, ...]

    def __post_init__(self):
        if sorted(self.fiber + self.base) != list(range(N_SPATIAL)):
            raise DomainError(f"split {self.fiber}+{self.base} must partition 0..2")


@dataclass
class FlowState:
    """One CMC slice of an expanding vacuum flow in Hubble gauge.

    t: Hubble time (= -n/H on exact solutions);
    h, K: metric and second fundamental form in the slice frame;
    L: lapse relating Hubble time to proper time along the normal;
    frame: structure constants C[i,j,k] of the slice frame ([e_j,e_k] = C^i_{jk} e_i);
    split: optional declared symmetry split (used by the reduced-volume functional).
    """

    t: float
    h: np.ndarray
    K: np.ndarray
    L: float
    frame: np.ndarray
    split: Optional[SymmetrySplit] = None

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=float)
        self.K = np.asarray(self.K, dtype=float)
        self.frame = np.asarray(self.frame, dtype=float)
        if self.t <= 0:
            raise DomainError(f"Hubble time must be positive, got {self.t}")
        spd_eigh(self.h, "h")

    @property
    def n(self) -> int:
        return self.h.shape[0]

    @property
    def hubble(self) -> float:
        """Mean curvature H = h^{ij} K_ij (negative on expanding slices)."""
        return float(np.trace(np.linalg.solve(self.h, self.K)))

    def k0(self) -> np.ndarray:
        return traceless_split(self.K, self.h).traceless

    def k0_sq(self) -> float:
        return hnorm_sq(self.k0(), self.h)

    @property
    def vol(self) -> float:
        """Slice volume per unit comoving frame cell, sqrt(det h)."""
        return float(np.sqrt(np.linalg.det(self.h)))

    def gauge_residual(self) -> float:
        """H + n/t; zero in exact Hubble gauge."""
        return self.hubble + self.n / self.t


@dataclass
class Trajectory:
    """An ordered sequence of FlowStates along one flow, plus evaluation support.

    states: samples at strictly increasing Hubble times;
    eval_fn: exact or interpolating evaluator t -> FlowState covering
        [t_min, t_max] (models evaluate exactly; the ODE evolver supplies a
        dense cubic-in-ln-t interpolant);
    aux: cumulative quadratures tabulated at the sample times (keys like
        "fm_dissipation", "k0_l1", ... integrated alongside the evolution);
    stats: integrator bookkeeping (step counts, max residuals, ...).
    """

    states: list[FlowState]
    eval_fn: Optional[Callable[[float], FlowState]] = None
    aux: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        ts = self.times
        if len(ts) < 2 or np.any(np.diff(ts) <= 0):
            raise DomainError("trajectory needs >= 2 strictly increasing times")

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    @property
    def t_min(self) -> float:
        return self.states[0].t

    @property
    def t_max(self) -> float:
        return self.states[-1].t

    def eval(self, t: float) -> FlowState:
        if not (self.t_min <= t <= self.t_max * (1 + 1e-12)):
            raise DomainError(
                f"t={t:g} outside trajectory span [{self.t_min:g}, {self.t_max:g}]"
            )
        if self.eval_fn is None:
            raise DomainError("trajectory has no dense evaluator")
        return self.eval_fn(min(t, self.t_max))

    def aux_interp(self, name: str, t) -> np.ndarray:
        """Cubic interpolation (in ln t) of a cumulative quadrature column."""
        from scipy.interpolate import CubicSpline

        ts = self.times
        return CubicSpline(np.log(ts), self.aux[name])(np.log(t))
