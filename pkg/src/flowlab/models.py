"""Closed-form model flows in Hubble-gauge CMC form; exact oracles for everything else.

The zoo:

* Milne           -- Lorentzian cone over unit hyperbolic space; L = 1, K0 = 0.
* Kasner(p)       -- diagonal flat-slice power law, exponents with
                     sum p_i = sum p_i^2 = 1.
* TaubFlat        -- the Kasner (1,0,0) point (flat spacetime).
* TaubNil(p, b)   -- nil-frame deformation of Kasner controlled by a twist b;
                     converges to Kasner(p) as t -> oo when p1 < 0.
* BianchiIIIFlat  -- flat product: expanding hyperbolic plane times a line.
* PseudoStaticTwisted(C, K) -- flat spacetime sliced so that a twisted circle
                     fibration is manifest; homogeneous plane-symmetric slices.

Every model's own natural time u is reparametrized (analytically where
possible, numerically for Taub-nil) to the Hubble time t = -3/H, so
model_state always returns a FlowState in the common gauge.
Volumes are per unit comoving frame cell: sqrt(det h).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from . import frames
from .state import FlowState, SymmetrySplit, Trajectory
from .tensors import DomainError

KASNER_CONSTRAINT_TOL = 1e-12

MODEL_KINDS = (
    "Milne",
    "Kasner",
    "TaubFlat",
    "TaubNil",
    "BianchiIIIFlat",
    "PseudoStaticTwisted",
)

# slice frames ------------------------------------------------------------

# hyperbolic 3-space, left-invariant frame e1=dx, e2=e^{-x}dy, e3=e^{-x}dz:
# [e1,e2] = -e2, [e1,e3] = -e3
FRAME_H3 = np.zeros((3, 3, 3))
FRAME_H3[1, 0, 1], FRAME_H3[1, 1, 0] = -1.0, 1.0
FRAME_H3[2, 0, 2], FRAME_H3[2, 2, 0] = -1.0, 1.0

# hyperbolic plane times a line: [e1,e2] = -e2 only
FRAME_H2xR = np.zeros((3, 3, 3))
FRAME_H2xR[1, 0, 1], FRAME_H2xR[1, 1, 0] = -1.0, 1.0

FRAME_ABELIAN = np.zeros((3, 3, 3))


def validate_kasner_exponents(p: Sequence[float]) -> tuple[bool, tuple[float, float]]:
    """Check sum p_i = 1 and sum p_i^2 = 1; returns (ok, (res_sum, res_sumsq))."""
    p = np.asarray(p, dtype=float)
    r1 = float(np.sum(p) - 1.0)
    r2 = float(np.sum(p * p) - 1.0)
    ok = abs(r1) < KASNER_CONSTRAINT_TOL and abs(r2) < KASNER_CONSTRAINT_TOL
    return ok, (r1, r2)


def kasner_family(p1: float) -> tuple[float, float]:
    """The unordered pair (p2, p3) completing p1 to a Kasner exponent triple.

    p2, p3 are the roots of x^2 - (1-p1) x + (p1^2 - p1) = 0; real exactly
    for p1 in [-1/3, 1].  Returned with p2 >= p3.
    """
    disc = (1.0 - p1) * (1.0 + 3.0 * p1)
    if disc < -1e-15:
        raise DomainError(f"no real Kasner pair for p1={p1} (need p1 in [-1/3, 1])")
    root = math.sqrt(max(disc, 0.0))
    p2 = 0.5 * ((1.0 - p1) + root)
    p3 = 0.5 * ((1.0 - p1) - root)
    return p2, p3


@dataclass(frozen=True)
class ModelId:
    """A model flow and its parameters.

    kind: one of MODEL_KINDS;
    p: Kasner exponents (Kasner / TaubNil);
    b: Taub-nil twist;
    C, K: pseudo-static constants (slice scale and twist charge);
    sigma: optional circle profile for the pseudo-static family -- a pure
        coordinate choice on the circle, used only by the twisted verifier;
        the homogeneous representative sigma = 0 defines the FlowState.
    """

    kind: str
    p: Optional[tuple[float, float, float]] = None
    b: float = 1.0
    C: float = 1.0
    K: float = 1.0
    sigma: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise DomainError(f"unknown model kind {self.kind!r}")
        if self.kind in ("Kasner", "TaubNil"):
            if self.p is None:
                raise DomainError(f"{self.kind} needs Kasner exponents p")
            ok, res = validate_kasner_exponents(self.p)
            if not ok:
                raise DomainError(f"invalid Kasner exponents {self.p}: residuals {res}")
        if self.kind == "PseudoStaticTwisted" and self.C <= 0:
            raise DomainError("pseudo-static scale constant C must be positive")


def _kasner_state(p, t: float, frame=FRAME_ABELIAN, split=None) -> FlowState:
    p = np.asarray(p, dtype=float)
    u = t / 3.0
    h = np.diag(u ** (2.0 * p))
    K = np.diag(-p * u ** (2.0 * p - 1.0))
    return FlowState(t=t, h=h, K=K, L=1.0 / 3.0, frame=frame, split=split)


# Taub-nil closed form in its own time u --------------------------------------


def _taubnil_A(p1: float, b: float, u: float) -> tuple[float, float]:
    """A(u) and A'(u) for A^2 = 1 + b^2 u^{4 p1}."""
    A2 = 1.0 + b * b * u ** (4.0 * p1)
    A = math.sqrt(A2)
    Ap = 2.0 * p1 * b * b * u ** (4.0 * p1 - 1.0) / A
    return A, Ap


def _taubnil_h_K_H(p, b: float, u: float):
    p1, p2, p3 = p
    A, Ap = _taubnil_A(p1, b, u)
    h = np.diag(
        [
            u ** (2 * p1) / (A * A),
            u ** (2 * p2) * A * A,
            u ** (2 * p3) * A * A,
        ]
    )
    dlog = np.array(
        [
            2 * p1 / u - 2 * Ap / A,
            2 * p2 / u + 2 * Ap / A,
            2 * p3 / u + 2 * Ap / A,
        ]
    )
    K = np.diag(-0.5 / A * np.diag(h) * dlog)
    H = -(1.0 / A) * (1.0 / u + Ap / A)
    return h, K, H


def _taubnil_u_of_t(p, b: float, t: float) -> float:
    """Invert the Hubble time t(u) = -3/H(u) (strictly increasing)."""

    def f(u):
        return -3.0 / _taubnil_h_K_H(p, b, u)[2] - t

    lo, hi = t / 3.0, t / 3.0
    for _ in range(200):
        if f(lo) <= 0.0:
            break
        lo *= 0.5
    for _ in range(200):
        if f(hi) >= 0.0:
            break
        hi *= 2.0
    if f(lo) > 0.0 or f(hi) < 0.0:
        raise DomainError(f"Hubble reparametrization bracket failed for t={t}")
    return brentq(f, lo, hi, xtol=1e-15 * t, rtol=8.9e-16)


def _taubnil_state(m: ModelId, t: float) -> FlowState:
    u = _taubnil_u_of_t(m.p, m.b, t)
    h, K, _ = _taubnil_h_K_H(m.p, m.b, u)
    # homogeneous CMC lapse: algebraic in the anisotropy (exact on solutions)
    hinv = np.diag(1.0 / np.diag(h))
    Ksq = float(np.sum((hinv @ K) * (hinv @ K).T))
    H = float(np.trace(hinv @ K))
    k0sq = Ksq - H * H / 3.0
    L = 3.0 / (3.0 + t * t * k0sq)
    lam1 = 4.0 * m.p[0] * m.b
    return FlowState(
        t=t, h=h, K=K, L=L, frame=frames.structure_constants_cyclic((lam1, 0.0, 0.0))
    )


def _pseudostatic_R_of_t(C: float, K: float, t: float) -> float:
    return math.sqrt(t * t / (36.0 * C) + C * K * K)


def _pseudostatic_state(m: ModelId, t: float) -> FlowState:
    """Homogeneous representative of the pseudo-static twisted slicing.

    Slice coordinates (theta, x1, x2); the metric is spatially constant:
      h = [[4C, 0, -2CK], [0, 1, 0], [-2CK, 0, R^2]],
    with only K_{x2 x2} = -sqrt(R^2 - C K^2) / (2 sqrt(C)) nonzero, where
    R(t) = sqrt(t^2/(36 C) + C K^2).  The ambient spacetime is flat.
    """
    C, Kc = m.C, m.K
    R = _pseudostatic_R_of_t(C, Kc, t)
    disc = R * R - C * Kc * Kc
    h = np.array([[4.0 * C, 0.0, -2.0 * C * Kc], [0.0, 1.0, 0.0], [-2.0 * C * Kc, 0.0, R * R]])
    K = np.zeros((3, 3))
    K[2, 2] = -math.sqrt(disc) / (2.0 * math.sqrt(C))
    return FlowState(t=t, h=h, K=K, L=1.0 / 3.0, frame=FRAME_ABELIAN)


def model_state(m: ModelId, t: float) -> FlowState:
    """Evaluate the model flow at Hubble time t > 0."""
    if t <= 0:
        raise DomainError(f"Hubble time must be positive, got {t}")
    if m.kind == "Milne":
        h = t * t * np.eye(3)
        return FlowState(t=t, h=h, K=-h / t, L=1.0, frame=FRAME_H3)
    if m.kind == "Kasner":
        return _kasner_state(m.p, t, split=SymmetrySplit(fiber=(2,), base=(0, 1)))
    if m.kind == "TaubFlat":
        return _kasner_state((1.0, 0.0, 0.0), t)
    if m.kind == "TaubNil":
        return _taubnil_state(m, t)
    if m.kind == "BianchiIIIFlat":
        u = 2.0 * t / 3.0
        h = np.diag([u * u, u * u, 1.0])
        K = np.diag([-u, -u, 0.0])
        return FlowState(
            t=t,
            h=h,
            K=K,
            L=2.0 / 3.0,
            frame=FRAME_H2xR,
            split=SymmetrySplit(fiber=(2,), base=(0, 1)),
        )
    if m.kind == "PseudoStaticTwisted":
        return _pseudostatic_state(m, t)
    raise DomainError(f"unknown model kind {m.kind!r}")


def model_curvature_norm(m: ModelId, t: float) -> float:
    """|Rm|_T of the model spacetime at Hubble time t (0 for the flat models)."""
    s = model_state(m, t)
    return frames.spacetime_curvature_norm_frame(s.frame, s.h, s.K)


def model_trajectory(m: ModelId, t0: float, t1: float, num: int = 64) -> Trajectory:
    """Sample the model at log-spaced Hubble times, with exact dense evaluation."""
    ts = np.geomspace(t0, t1, num)
    states = [model_state(m, t) for t in ts]
    return Trajectory(
        states=states,
        eval_fn=lambda t: model_state(m, t),
        stats={"source": "model", "kind": m.kind},
    )


def default_zoo() -> list[ModelId]:
    """The six standard models with canonical parameter choices."""
    return [
        ModelId("Milne"),
        ModelId("Kasner", p=(2.0 / 3.0, 2.0 / 3.0, -1.0 / 3.0)),
        ModelId("TaubFlat"),
        ModelId("TaubNil", p=(-0.25, (5.0 + math.sqrt(5.0)) / 8.0, (5.0 - math.sqrt(5.0)) / 8.0), b=1.0),
        ModelId("BianchiIIIFlat"),
        ModelId("PseudoStaticTwisted", C=1.0, K=1.0),
    ]


# generic numeric Hubble reparametrization ------------------------------------


@dataclass
class UGaugeFlow:
    """A homogeneous flow presented in an arbitrary time parameter u.

    h_of_u / K_of_u give the slice geometry (K is the geometric second
    fundamental form, independent of the time parametrization); lapse_of_u is
    the proper time per unit u along the slice normal.
    """

    h_of_u: Callable[[float], np.ndarray]
    K_of_u: Callable[[float], np.ndarray]
    lapse_of_u: Callable[[float], float]
    frame: np.ndarray
    u_range: tuple[float, float]

    def hubble_of_u(self, u: float) -> float:
        return float(np.trace(np.linalg.solve(self.h_of_u(u), self.K_of_u(u))))


def hubble_reparametrize(flow: UGaugeFlow, ts: Sequence[float]) -> list[FlowState]:
    """Reslice a u-parametrized homogeneous flow by Hubble time t = -3/H.

    The geometry (h, K) at each slice is unchanged; only the time label and
    the lapse are transformed (L = lapse_of_u * du/dt, with dt/du evaluated
    by fourth-order central differences on t(u) = -3/H(u)).
    Raises a gauge error if H is not strictly negative and increasing.
    """
    ulo, uhi = flow.u_range

    def t_of_u(u):
        Hu = flow.hubble_of_u(u)
        if Hu >= 0:
            raise DomainError(f"flow not expanding at u={u}: H={Hu}")
        return -3.0 / Hu

    out = []
    for t in ts:
        f = lambda u: t_of_u(u) - t
        if f(ulo) > 0 or f(uhi) < 0:
            raise DomainError(
                f"Hubble time {t:g} not reached on u-range [{ulo:g}, {uhi:g}]"
            )
        u = brentq(f, ulo, uhi, rtol=8.9e-16)
        du = 1e-4 * u
        tm2, tm1, tp1, tp2 = (t_of_u(u + k * du) for k in (-2, -1, 1, 2))
        dt_du = (tm2 - 8.0 * tm1 + 8.0 * tp1 - tp2) / (12.0 * du)
        if dt_du <= 0:
            raise DomainError(f"Hubble time not increasing at u={u:g} (gauge error)")
        out.append(
            FlowState(
                t=t,
                h=flow.h_of_u(u),
                K=flow.K_of_u(u),
                L=flow.lapse_of_u(u) / dt_du,
                frame=flow.frame,
            )
        )
    return out
