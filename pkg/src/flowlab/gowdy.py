"""1+1 evolution of T^2-symmetric vacuum metrics in areal-conformal gauge.

Conventions (T^3 topology, fields periodic in theta on [0, 2pi)):

    g4 = e^{2(eta - U)} (-dR^2 + dtheta^2)
         + e^{2U} (dx + A dy)^2 + e^{-2U} R^2 dy^2,

so the orbit fiber metric is

    G = [[e^{2U},    e^{2U} A                  ],
         [e^{2U} A,  e^{2U} A^2 + R^2 e^{-2U} ]],    det G = R^2,

and R (the orbit area radical) is the time function.  In this gauge the
lapse equals the spatial metric radical (L^2 = h), so slice quadratures
L^{-1} dvol reduce to dtheta.

Vacuum dynamics used here (derived from the fiber-block Ricci equations in
this gauge, where the lapse/shift terms cancel pairwise):

    matrix form:  G_RR + G_R/R - G_thth = G_R G^{-1} G_R - G_th G^{-1} G_th
    polarized  :  U_RR + U_R/R - U_thth = 0
    conformal  :  eta_R = R (U_R^2 + U_th^2),  eta_th = 2 R U_R U_th

The trace of the matrix equation forces w = ln det G to solve the
cylindrical wave equation with homogeneous data, hence det G = R^2 is
conserved at the continuum level; the discrete drift is monitored, not
re-projected.  Twisted (F != 0) configurations are not evolved here; see
twisted.py for the closed-form family and its checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import j0, j1

from .tensors import DomainError

TWO_PI = 2.0 * np.pi

CFL_LIMIT = 0.5  # dR <= CFL_LIMIT * dtheta (RK4 + 4th-order stencil is stable well past this)


class StepError(DomainError):
    """Step preconditions violated (CFL, grid mismatch)."""


class GowdyFailure(RuntimeError):
    """Evolution lost pointwise positivity of the fiber metric."""

    def __init__(self, message: str, R: float):
        super().__init__(message)
        self.R = R


def theta_grid(nth: int) -> np.ndarray:
    return np.arange(nth) * (TWO_PI / nth)


def d1(f: np.ndarray, dth: float) -> np.ndarray:
    """4th-order central first derivative on a periodic grid (axis 0)."""
    return (
        np.roll(f, 2, axis=0) - 8.0 * np.roll(f, 1, axis=0)
        + 8.0 * np.roll(f, -1, axis=0) - np.roll(f, -2, axis=0)
    ) / (12.0 * dth)


def d2(f: np.ndarray, dth: float) -> np.ndarray:
    """4th-order central second derivative on a periodic grid (axis 0)."""
    return (
        -np.roll(f, 2, axis=0) + 16.0 * np.roll(f, 1, axis=0) - 30.0 * f
        + 16.0 * np.roll(f, -1, axis=0) - np.roll(f, -2, axis=0)
    ) / (12.0 * dth * dth)


def _inv2(G: np.ndarray) -> np.ndarray:
    """Pointwise inverse of an (..., 2, 2) array."""
    det = G[..., 0, 0] * G[..., 1, 1] - G[..., 0, 1] * G[..., 1, 0]
    inv = np.empty_like(G)
    inv[..., 0, 0] = G[..., 1, 1]
    inv[..., 1, 1] = G[..., 0, 0]
    inv[..., 0, 1] = -G[..., 0, 1]
    inv[..., 1, 0] = -G[..., 1, 0]
    return inv / det[..., None, None]


def _det2(G: np.ndarray) -> np.ndarray:
    return G[..., 0, 0] * G[..., 1, 1] - G[..., 0, 1] * G[..., 1, 0]


def _spd2_ok(G: np.ndarray) -> bool:
    return bool(np.all(G[..., 0, 0] > 0.0) and np.all(_det2(G) > 0.0))


@dataclass
class GowdyState:
    """Potentials of one areal slice. A/A_R are None on polarized slices."""

    R: float
    theta: np.ndarray
    U: np.ndarray
    U_R: np.ndarray
    eta: np.ndarray
    A: Optional[np.ndarray] = None
    A_R: Optional[np.ndarray] = None
    twistK: float = 0.0

    def __post_init__(self):
        if self.R <= 0:
            raise DomainError(f"areal time must be positive, got {self.R}")
        n = len(self.theta)
        for name in ("U", "U_R", "eta"):
            if len(getattr(self, name)) != n:
                raise DomainError(f"field {name} does not match the grid ({n} points)")

    @property
    def nth(self) -> int:
        return len(self.theta)

    @property
    def dth(self) -> float:
        return TWO_PI / self.nth

    @property
    def polarized(self) -> bool:
        return self.A is None

    def U_theta(self) -> np.ndarray:
        return d1(self.U, self.dth)

    def momentum_period_residual(self) -> float:
        """|oint eta_theta dtheta| with eta_theta = 2 R U_R U_theta (+ twist terms);
        must vanish for eta to be periodic on T^3."""
        integrand = 2.0 * self.R * self.U_R * self.U_theta()
        if self.A is not None:
            integrand = integrand + self.R ** -2 * np.exp(4.0 * self.U) * 2.0 * self.R * self.A_R * d1(self.A, self.dth)
        return abs(float(np.sum(integrand) * self.dth))

    def to_matrix_field(self) -> "SymmetryMatrixField":
        A = np.zeros_like(self.U) if self.A is None else self.A
        A_R = np.zeros_like(self.U) if self.A_R is None else self.A_R
        G, G_R = fiber_metric_from_potentials(self.R, self.U, self.U_R, A, A_R)
        return SymmetryMatrixField(R=self.R, theta=self.theta, G=G, G_R=G_R)


def fiber_metric_from_potentials(R, U, U_R, A, A_R):
    """(G, G_R) of the orbit fiber metric; det G = R^2 holds by construction."""
    e2u = np.exp(2.0 * U)
    n = len(U)
    G = np.empty((n, 2, 2))
    G[:, 0, 0] = e2u
    G[:, 0, 1] = G[:, 1, 0] = e2u * A
    G[:, 1, 1] = e2u * A * A + R * R / e2u
    G_R = np.empty((n, 2, 2))
    G_R[:, 0, 0] = 2.0 * U_R * e2u
    G_R[:, 0, 1] = G_R[:, 1, 0] = e2u * (2.0 * U_R * A + A_R)
    G_R[:, 1, 1] = e2u * (2.0 * U_R * A * A + 2.0 * A * A_R) + (2.0 * R - 2.0 * U_R * R * R) / e2u
    return G, G_R


@dataclass
class SymmetryMatrixField:
    """Fiber metric samples G(theta) on one slice plus the R-derivative."""

    R: float
    theta: np.ndarray
    G: np.ndarray     # (nth, 2, 2), SPD pointwise
    G_R: np.ndarray   # (nth, 2, 2)

    def __post_init__(self):
        if not _spd2_ok(self.G):
            raise DomainError(f"fiber metric not SPD at R={self.R}")

    @property
    def nth(self) -> int:
        return len(self.theta)

    @property
    def dth(self) -> float:
        return TWO_PI / self.nth

    def G_theta(self) -> np.ndarray:
        return d1(self.G, self.dth)

    def det_drift(self) -> float:
        """max |det G / R^2 - 1| over the slice (areal-gauge conservation)."""
        return float(np.max(np.abs(_det2(self.G) / self.R ** 2 - 1.0)))

    def dlndet_dR(self) -> np.ndarray:
        """Pointwise d(ln det G)/dR = Tr(G^{-1} G_R); spatially 2/R in gauge."""
        Gi = _inv2(self.G)
        return np.einsum("nij,nji->n", Gi, self.G_R)


GowdySlice = Union[GowdyState, SymmetryMatrixField]


# ---------------------------------------------------------------- initial data

def polarized_data(
    R0: float,
    nth: int,
    mean: float = 0.0,
    mean_R: float = 0.0,
    cos: Sequence[float] = (),
    sin: Sequence[float] = (),
    cos_R: Sequence[float] = (),
    sin_R: Sequence[float] = (),
) -> GowdyState:
    """Initial polarized slice from Fourier coefficients of U and U_R
    (index k is the coefficient of cos/sin((k+1) theta))."""
    th = theta_grid(nth)
    U = np.full(nth, float(mean))
    U_R = np.full(nth, float(mean_R))
    for k, c in enumerate(cos):
        U += c * np.cos((k + 1) * th)
    for k, c in enumerate(sin):
        U += c * np.sin((k + 1) * th)
    for k, c in enumerate(cos_R):
        U_R += c * np.cos((k + 1) * th)
    for k, c in enumerate(sin_R):
        U_R += c * np.sin((k + 1) * th)
    return GowdyState(R=R0, theta=th, U=U, U_R=U_R, eta=np.zeros(nth))


def bessel_mode_exact(R: float, theta: np.ndarray, n: int = 1, amp: float = 1.0) -> np.ndarray:
    """U(R, theta) = amp J0(nR) cos(n theta), an exact polarized solution."""
    return amp * j0(n * R) * np.cos(n * theta)


def bessel_mode_data(R0: float, nth: int, n: int = 1, amp: float = 1.0) -> GowdyState:
    th = theta_grid(nth)
    U = bessel_mode_exact(R0, th, n, amp)
    U_R = -amp * n * j1(n * R0) * np.cos(n * th)
    return GowdyState(R=R0, theta=th, U=U, U_R=U_R, eta=np.zeros(nth))


def unpolarized_data(
    R0: float,
    nth: int,
    U: np.ndarray,
    U_R: np.ndarray,
    A: np.ndarray,
    A_R: np.ndarray,
) -> SymmetryMatrixField:
    th = theta_grid(nth)
    G, G_R = fiber_metric_from_potentials(R0, np.asarray(U, float), np.asarray(U_R, float),
                                          np.asarray(A, float), np.asarray(A_R, float))
    return SymmetryMatrixField(R=R0, theta=th, G=G, G_R=G_R)


# ------------------------------------------------------------------- stepping

def _check_cfl(dR: float, dth: float):
    if dR > CFL_LIMIT * dth * (1.0 + 1e-12):
        raise StepError(f"CFL violated: dR={dR:.3e} > {CFL_LIMIT}*dtheta={CFL_LIMIT * dth:.3e}")


def _polarized_quads(R, V, dth):
    """(energy, equivolume) dissipation-rate quadratures on one slice.

    Tr((G^-1 G_R)^2) = 4 V^2 + (2/R - 2V)^2 pointwise for the diagonal
    fiber metric, and Tr(G^-1 G_R) = 2/R identically (det G = R^2 by
    construction), so the equivolume rate is field-independent here.
    """
    trP2 = 4.0 * V * V + (2.0 / R - 2.0 * V) ** 2
    return 2.0 / R * float(np.sum(trP2)) * dth, 0.5 * (2.0 / R) ** 2 * TWO_PI


def polarized_step(state: GowdyState, dR: float, quadratures: bool = False):
    """One classical RK4 step of the polarized system (U, U_R, eta).

    With quadratures=True, also returns the RK4-stage increments of the
    cumulative energy dissipation (2/R) oint Tr((G^-1 G_R)^2) dtheta dR and
    equivolume dissipation (1/2)(d ln det G/dR)^2 (oint L^-1 dvol) dR, so
    identity residuals are limited by truncation error, not resampling.
    """
    if not state.polarized:
        raise StepError("polarized_step requires A = None")
    dth = state.dth
    _check_cfl(dR, dth)

    def rhs(R, U, V, eta):
        dU = V
        dV = d2(U, dth) - V / R
        deta = R * (V * V + d1(U, dth) ** 2)
        return dU, dV, deta

    R, U, V, eta = state.R, state.U, state.U_R, state.eta
    stages = [(R, U, V, eta)]
    k1 = rhs(*stages[0])
    stages.append((R + dR / 2, U + dR / 2 * k1[0], V + dR / 2 * k1[1], eta + dR / 2 * k1[2]))
    k2 = rhs(*stages[1])
    stages.append((R + dR / 2, U + dR / 2 * k2[0], V + dR / 2 * k2[1], eta + dR / 2 * k2[2]))
    k3 = rhs(*stages[2])
    stages.append((R + dR, U + dR * k3[0], V + dR * k3[1], eta + dR * k3[2]))
    k4 = rhs(*stages[3])
    Un = U + dR / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    Vn = V + dR / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    en = eta + dR / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
    new = GowdyState(R=R + dR, theta=state.theta, U=Un, U_R=Vn, eta=en, twistK=state.twistK)
    if not quadratures:
        return new
    g = [_polarized_quads(Rs, Vs, dth) for Rs, _, Vs, _ in stages]
    e_inc = dR / 6 * (g[0][0] + 2 * g[1][0] + 2 * g[2][0] + g[3][0])
    m_inc = dR / 6 * (g[0][1] + 2 * g[1][1] + 2 * g[2][1] + g[3][1])
    return new, (e_inc, m_inc)


def _unpolarized_quads(R, G, P, dth):
    GP = np.einsum("nij,njk->nik", _inv2(G), P)
    trP2 = np.einsum("nij,nji->n", GP, GP)
    dld = np.einsum("nii->n", GP)
    return 2.0 / R * float(np.sum(trP2)) * dth, 0.5 * float(np.mean(dld)) ** 2 * TWO_PI


def unpolarized_step(smf: SymmetryMatrixField, dR: float, quadratures: bool = False):
    """One classical RK4 step of the matrix system (G, G_R); see
    polarized_step for the quadratures flag."""
    dth = smf.dth
    _check_cfl(dR, dth)

    def rhs(R, G, P):
        Gi = _inv2(G)
        Q = d1(G, dth)
        dP = (
            d2(G, dth) - P / R
            + np.einsum("nij,njk,nkl->nil", P, Gi, P)
            - np.einsum("nij,njk,nkl->nil", Q, Gi, Q)
        )
        return P, dP

    R, G, P = smf.R, smf.G, smf.G_R
    stages = [(R, G, P)]
    k1 = rhs(*stages[0])
    stages.append((R + dR / 2, G + dR / 2 * k1[0], P + dR / 2 * k1[1]))
    k2 = rhs(*stages[1])
    stages.append((R + dR / 2, G + dR / 2 * k2[0], P + dR / 2 * k2[1]))
    k3 = rhs(*stages[2])
    stages.append((R + dR, G + dR * k3[0], P + dR * k3[1]))
    k4 = rhs(*stages[3])
    Gn = G + dR / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    Pn = P + dR / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    Gn = 0.5 * (Gn + np.swapaxes(Gn, 1, 2))  # symmetrize against roundoff skew
    Pn = 0.5 * (Pn + np.swapaxes(Pn, 1, 2))
    if not _spd2_ok(Gn):
        raise GowdyFailure(f"fiber metric lost positivity at R={R + dR:.6g}", R + dR)
    new = SymmetryMatrixField(R=R + dR, theta=smf.theta, G=Gn, G_R=Pn)
    if not quadratures:
        return new
    g = [_unpolarized_quads(*s, dth) for s in stages]
    e_inc = dR / 6 * (g[0][0] + 2 * g[1][0] + 2 * g[2][0] + g[3][0])
    m_inc = dR / 6 * (g[0][1] + 2 * g[1][1] + 2 * g[2][1] + g[3][1])
    return new, (e_inc, m_inc)


# -------------------------------------------------------------------- drivers

@dataclass
class GowdyTrajectory:
    """Recorded samples of one run, oldest first.

    aux carries cumulative quadratures aligned with samples:
    'energy_dissipation' and 'equivolume_dissipation' (both from 0 at R0).
    """

    samples: list
    kind: str                      # "polarized" | "unpolarized"
    stats: dict = field(default_factory=dict)
    aux: dict = field(default_factory=dict)

    @property
    def Rs(self) -> np.ndarray:
        return np.array([s.R for s in self.samples])

    def matrix_fields(self) -> list:
        return [s.to_matrix_field() if isinstance(s, GowdyState) else s for s in self.samples]


def _plan_steps(R0: float, R1: float, nth: int, cfl: float, num_samples: int):
    if R1 <= R0:
        raise DomainError(f"need R1 > R0, got [{R0}, {R1}]")
    if not (0 < cfl <= CFL_LIMIT):
        raise StepError(f"cfl must lie in (0, {CFL_LIMIT}], got {cfl}")
    dth = TWO_PI / nth
    nsteps = max(int(np.ceil((R1 - R0) / (cfl * dth))), num_samples)
    dR = (R1 - R0) / nsteps
    stride = max(nsteps // max(num_samples - 1, 1), 1)
    return nsteps, dR, stride


def evolve_polarized(
    state0: GowdyState, R1: float, num_samples: int = 40, cfl: float = 0.4
) -> GowdyTrajectory:
    nsteps, dR, stride = _plan_steps(state0.R, R1, state0.nth, cfl, num_samples)
    samples = [state0]
    e_cum, m_cum = 0.0, 0.0
    e_vals, m_vals = [0.0], [0.0]
    state = state0
    max_period = state.momentum_period_residual()
    for k in range(nsteps):
        state, (e_inc, m_inc) = polarized_step(state, dR, quadratures=True)
        e_cum += e_inc
        m_cum += m_inc
        if (k + 1) % stride == 0 or k == nsteps - 1:
            if samples[-1].R < state.R:
                samples.append(state)
                e_vals.append(e_cum)
                m_vals.append(m_cum)
            max_period = max(max_period, state.momentum_period_residual())
    return GowdyTrajectory(
        samples=samples,
        kind="polarized",
        stats={"nsteps": nsteps, "dR": dR, "max_period_residual": max_period},
        aux={"energy_dissipation": np.array(e_vals), "equivolume_dissipation": np.array(m_vals)},
    )


def evolve_unpolarized(
    smf0: SymmetryMatrixField, R1: float, num_samples: int = 40, cfl: float = 0.4
) -> GowdyTrajectory:
    nsteps, dR, stride = _plan_steps(smf0.R, R1, smf0.nth, cfl, num_samples)
    samples = [smf0]
    e_cum, m_cum = 0.0, 0.0
    e_vals, m_vals = [0.0], [0.0]
    smf = smf0
    max_drift = smf.det_drift()
    for k in range(nsteps):
        smf, (e_inc, m_inc) = unpolarized_step(smf, dR, quadratures=True)
        e_cum += e_inc
        m_cum += m_inc
        if (k + 1) % stride == 0 or k == nsteps - 1:
            if samples[-1].R < smf.R:
                samples.append(smf)
                e_vals.append(e_cum)
                m_vals.append(m_cum)
            max_drift = max(max_drift, smf.det_drift())
    return GowdyTrajectory(
        samples=samples,
        kind="unpolarized",
        stats={"nsteps": nsteps, "dR": dR, "max_det_drift": max_drift},
        aux={"energy_dissipation": np.array(e_vals), "equivolume_dissipation": np.array(m_vals)},
    )
