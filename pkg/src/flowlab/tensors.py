"""Frame-based symmetric-tensor algebra on small (2x2, 3x3) matrices.

Everything here operates on plain numpy arrays holding the components of
symmetric tensors in a fixed frame.  Metrics must be symmetric positive
definite (SPD); we check this explicitly and fail loudly instead of
regularizing, because a near-singular metric upstream is always a bug.

The shape distance is the geodesic distance on the symmetric space
SO(n)\\SL(n,R) of unit-determinant positive matrices with the trace metric
<A,B> = Tr(AB) at the identity:

    d(P, Q) = || log( M / det(M)^{1/n} ) ||_F ,   M = P^{-1/2} Q P^{-1/2}.

Determinants are normalized away inside the distance so callers can pass raw
(non-unimodular) metrics; only the shape of the metric matters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# SPD guard: smallest eigenvalue must exceed SPD_RTOL times the largest.
SPD_RTOL = 1e-14


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation (e.g. non-SPD metric)."""


class ConditioningError(DomainError):
    """SPD input too ill-conditioned to trust eigendecomposition results."""


def _sym_check(M: np.ndarray, name: str = "matrix") -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DomainError(f"{name} must be square, got shape {M.shape}")
    scale = np.max(np.abs(M)) or 1.0
    if np.max(np.abs(M - M.T)) > 1e-12 * scale:
        raise DomainError(f"{name} is not symmetric (asymmetry above 1e-12 relative)")
    return 0.5 * (M + M.T)


def spd_eigh(M: np.ndarray, name: str = "metric") -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of an SPD matrix, with the conditioning guard applied.

    Returns (eigenvalues, eigenvectors) with M = V diag(w) V^T.
    """
    M = _sym_check(M, name)
    w, V = np.linalg.eigh(M)
    if w[-1] <= 0.0 or w[0] <= SPD_RTOL * w[-1]:
        raise ConditioningError(
            f"{name} not safely positive definite: eigenvalues {w} "
            f"(min/max must exceed {SPD_RTOL:g})"
        )
    return w, V


@dataclass(frozen=True)
class TracelessDecomp:
    """Trace/traceless split of a symmetric tensor w.r.t. a companion metric."""

    trace: float          # H = h^{ij} K_ij
    traceless: np.ndarray  # K0 = K - (H/n) h

    def reconstruct(self, h: np.ndarray) -> np.ndarray:
        n = self.traceless.shape[0]
        return self.traceless + (self.trace / n) * np.asarray(h, dtype=float)


def traceless_split(K: np.ndarray, h: np.ndarray) -> TracelessDecomp:
    """Split K into its metric trace H = h^{ij}K_ij and traceless part K0.

    h must be SPD; K symmetric of matching dimension.
    """
    h = _sym_check(h, "h")
    K = _sym_check(K, "K")
    if K.shape != h.shape:
        raise DomainError(f"shape mismatch: K {K.shape} vs h {h.shape}")
    spd_eigh(h)  # domain guard only
    n = h.shape[0]
    H = float(np.trace(np.linalg.solve(h, K)))
    K0 = K - (H / n) * h
    return TracelessDecomp(trace=H, traceless=K0)


def hnorm_sq(T: np.ndarray, h: np.ndarray) -> float:
    """Squared norm h^{ik} h^{jl} T_ij T_kl of a symmetric tensor T.

    Nonnegative, zero iff T = 0; invariant under simultaneous congruence of
    T and h by any invertible frame change.
    """
    h = _sym_check(h, "h")
    T = _sym_check(T, "T")
    spd_eigh(h)
    A = np.linalg.solve(h, T)  # mixed components T^i_j
    return float(np.sum(A * A.T))


def spd_sqrt_log(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Matrix square root and logarithm of an SPD matrix via eigendecomposition.

    Returns (sqrt, log) with sqrt @ sqrt = M and expm(log) = M.
    """
    w, V = spd_eigh(M, "M")
    sqrt = (V * np.sqrt(w)) @ V.T
    log = (V * np.log(w)) @ V.T
    return sqrt, log


def shape_distance(P: np.ndarray, Q: np.ndarray) -> float:
    """Geodesic distance between the unit-determinant shapes of SPD P and Q.

    d(P,Q) = ||log(M/det(M)^{1/n})||_F with M = P^{-1/2} Q P^{-1/2}.
    Symmetric in (P,Q); vanishes iff Q is a positive multiple of P.
    """
    wp, Vp = spd_eigh(P, "P")
    _sym_check(Q, "Q")
    Pinvh = (Vp * (1.0 / np.sqrt(wp))) @ Vp.T
    M = Pinvh @ Q @ Pinvh
    wm, _ = spd_eigh(0.5 * (M + M.T), "P^-1/2 Q P^-1/2")
    lam = np.log(wm)
    lam -= np.mean(lam)  # det-normalization: shift log-eigenvalues to trace zero
    return float(np.sqrt(np.sum(lam * lam)))
