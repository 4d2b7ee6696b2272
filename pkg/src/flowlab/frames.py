"""Curvature of left-invariant metrics in a fixed frame, from structure constants.

A homogeneous slice is described by a frame e_1..e_n with constant structure
constants [e_j, e_k] = C^i_{jk} e_i and a constant metric h_ij = <e_i, e_j>.
Everything geometric (connection, Riemann/Ricci, covariant derivatives of
slice tensors) is then finite-dimensional linear algebra.

Index conventions used consistently below:

* C[i, j, k] = C^i_{jk}, antisymmetric in (j, k);
* Gam[m, j, k] = Gamma^m_{jk}, so nabla_{e_j} e_k = Gamma^m_{jk} e_m
  (torsion-free: Gam[m,j,k] - Gam[m,k,j] = C[m,j,k]);
* Rm3[i, j, k, l] = < Rm(e_i, e_j) e_k , e_l >  with
  Rm(X,Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_{[X,Y]} Z;
* Ric[j, k] = h^{il} Rm3[i, j, k, l]  (positive on the round sphere).

The spacetime curvature norm |Rm|_T is the naive root-sum-of-squares of all
orthonormal-frame components of the 4D Riemann tensor, time legs included,
where e_0 is the future unit normal of the slice.  The three blocks are
assembled from slice data only:

* spatial (Gauss):        R_{ijkl} = Rm3_{ijkl} - (K_ik K_jl - K_il K_jk)
* mixed (Codazzi):        R ~ (nabla_i K)_{jk} - (nabla_j K)_{ik}
* time-time (via the CMC evolution equation, valid on vacuum solutions):
                          R_{0i0j} = Ric_ij + H K_ij - (K h^{-1} K)_ij

Signs are pinned by requiring |Rm|_T = 0 on flat model slices (Milne cone,
plane-wave-free Kasner (1,0,0)) and agreement with a finite-difference
coordinate oracle on curved Kasner; see the test suite.
"""

from __future__ import annotations

import numpy as np

from .tensors import spd_eigh


def structure_constants_cyclic(lam) -> np.ndarray:
    """Structure constants for a Milnor frame: [e_j, e_k] = lam_i e_i, cyclic.

    lam = (l1, l2, l3) gives [e_2,e_3] = l1 e_1, [e_3,e_1] = l2 e_2,
    [e_1,e_2] = l3 e_3.  Covers all unimodular 3D Lie algebras up to
    permutation and scale (flat torus (0,0,0), nil (1,0,0), sol (1,-1,0),
    sl(2,R) (1,1,-1), su(2) (1,1,1)).
    """
    l1, l2, l3 = (float(v) for v in lam)
    C = np.zeros((3, 3, 3))
    C[0, 1, 2], C[0, 2, 1] = l1, -l1
    C[1, 2, 0], C[1, 0, 2] = l2, -l2
    C[2, 0, 1], C[2, 1, 0] = l3, -l3
    return C


def unimodularity_defect(C: np.ndarray) -> float:
    """max_j |C^i_{ij}|; zero exactly for unimodular algebras."""
    return float(np.max(np.abs(np.einsum("iij->j", C))))


def frame_connection(C: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Levi-Civita connection coefficients Gamma^m_{jk} from the Koszul formula.

    For left-invariant X, Y, Z:
      2 <nabla_j e_k, e_m> = <[e_j,e_k], e_m> - <[e_k,e_m], e_j> + <[e_m,e_j], e_k>.
    """
    h = np.asarray(h, dtype=float)
    # low[j,k,m] = <nabla_j e_k, e_m>
    low = 0.5 * (
        np.einsum("ajk,am->jkm", C, h)
        - np.einsum("akm,aj->jkm", C, h)
        + np.einsum("amj,ak->jkm", C, h)
    )
    return np.einsum("mn,jkn->mjk", np.linalg.inv(h), low)


def riemann3_frame(C: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Full slice Riemann tensor Rm3[i,j,k,l] = <Rm(e_i,e_j)e_k, e_l>.

    Frame coefficients are constant on the slice, so derivative terms drop
    and only Gamma*Gamma and bracket terms remain.
    """
    Gam = frame_connection(C, h)
    # Rm(e_i,e_j)e_k = (Gam^b_{ia} Gam^a_{jk} - Gam^b_{ja} Gam^a_{ik} - C^m_{ij} Gam^b_{mk}) e_b
    T = (
        np.einsum("bia,ajk->ijkb", Gam, Gam)
        - np.einsum("bja,aik->ijkb", Gam, Gam)
        - np.einsum("mij,bmk->ijkb", C, Gam)
    )
    return np.einsum("ijkb,bl->ijkl", T, np.asarray(h, dtype=float))


def ricci_frame(C: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Ricci tensor (lower frame indices) of the left-invariant metric h."""
    Rm3 = riemann3_frame(C, h)
    return np.einsum("il,ijkl->jk", np.linalg.inv(h), Rm3)


def scalar_curvature_frame(C: np.ndarray, h: np.ndarray) -> float:
    h = np.asarray(h, dtype=float)
    return float(np.einsum("jk,jk->", np.linalg.inv(h), ricci_frame(C, h)))


def ricci_milnor_diag(lam, hdiag) -> np.ndarray:
    """Closed-form diagonal Ricci for a cyclic Milnor frame and diagonal metric.

    Ric_ii = [lam_i^2 h_i^2 - (lam_j h_j - lam_k h_k)^2] / (2 h_j h_k),
    (i, j, k) cyclic.  Fast path for the homogeneous ODE right-hand side;
    agrees with ricci_frame on diagonal data (tested).
    """
    l = np.asarray(lam, dtype=float)
    hd = np.asarray(hdiag, dtype=float)
    out = np.empty(3)
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        out[i] = (l[i] ** 2 * hd[i] ** 2 - (l[j] * hd[j] - l[k] * hd[k]) ** 2) / (
            2.0 * hd[j] * hd[k]
        )
    return out


def covariant_deriv_sym(C: np.ndarray, h: np.ndarray, T: np.ndarray) -> np.ndarray:
    """(nabla_j T)_{ki} for a constant symmetric 2-tensor T on the slice.

    dT[j, k, i] = -Gamma^m_{jk} T_{mi} - Gamma^m_{ji} T_{km}.
    """
    Gam = frame_connection(C, h)
    return -np.einsum("mjk,mi->jki", Gam, T) - np.einsum("mji,km->jki", Gam, T)


def momentum_residual(C: np.ndarray, h: np.ndarray, K: np.ndarray) -> np.ndarray:
    """Frame momentum constraint nabla_i K^i_j - nabla_j (tr K), per component.

    tr K is constant on the slice, so only the divergence term survives.
    """
    dK = covariant_deriv_sym(C, h, np.asarray(K, dtype=float))
    return np.einsum("ik,ikj->j", np.linalg.inv(h), dK)


def _orthonormal_inv_sqrt(h: np.ndarray) -> np.ndarray:
    w, V = spd_eigh(h, "h")
    return (V * (1.0 / np.sqrt(w))) @ V.T


def spacetime_curvature_blocks(
    C: np.ndarray, h: np.ndarray, K: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Orthonormal-frame blocks (spatial, mixed, time-time) of the 4D Riemann tensor.

    Valid on vacuum CMC data: the time-time block uses the evolution equation
    to trade time derivatives of K for slice quantities, so no time
    differencing is needed.  Returns (Rs[i,j,k,l], Cod[i,j,k], TT[i,j]) in an
    orthonormal spatial frame with e_0 the future unit normal.
    """
    h = np.asarray(h, dtype=float)
    K = np.asarray(K, dtype=float)
    hinv = np.linalg.inv(h)
    H = float(np.trace(hinv @ K))

    Rm3 = riemann3_frame(C, h)
    Rs = Rm3 - (np.einsum("ik,jl->ijkl", K, K) - np.einsum("il,jk->ijkl", K, K))

    dK = covariant_deriv_sym(C, h, K)  # dK[j,k,i] = (nabla_j K)_{ki}
    Cod = dK - np.transpose(dK, (1, 0, 2))  # antisym in first two slots

    Ric = np.einsum("il,ijkl->jk", hinv, Rm3)
    TT = Ric + H * K - K @ hinv @ K

    S = _orthonormal_inv_sqrt(h)
    Rs = np.einsum("ia,jb,kc,ld,abcd->ijkl", S, S, S, S, Rs)
    Cod = np.einsum("ia,jb,kc,abc->ijk", S, S, S, Cod)
    TT = S @ TT @ S
    return Rs, Cod, TT


def spacetime_curvature_norm_frame(C: np.ndarray, h: np.ndarray, K: np.ndarray) -> float:
    """|Rm|_T: root of the sum over all (n+1)^4 orthonormal-frame components.

    The sum counts every index ordering, so each independent component enters
    with its full multiplicity:

      sum = sum_{ijkl} Rs^2  +  4 sum_{ijk} Cod^2  +  4 sum_{ij} TT^2,

    since a component with one time leg has 4 equal-magnitude orderings
    (antisymmetry + pair exchange) and likewise for two time legs, while
    three or four time legs vanish identically.
    """
    Rs, Cod, TT = spacetime_curvature_blocks(C, h, K)
    total = float(np.sum(Rs * Rs) + 4.0 * np.sum(Cod * Cod) + 4.0 * np.sum(TT * TT))
    return float(np.sqrt(max(total, 0.0)))
