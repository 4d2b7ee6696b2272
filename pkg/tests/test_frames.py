"""Left-invariant frame curvature against brute-force coordinate oracles.

The fast paths compute curvature from structure constants; the oracles in
oracles.py recompute everything by finite differences on explicit coordinate
realizations of the same geometries (Heisenberg group, SL(2,R), Kasner and
Taub-nil spacetime metrics).
"""

import numpy as np
import pytest

from oracles import (curvature_T_norm, fd_scalar_curvature,
                     frame_ricci_via_coords, heisenberg_coframe,
                     heisenberg_coord_metric, kasner_coord_metric,
                     lie_bracket_fd, sl2_coframe, sl2_coord_metric,
                     taubnil_coord_metric)

from flowlab.frames import (momentum_residual, ricci_frame, ricci_milnor_diag,
                            scalar_curvature_frame, spacetime_curvature_norm_frame,
                            structure_constants_cyclic, unimodularity_defect)
from flowlab.models import ModelId, default_zoo, model_state

X3 = np.array([0.1, 0.2, 0.3])


def _frame_rows(coframe_fn):
    def rows(x):
        return np.linalg.inv(coframe_fn(x)).T
    return rows


# ---------------------------------------------------- structure constants

def test_structure_constants_cyclic_layout():
    C = structure_constants_cyclic((1.0, 2.0, 3.0))
    # [e2, e3] = lam_1 e1 cyclically: C^i_{jk} antisymmetric in (j, k)
    assert C[0, 1, 2] == 1.0 and C[0, 2, 1] == -1.0
    assert C[1, 2, 0] == 2.0 and C[1, 0, 2] == -2.0
    assert C[2, 0, 1] == 3.0 and C[2, 1, 0] == -3.0
    assert unimodularity_defect(C) == 0.0


def test_coordinate_realizations_bracket_back_to_lambda():
    # Heisenberg coframe realizes lambda = (1, 0, 0)
    rows = _frame_rows(heisenberg_coframe)
    br = lie_bracket_fd(rows, X3, 1, 2)
    assert np.allclose(br, rows(X3)[0], atol=1e-7)
    # SL(2,R) coframe realizes lambda = (-1, -1, 1)
    rows = _frame_rows(sl2_coframe)
    x = np.array([0.15, 0.3, 0.45])
    for (i, j, k, lam) in ((1, 2, 0, -1.0), (2, 0, 1, -1.0), (0, 1, 2, 1.0)):
        br = lie_bracket_fd(rows, x, i, j)
        assert np.allclose(br, lam * rows(x)[k], atol=1e-6)


# ----------------------------------------------------------- 3D curvature

def test_ricci_flat_torus():
    C = structure_constants_cyclic((0.0, 0.0, 0.0))
    assert np.max(np.abs(ricci_frame(C, np.diag([1.0, 2.0, 3.0])))) == 0.0


def test_ricci_nil_identity_metric_against_oracle():
    C = structure_constants_cyclic((1.0, 0.0, 0.0))
    mine = ricci_frame(C, np.eye(3))
    oracle = frame_ricci_via_coords(heisenberg_coord_metric((1, 1, 1)),
                                    heisenberg_coframe, X3)
    assert np.allclose(mine, np.diag([0.5, -0.5, -0.5]), atol=1e-12)
    assert np.allclose(mine, oracle, atol=1e-7)
    assert scalar_curvature_frame(C, np.eye(3)) == pytest.approx(-0.5, abs=1e-12)


def test_ricci_nil_generic_metric_against_oracle():
    hd = (1.3, 0.7, 2.1)
    C = structure_constants_cyclic((1.0, 0.0, 0.0))
    mine = ricci_frame(C, np.diag(hd))
    oracle = frame_ricci_via_coords(heisenberg_coord_metric(hd),
                                    heisenberg_coframe, X3)
    assert np.allclose(mine, oracle, atol=1e-6)
    assert scalar_curvature_frame(C, np.diag(hd)) == pytest.approx(
        fd_scalar_curvature(heisenberg_coord_metric(hd), X3), abs=1e-6)


def test_ricci_sl2_identity_metric_against_oracle():
    C = structure_constants_cyclic((-1.0, -1.0, 1.0))
    mine = ricci_frame(C, np.eye(3))
    oracle = frame_ricci_via_coords(sl2_coord_metric((1, 1, 1)), sl2_coframe,
                                    np.array([0.15, 0.3, 0.45]))
    assert np.allclose(mine, oracle, atol=1e-6)
    # the (1,1,-1) algebra: same group, trace negative either way
    tr = scalar_curvature_frame(structure_constants_cyclic((1.0, 1.0, -1.0)),
                                np.eye(3))
    assert tr == pytest.approx(np.trace(oracle), abs=1e-6)
    assert tr < 0.0


def test_milnor_closed_form_matches_general_machinery():
    rng = np.random.default_rng(0)
    for lam in ((1.0, 0.0, 0.0), (1.0, -1.0, 0.0), (1.0, 1.0, -1.0),
                (1.0, 1.0, 1.0), (0.7, -0.3, 1.9)):
        hd = np.exp(rng.uniform(-1.0, 1.0, 3))
        C = structure_constants_cyclic(lam)
        full = ricci_frame(C, np.diag(hd))
        diag = ricci_milnor_diag(lam, hd)
        assert np.allclose(full, np.diag(diag), atol=1e-12)


def test_momentum_residual_abelian_diagonal_is_zero():
    C = structure_constants_cyclic((0.0, 0.0, 0.0))
    res = momentum_residual(C, np.diag([1.0, 2.0, 3.0]), np.diag([0.1, -0.2, 0.3]))
    assert np.max(np.abs(res)) == 0.0


# ---------------------------------------------------- spacetime |Rm|_T

def test_kasner_curvature_against_fd_oracle():
    p = (2.0 / 3.0, 2.0 / 3.0, -1.0 / 3.0)
    oracle = curvature_T_norm(kasner_coord_metric(p), [1.0, 0.1, 0.2, 0.3], h=1e-4)
    st = model_state(ModelId("Kasner", p=p), 3.0)  # u = 1
    mine = spacetime_curvature_norm_frame(st.frame, st.h, st.K)
    assert mine == pytest.approx(oracle, rel=1e-6)
    assert mine > 0.0


def test_taubnil_curvature_against_fd_oracle():
    m = next(z for z in default_zoo() if z.kind == "TaubNil")
    g = taubnil_coord_metric(m.p, m.b)
    from flowlab.models import _taubnil_u_of_t
    for t in (1.0, 100.0):
        u = _taubnil_u_of_t(m.p, m.b, t)
        oracle = curvature_T_norm(g, [u, 0.1, 0.2, 0.3], h=1e-4 * max(u, 1.0) ** 0.5)
        st = model_state(m, t)
        mine = spacetime_curvature_norm_frame(st.frame, st.h, st.K)
        assert mine == pytest.approx(oracle, rel=2e-4)


def test_flat_models_have_zero_curvature():
    for kind in ("Milne", "TaubFlat", "BianchiIIIFlat"):
        m = next(z for z in default_zoo() if z.kind == kind)
        for t in (1.0, 37.0, 1e4):
            st = model_state(m, t)
            rm = spacetime_curvature_norm_frame(st.frame, st.h, st.K)
            assert rm < 1e-10 and t * t * rm < 1e-10


def test_taub_flat_kasner_100_is_flat():
    st = model_state(ModelId("Kasner", p=(1.0, 0.0, 0.0)), 5.0)
    assert spacetime_curvature_norm_frame(st.frame, st.h, st.K) < 1e-12
