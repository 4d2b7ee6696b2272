"""Exact model flows: gauge, constraints, curvature laws, reparametrization."""

import numpy as np
import pytest

from flowlab.bianchi import constraint_residuals, spacetime_curvature_norm
from flowlab.models import (MODEL_KINDS, ModelId, UGaugeFlow, default_zoo,
                            hubble_reparametrize, kasner_family,
                            model_curvature_norm, model_state, model_trajectory,
                            validate_kasner_exponents)
from flowlab.scenarios import verify_zoo
from flowlab.tensors import DomainError, hnorm_sq, shape_distance, traceless_split

TS = np.geomspace(1.0, 1e4, 20)


def _zoo(kind):
    return next(m for m in default_zoo() if m.kind == kind)


# ------------------------------------------------------------ exponent algebra

def test_kasner_constraints():
    ok, res = validate_kasner_exponents((2 / 3, 2 / 3, -1 / 3))
    assert ok and max(abs(r) for r in res) < 1e-12
    ok, _ = validate_kasner_exponents((0.5, 0.5, 0.5))
    assert not ok


def test_kasner_family_completion():
    p2, p3 = kasner_family(2.0 / 3.0)
    assert sorted((p2, p3)) == pytest.approx(sorted((2.0 / 3.0, -1.0 / 3.0)), abs=1e-14)
    assert kasner_family(1.0) == pytest.approx((0.0, 0.0), abs=1e-7)
    with pytest.raises(DomainError):
        kasner_family(-0.5)


def test_model_id_validates_exponents():
    with pytest.raises(DomainError):
        ModelId("Kasner", p=(0.9, 0.2, -0.1))
    with pytest.raises(DomainError):
        ModelId("NoSuchModel")


# ----------------------------------------------------------- per-model gauge

def test_all_models_satisfy_constraints_and_gauge():
    for m in default_zoo():
        for t in TS:
            ham, mom, gauge = constraint_residuals(model_state(m, float(t)))
            assert abs(ham) < 1e-9, (m.kind, t, "hamiltonian")
            assert mom < 1e-9, (m.kind, t, "momentum")
            assert abs(gauge) < 1e-9, (m.kind, t, "gauge")


def test_kasner_state_anisotropy_and_lapse():
    st = model_state(_zoo("Kasner"), 3.0)  # u = 1
    d = traceless_split(st.K, st.h)
    assert d.trace == pytest.approx(-1.0, rel=1e-14)
    assert hnorm_sq(d.traceless, st.h) == pytest.approx(2.0 / 3.0, rel=1e-12)
    assert st.L == pytest.approx(1.0 / 3.0, rel=1e-14)
    # t^2 |K0|^2 = 6 at every time
    for t in (1.0, 50.0, 1e4):
        s = model_state(_zoo("Kasner"), t)
        k0 = traceless_split(s.K, s.h).traceless
        assert t * t * hnorm_sq(k0, s.h) == pytest.approx(6.0, rel=1e-12)


def test_milne_state_is_isotropic_unit_lapse():
    for t in (1.0, 123.0):
        s = model_state(_zoo("Milne"), t)
        assert s.L == 1.0
        d = traceless_split(s.K, s.h)
        assert np.max(np.abs(d.traceless)) < 1e-14 * max(t, 1.0)
        assert d.trace == pytest.approx(-3.0 / t, rel=1e-14)


def test_curvature_laws_per_model():
    # flat members: |Rm|_T exactly 0; self-similar members: t^2 |Rm|_T constant
    for kind in ("Milne", "TaubFlat", "BianchiIIIFlat", "PseudoStaticTwisted"):
        y = [t * t * model_curvature_norm(_zoo(kind), float(t)) for t in TS]
        assert max(y) < 1e-10, kind
    y = np.array([t * t * model_curvature_norm(_zoo("Kasner"), float(t)) for t in TS])
    assert (y.max() - y.min()) / y.max() < 1e-10
    assert y[0] > 0.0


def test_taubnil_curvature_decays_onto_limit_kasner_plateau():
    m = _zoo("TaubNil")
    y = np.array([t * t * model_curvature_norm(m, float(t)) for t in TS])
    plateau = model_curvature_norm(ModelId("Kasner", p=m.p), 1.0)
    imax = int(np.argmax(y))
    assert imax <= len(y) // 5                      # transition bump sits early
    assert np.all(np.diff(y[imax:]) < 0.0)          # strict decay past the bump
    assert abs(y[-1] / plateau - 1.0) < 1e-3        # onto the Kasner plateau


def test_taubnil_shape_converges_to_limit_kasner():
    m = _zoo("TaubNil")
    kas = ModelId("Kasner", p=m.p)
    d = np.array([
        shape_distance(model_state(m, float(t)).h, model_state(kas, float(t)).h)
        for t in TS
    ])
    assert np.all(np.diff(d) < 0.0)
    assert d[-1] < 1e-3


def test_milne_volume_density_constant():
    dens = []
    for t in TS:
        s = model_state(_zoo("Milne"), float(t))
        dens.append((-s.hubble) ** 3 * s.vol)
    dens = np.array(dens)
    assert np.max(np.abs(dens / dens[0] - 1.0)) < 1e-12


def test_taubnil_reduces_to_kasner_at_b_equal_zero():
    p = (-0.25, (5 + np.sqrt(5)) / 8, (5 - np.sqrt(5)) / 8)
    tn = ModelId("TaubNil", p=p, b=0.0)
    kas = ModelId("Kasner", p=p)
    for t in (1.0, 10.0, 100.0):
        a, b = model_state(tn, t), model_state(kas, t)
        assert np.allclose(a.h, b.h, rtol=1e-10)
        assert np.allclose(a.K, b.K, rtol=1e-10)
        assert a.L == pytest.approx(b.L, rel=1e-10)


def test_model_trajectory_exact_dense_eval():
    traj = model_trajectory(_zoo("Kasner"), 1.0, 100.0, num=16)
    assert traj.eval(np.pi).t == pytest.approx(np.pi)
    assert np.allclose(traj.eval(np.pi).h, model_state(_zoo("Kasner"), np.pi).h)
    ts = traj.times
    assert np.all(np.diff(ts) > 0.0)


def test_model_kinds_cover_zoo():
    assert set(m.kind for m in default_zoo()) == set(MODEL_KINDS)


# ------------------------------------------------- invariant harness itself

def test_verify_zoo_all_pass():
    rows = verify_zoo()
    assert rows and all(ok for _, _, _, ok in rows)


def test_verify_zoo_fault_injection_is_caught():
    rows = verify_zoo(fault="flip-K-sign")
    failed = [(m, c) for m, c, _, ok in rows if not ok]
    # the corrupted gauge must be flagged for every model
    assert {m for m, c in failed if c == "gauge"} == set(MODEL_KINDS)


# ---------------------------------------------------- u-gauge reparametrize

def test_hubble_reparametrize_kasner_u_time():
    # Kasner in u-time: L = 1, H = -1/u; Hubble time must come out as t = 3u
    p = np.array([2 / 3, 2 / 3, -1 / 3])

    def h_of_u(u):
        return np.diag(u ** (2 * p))

    def K_of_u(u):
        return np.diag(-p * u ** (2 * p - 1))

    flow = UGaugeFlow(h_of_u=h_of_u, K_of_u=K_of_u, lapse_of_u=lambda u: 1.0,
                      frame=np.zeros((3, 3)), u_range=(0.1, 100.0))
    ts = np.geomspace(1.0, 100.0, 12)
    states = [hubble_reparametrize(flow, [t])[0] for t in ts]
    for t, s in zip(ts, states):
        assert s.t == pytest.approx(t, rel=1e-12)
        assert s.L == pytest.approx(1.0 / 3.0, rel=1e-8)
        assert np.allclose(s.h, h_of_u(t / 3.0), rtol=1e-12)


def test_hubble_reparametrize_milne_identity():
    def h_of_u(u):
        return u * u * np.eye(3)

    def K_of_u(u):
        return -u * np.eye(3)

    flow = UGaugeFlow(h_of_u=h_of_u, K_of_u=K_of_u, lapse_of_u=lambda u: 1.0,
                      frame=np.zeros((3, 3)), u_range=(0.5, 50.0))
    s = hubble_reparametrize(flow, [7.0])[0]
    assert s.L == pytest.approx(1.0, rel=1e-9)
    assert np.allclose(s.h, 49.0 * np.eye(3), rtol=1e-12)


def test_hubble_reparametrize_rejects_non_expanding():
    flow = UGaugeFlow(h_of_u=lambda u: np.eye(3), K_of_u=lambda u: np.eye(3),
                      lapse_of_u=lambda u: 1.0, frame=np.zeros((3, 3)),
                      u_range=(0.1, 10.0))
    with pytest.raises(DomainError):
        hubble_reparametrize(flow, [1.0])


def test_taubnil_time_strictly_increasing_lapse_in_unit_interval():
    m = ModelId("TaubNil", p=(0.5,) + kasner_family(0.5), b=1.0)
    ts = np.geomspace(1.0, 1e3, 24)
    Ls = []
    for t in ts:
        s = model_state(m, float(t))
        assert s.t == pytest.approx(t)
        assert 0.0 < s.L <= 1.0
        Ls.append(s.L)
    ham = [abs(constraint_residuals(model_state(m, float(t)))[0]) for t in ts]
    assert max(ham) < 1e-9
