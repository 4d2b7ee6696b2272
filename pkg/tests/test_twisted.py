"""Twisted static family: closed-form quadrature checks and rigidity."""

import numpy as np
import pytest

from flowlab import twisted
from flowlab.gowdy import theta_grid
from flowlab.tensors import DomainError

RS = np.geomspace(2.0, 20.0, 8)
SIGMA_SIN = lambda th: 0.3 * np.sin(th)  # noqa: E731


# ----------------------------------------------------------------- guards

def test_signature_and_parameter_guards():
    with pytest.raises(DomainError):
        twisted.pseudo_static_fields(-1.0, 1.0, 0.0, 5.0)
    with pytest.raises(DomainError):
        twisted.pseudo_static_fields(4.0, 3.0, 0.0, 5.0)   # R^2 = 25 <= C K^2 = 36
    with pytest.raises(DomainError):
        twisted.verify_pseudo_static(1.0, 1.0, 0.0, [5.0])  # need >= 2 radii
    with pytest.raises(DomainError):
        twisted.pseudo_static_fields(1.0, 1.0, np.zeros(7), 5.0, nth=8)


def test_positive_conformal_field_required():
    th = theta_grid(16)
    z = np.zeros(16)
    with pytest.raises(DomainError):
        twisted.TwistedFields(R=1.0, theta=th, U=z, U_R=z, A=z, A_R=z,
                              eta=z, a=np.zeros(16))


# ------------------------------------------------------------ twist constants

def test_twist_constants_vanish_without_bundle_curvature():
    th = theta_grid(32)
    z = np.zeros(32)
    f = twisted.TwistedFields(R=2.0, theta=th, U=0.1 * np.cos(th), U_R=z,
                              A=0.2 * np.sin(th), A_R=z, eta=z, a=np.ones(32))
    tc = twisted.twist_constants(f)
    assert tc.c1_max == 0.0 and tc.c2_mean == 0.0 and tc.c2_variation == 0.0


def test_pseudo_static_twist_constants_are_0_and_K():
    f = twisted.pseudo_static_fields(1.0, 1.0, SIGMA_SIN, 5.0)
    tc = twisted.twist_constants(f)
    assert tc.c1_max < 1e-14
    assert np.max(np.abs(tc.values[:, 1] - 1.0)) < 1e-12
    assert tc.c2_variation < 1e-12


def test_twist_constant_scales_homogeneously():
    # K carries length units: doubling (K, R) doubles C_2 and quadruples E_K
    a = twisted.verify_pseudo_static(1.0, 1.0, 0.0, RS)
    b = twisted.verify_pseudo_static(1.0, 2.0, 0.0, 2.0 * RS)
    fa = twisted.pseudo_static_fields(1.0, 1.0, 0.0, 5.0)
    fb = twisted.pseudo_static_fields(1.0, 2.0, 0.0, 10.0)
    assert twisted.twist_constants(fb).c2_mean == pytest.approx(
        2.0 * twisted.twist_constants(fa).c2_mean, rel=1e-12)
    assert b.detail["ek_mean"] == pytest.approx(4.0 * a.detail["ek_mean"], rel=1e-12)


# ------------------------------------------------------------- static family

def test_flat_degenerate_k0_case():
    f = twisted.pseudo_static_fields(1.0, 0.0, SIGMA_SIN, 5.0)
    assert max(twisted.reduced_equation_residuals(f).values()) == 0.0
    assert twisted.twisted_energy(f) == 0.0
    tc = twisted.twist_constants(f)
    assert tc.c1_max == 0.0 and abs(tc.c2_mean) == 0.0


@pytest.mark.parametrize("sigma", [0.0, SIGMA_SIN], ids=["sigma0", "sigma-sin"])
def test_pseudo_static_family_verifies(sigma):
    rep = twisted.verify_pseudo_static(1.0, 1.0, sigma, RS)
    assert rep.passed
    assert rep.max_vacuum_residual < 1e-8
    assert rep.ek_variation < 1e-8
    assert rep.twist_c1_max < 1e-9
    assert rep.twist_c2_residual < 1e-9


def test_energy_closed_form_on_family():
    # on the static family the dissipation density vanishes and
    # E_K = C K^2 oint e^{-sigma} dtheta, independent of R
    th = theta_grid(256)
    rep = twisted.verify_pseudo_static(1.0, 1.0, SIGMA_SIN, RS)
    expect = float(np.sum(np.exp(-SIGMA_SIN(th))) * 2.0 * np.pi / 256)
    assert rep.detail["ek_mean"] == pytest.approx(expect, rel=1e-12)
    rep0 = twisted.verify_pseudo_static(1.0, 1.0, 0.0, RS)
    assert rep0.detail["ek_mean"] == pytest.approx(2.0 * np.pi, rel=1e-12)


def test_rigidity_detects_off_family_data():
    # perturbing eta off the closed form must break E_K constancy
    def ek_at(R, eps):
        f = twisted.pseudo_static_fields(1.0, 1.0, 0.0, R)
        g = twisted.TwistedFields(
            R=f.R, theta=f.theta, U=f.U, U_R=f.U_R, A=f.A, A_R=f.A_R,
            eta=f.eta + eps * np.log(R), a=f.a, K=f.K,
            eta_R=f.eta_R, a_R=f.a_R, Hs=f.Hs, Hs_R=f.Hs_R)
        return twisted.twisted_energy(g)

    vals = np.array([ek_at(R, 0.05) for R in RS])
    assert np.max(np.abs(vals - np.mean(vals))) / np.mean(vals) > 1e-2


def test_holonomy_shift_leaves_energy_invariant():
    f = twisted.pseudo_static_fields(1.0, 1.0, SIGMA_SIN, 5.0)
    fs = f.shifted(0.37)
    assert twisted.twisted_energy(fs) == twisted.twisted_energy(f)
    assert np.array_equal(twisted.dissipation_density(fs),
                          twisted.dissipation_density(f))
