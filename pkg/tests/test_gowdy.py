"""Areal-gauge 1+1 wave evolution: exact modes, conservation, equivariance."""

import numpy as np
import pytest

from flowlab import gowdy
from flowlab.functionals import (equivolume_momentum, gowdy_energy,
                                 gowdy_energy_hat, gowdy_energy_series)
from flowlab.tensors import DomainError

TWO_PI = 2.0 * np.pi


# ------------------------------------------------------------------ data/guards

def test_state_validation():
    with pytest.raises(DomainError):
        gowdy.GowdyState(R=-1.0, theta=gowdy.theta_grid(8), U=np.zeros(8),
                         U_R=np.zeros(8), eta=np.zeros(8))
    with pytest.raises(DomainError):
        gowdy.GowdyState(R=1.0, theta=gowdy.theta_grid(8), U=np.zeros(7),
                         U_R=np.zeros(8), eta=np.zeros(8))


def test_cfl_guard():
    st = gowdy.bessel_mode_data(1.0, 32)
    with pytest.raises(gowdy.StepError):
        gowdy.polarized_step(st, 10.0 * st.dth)
    with pytest.raises(gowdy.StepError):
        gowdy.evolve_polarized(st, 2.0, cfl=0.9)  # above the stability limit
    with pytest.raises(DomainError):
        gowdy.evolve_polarized(st, 0.5)           # R1 <= R0


def test_fiber_metric_det_exact_by_construction():
    th = gowdy.theta_grid(64)
    U = 0.3 * np.cos(th)
    A = 0.2 + 0.1 * np.sin(2 * th)
    G, _ = gowdy.fiber_metric_from_potentials(2.0, U, 0.1 * np.sin(th),
                                              A, 0.05 * np.cos(th))
    det = G[:, 0, 0] * G[:, 1, 1] - G[:, 0, 1] ** 2
    assert np.max(np.abs(det / 4.0 - 1.0)) < 1e-14


# ------------------------------------------------------------------ exact runs

def test_zero_data_is_static():
    st = gowdy.polarized_data(1.0, 32)
    traj = gowdy.evolve_polarized(st, 3.0, num_samples=4)
    sT = traj.samples[-1]
    assert np.max(np.abs(sT.U)) == 0.0
    assert np.max(np.abs(sT.eta)) == 0.0


def test_homogeneous_log_solution_and_energy_law():
    # theta-independent reduction: U = a + b ln R exactly; slice energy
    # E = 2 pi (4 b^2 + (2 - 2b)^2) / R^2 follows by direct substitution
    a, b = 0.2, 0.3
    st = gowdy.polarized_data(1.0, 32, mean=a, mean_R=b)
    traj = gowdy.evolve_polarized(st, 4.0, num_samples=6)
    c = 4 * b * b + (2 - 2 * b) ** 2
    for s in traj.samples:
        assert np.ptp(s.U) == 0.0                       # stays homogeneous
        assert s.U[0] == pytest.approx(a + b * np.log(s.R), abs=1e-6)
        assert gowdy_energy(s) == pytest.approx(TWO_PI * c / s.R ** 2, rel=1e-12)


def test_bessel_mode_tracks_exact_solution():
    st = gowdy.bessel_mode_data(1.0, 128, n=1, amp=0.5)
    traj = gowdy.evolve_polarized(st, 3.0, num_samples=5)
    sT = traj.samples[-1]
    exact = gowdy.bessel_mode_exact(sT.R, sT.theta, 1, 0.5)
    assert np.max(np.abs(sT.U - exact)) < 1e-7


def test_bessel_spatial_convergence_on_grid_doubling():
    def err(nth):
        st = gowdy.bessel_mode_data(1.0, nth, n=1, amp=0.5)
        traj = gowdy.evolve_polarized(st, 3.0, num_samples=5)
        sT = traj.samples[-1]
        return np.max(np.abs(sT.U - gowdy.bessel_mode_exact(sT.R, sT.theta, 1, 0.5)))

    e1, e2 = err(64), err(128)
    assert e1 / e2 >= 4.0, (e1, e2)


# ------------------------------------------------------------- energy/momentum

def test_energy_hat_equals_energy_in_areal_time():
    st = gowdy.bessel_mode_data(1.0, 64, n=1, amp=0.5)
    assert gowdy_energy_hat(st) == pytest.approx(gowdy_energy(st), rel=1e-13)


def test_polarized_energy_monotone_and_dissipation_identity():
    st = gowdy.bessel_mode_data(1.0, 128, n=1, amp=0.5)
    traj = gowdy.evolve_polarized(st, 3.0, num_samples=20)
    ser = gowdy_energy_series(traj)
    assert np.all(np.diff(ser.values) <= 1e-8)
    assert np.max(ser.residuals) < 1e-4


def test_equivolume_momentum_closed_form():
    # areal gauge fixes Tr(G^{-1} G_R) = 2/R pointwise, so the equivolume
    # quantity is exactly 4 pi / R at every sample
    st = gowdy.bessel_mode_data(1.0, 128, n=1, amp=0.5)
    traj = gowdy.evolve_polarized(st, 3.0, num_samples=10)
    em = equivolume_momentum(traj)
    assert np.max(np.abs(em.values - 2.0 * TWO_PI / em.times)) < 1e-8
    assert np.all(np.diff(em.values) <= 1e-12)          # nonincreasing


def test_period_residual_detects_nonperiodic_momentum():
    ok = gowdy.bessel_mode_data(1.0, 64, n=1, amp=0.5)  # U_R ~ cos, U_th ~ sin
    assert ok.momentum_period_residual() < 1e-12
    bad = gowdy.polarized_data(1.0, 64, cos=(0.3,), sin_R=(0.2,))
    assert bad.momentum_period_residual() > 0.1
    traj = gowdy.evolve_polarized(ok, 2.0, num_samples=4)
    assert traj.stats["max_period_residual"] < 1e-8


# ---------------------------------------------------------------- equivariance

def test_theta_shift_equivariance_is_exact():
    st = gowdy.bessel_mode_data(1.0, 64, n=1, amp=0.5)
    roll = 7
    st_r = gowdy.GowdyState(R=st.R, theta=st.theta, U=np.roll(st.U, roll),
                            U_R=np.roll(st.U_R, roll), eta=np.roll(st.eta, roll))
    a = gowdy.evolve_polarized(st, 2.0, num_samples=3).samples[-1]
    b = gowdy.evolve_polarized(st_r, 2.0, num_samples=3).samples[-1]
    assert np.array_equal(np.roll(a.U, roll), b.U)
    assert np.array_equal(np.roll(a.eta, roll), b.eta)


def test_rotation_equivariance_of_matrix_flow():
    th = gowdy.theta_grid(64)
    smf = gowdy.unpolarized_data(1.0, 64, 0.1 * np.cos(th), 0.05 * np.sin(th),
                                 0.2 + 0.1 * np.sin(th), 0.03 * np.cos(th))
    ang = 0.7
    Q = np.array([[np.cos(ang), -np.sin(ang)], [np.sin(ang), np.cos(ang)]])
    smf_c = gowdy.SymmetryMatrixField(
        R=smf.R, theta=th,
        G=np.einsum("ij,njk,lk->nil", Q, smf.G, Q),
        G_R=np.einsum("ij,njk,lk->nil", Q, smf.G_R, Q),
    )
    a = gowdy.evolve_unpolarized(smf, 2.0, num_samples=3).samples[-1]
    b = gowdy.evolve_unpolarized(smf_c, 2.0, num_samples=3).samples[-1]
    assert np.max(np.abs(np.einsum("ij,njk,lk->nil", Q, a.G, Q) - b.G)) < 1e-12
    assert gowdy_energy(a) == pytest.approx(gowdy_energy(b), rel=1e-12)


# -------------------------------------------------------------- consistency

def test_single_step_diagonal_consistency():
    # one matrix step on diagonal data must agree with the scalar step
    st = gowdy.bessel_mode_data(1.0, 256, n=1, amp=0.5)
    dR = 0.4 * st.dth
    sp = gowdy.polarized_step(st, dR)
    su = gowdy.unpolarized_step(st.to_matrix_field(), dR)
    assert np.max(np.abs(0.5 * np.log(su.G[:, 0, 0]) - sp.U)) < 1e-10
    assert np.max(np.abs(su.G[:, 0, 1])) < 1e-14


def test_unpolarized_det_conservation_kasner_type():
    # off-diagonally perturbed Kasner-type data: det G = R^2 within 1e-9
    th = gowdy.theta_grid(256)
    smf = gowdy.unpolarized_data(1.0, 256, np.zeros(256), 0.25 * np.ones(256),
                                 0.01 * np.sin(th), 0.005 * np.cos(th))
    traj = gowdy.evolve_unpolarized(smf, 3.0, num_samples=5)
    assert traj.stats["max_det_drift"] < 1e-9


def test_unpolarized_energy_monotone():
    th = gowdy.theta_grid(128)
    smf = gowdy.unpolarized_data(1.0, 128, 0.3 * np.cos(th), -0.1 * np.cos(th),
                                 0.05 * np.sin(th), 0.02 * np.cos(th))
    traj = gowdy.evolve_unpolarized(smf, 3.0, num_samples=16)
    ser = gowdy_energy_series(traj)
    assert np.all(np.diff(ser.values) <= 1e-8)
    assert np.max(ser.residuals) < 1e-3
