"""
Tests for the per-mode linear evolution, calibration inputs and the Kelvin oracles
"""
import math

import numpy as np
import pytest

from couette.numerics.cheb import build_grid, sine_basis
from couette.numerics.jop import assemble_j, operator_norm
from couette.numerics.weights import WeightSet
from couette.services.linear_service import (
    LYAPUNOV_SLACK,
    LinearStepper,
    calibrate_constants,
    channel_resolution,
    characteristics_oracle,
    default_dt,
    default_omega_hat,
    efold_time,
    enhanced_dissipation_check,
    enhanced_dissipation_scaling,
    evolve_linear,
    inviscid_damping_check,
    kelvin_exact,
    lyapunov_monitor,
    lyapunov_residuals,
    random_mode_data,
    step_linear,
)
from couette.utils.errors import BoundaryViolation, ConfigError


def test_default_step_resolves_the_phase():
    assert default_dt(1.0) == 0.01
    assert default_dt(100.0) == pytest.approx(0.002)
    assert default_dt(0.0) == 0.01


def test_inviscid_evolution_is_pure_phase_rotation(grid32):
    omega0 = sine_basis(grid32, 1).astype(complex)
    traj = evolve_linear(grid32, 1.0, 0.0, omega0, 0.1, dt=1e-4)
    final = traj.states[-1]
    np.testing.assert_allclose(np.abs(final), np.abs(omega0), atol=3e-8)
    np.testing.assert_allclose(final, omega0 * np.exp(-1j * grid32.nodes * 0.1), atol=1e-7)


def test_heat_decay_of_a_sine_mode(grid32):
    nu, t_end = 0.1, 1.0
    omega0 = sine_basis(grid32, 1).astype(complex)
    traj = evolve_linear(grid32, 0.0, nu, omega0, t_end, dt=0.01)
    expected = omega0 * math.exp(-nu * (math.pi / 2) ** 2 * t_end)
    np.testing.assert_allclose(traj.states[-1], expected, atol=1e-6)


def test_time_stepping_is_second_order(grid32):
    k, nu, t_end = 2.0, 1e-2, 1.0
    omega0 = sine_basis(grid32, 1).astype(complex)
    reference = evolve_linear(grid32, k, nu, omega0, t_end, dt=2e-4).states[-1]
    coarse = evolve_linear(grid32, k, nu, omega0, t_end, dt=4e-3).states[-1]
    fine = evolve_linear(grid32, k, nu, omega0, t_end, dt=2e-3).states[-1]
    ratio = np.max(np.abs(coarse - reference)) / np.max(np.abs(fine - reference))
    assert 3.2 < ratio < 4.8


def test_enstrophy_decays_under_viscosity(grid32):
    omega0 = random_mode_data(grid32, 1, seed=1)[0]
    traj = evolve_linear(grid32, 1.0, 1e-2, omega0, 2.0, dt=0.01, record_every=10)
    enstrophy = traj.enstrophy(grid32)
    assert np.all(np.diff(enstrophy) < 0.0)


def test_step_keeps_walls_at_zero(grid32):
    omega = random_mode_data(grid32, 1, seed=4)[0]
    new = step_linear(grid32, 1.5, 1e-3, omega, 0.01)
    assert new[0] == 0.0 and new[-1] == 0.0


def test_stepper_validation(grid32):
    with pytest.raises(ConfigError):
        LinearStepper(grid32, 1.0, 1e-3, 0.0)
    with pytest.raises(ConfigError):
        LinearStepper(grid32, 1.0, -1e-3, 0.01)
    with pytest.raises(BoundaryViolation):
        evolve_linear(grid32, 1.0, 1e-3, np.ones(grid32.size), 1.0)


def test_step_count_lands_on_t_end(grid32):
    omega0 = sine_basis(grid32, 2).astype(complex)
    traj = evolve_linear(grid32, 1.0, 1e-3, omega0, 0.95, dt=0.1)
    assert traj.times[-1] == pytest.approx(0.95)
    assert len(traj.times) == 11


def test_recorded_functionals(grid32):
    w = WeightSet(nu=1e-2)
    omega0 = random_mode_data(grid32, 1, seed=9)[0]
    traj = evolve_linear(grid32, 1.0, 1e-2, omega0, 1.0, dt=0.01, weights=w, record_every=10)
    assert traj.energies.shape == (11,)
    assert traj.dissipations.shape == (11, 5)
    assert np.all(traj.dissipations >= 0.0)
    assert np.all(traj.energies > 0.0)
    report = lyapunov_monitor(traj, w)
    assert report.residuals.shape == (9,)
    assert report.max_dissipation > 0.0


def test_lyapunov_monitor_needs_three_states(grid32):
    w = WeightSet(nu=1e-2)
    traj = evolve_linear(grid32, 1.0, 1e-2, sine_basis(grid32, 1), 0.0, weights=w)
    with pytest.raises(ConfigError):
        lyapunov_monitor(traj, w)


def test_lyapunov_residuals_of_exact_decay():
    times = np.linspace(0.0, 1.0, 1001)
    energies = np.exp(-times)
    residuals = lyapunov_residuals(times, energies, np.zeros_like(times), lam=1.0, c0=0.5)
    np.testing.assert_allclose(residuals, -0.5 * energies[1:-1], rtol=1e-6)


def test_random_data_is_reproducible_and_vanishes_at_walls(grid32):
    first = random_mode_data(grid32, 3, seed=7)
    second = random_mode_data(grid32, 3, seed=7)
    for a, b in zip(first, second):
        np.testing.assert_array_equal(a, b)
        assert a[0] == 0.0 and a[-1] == 0.0


def test_calibration_needs_ten_data(grid32):
    with pytest.raises(ConfigError):
        calibrate_constants(grid32, [1e-2], [1.0], random_mode_data(grid32, 9, seed=0))
    with pytest.raises(ConfigError):
        calibrate_constants(grid32, [], [1.0], random_mode_data(grid32, 10, seed=0))


@pytest.mark.parametrize("k, xi, t, nu", [(1.0, 0.5, 2.0, 1e-2), (0.3, -2.0, 7.0, 1e-3), (2.0, 1.0, 0.5, 1e-4)])
def test_closed_form_matches_characteristics(k, xi, t, nu):
    exact = complex(kelvin_exact(k, xi, t, nu, default_omega_hat))
    oracle = characteristics_oracle(k, xi, t, nu, default_omega_hat)
    assert abs(exact - oracle) <= 1e-10 * abs(exact)


def test_zero_wavenumber_is_pure_heat_decay():
    value = kelvin_exact(0.0, 2.0, 3.0, 1e-2, default_omega_hat)
    assert value == pytest.approx(default_omega_hat(0.0, 2.0) * math.exp(-1e-2 * 4.0 * 3.0))


def test_kelvin_rejects_non_finite_input():
    with pytest.raises(ConfigError):
        kelvin_exact(1.0, np.inf, 1.0, 1e-3, default_omega_hat)


def test_enhanced_dissipation_bound_holds():
    report = enhanced_dissipation_check((0.5, 1.0, 2.0), None, (1e-2, 1e-3), xi_points=101, time_points=51)
    assert report.passed
    assert 1.0 <= report.sup_ratio <= math.exp(4.0 / 3.0)
    assert report.bound == pytest.approx(math.exp(4.0 / 3.0))


def test_inviscid_damping_ratio_is_finite():
    report = inviscid_damping_check((0.5, 2.0), None, (1e-2,), xi_points=101, time_points=51)
    assert report.finite
    assert report.sup_ratio > 0.0


def test_efold_time_of_exponential():
    times = np.linspace(0.0, 10.0, 101)
    assert efold_time(times, np.exp(-times / 3.0), (1.0, 9.0)) == pytest.approx(3.0)
    with pytest.raises(ConfigError):
        efold_time(times, np.exp(-times), (20.0, 30.0))


def test_channel_resolution_is_even_and_grows():
    assert channel_resolution(1.0, 1e-3) == 64
    fine = channel_resolution(10.0, 1e-6)
    assert fine > 64 and fine % 2 == 0


def test_kelvin_closed_form_examples():
    k, xi = 0.7, -1.3
    assert complex(kelvin_exact(k, xi, 0.0, 1e-2, default_omega_hat)) == pytest.approx(default_omega_hat(k, xi))
    assert complex(kelvin_exact(k, xi, 4.0, 0.0, default_omega_hat)) == pytest.approx(
        default_omega_hat(k, xi + 4.0 * k), rel=1e-14
    )
    assert complex(kelvin_exact(1.0, 0.0, 1.0, 1.0, default_omega_hat)) == pytest.approx(
        default_omega_hat(1.0, 1.0) * math.exp(-4.0 / 3.0), rel=1e-13
    )


def test_kelvin_matches_characteristics_on_random_samples():
    rng = np.random.default_rng(17)
    for _ in range(100):
        k = float(rng.uniform(0.1, 2.0))
        xi = float(rng.uniform(-5.0, 5.0))
        t = float(rng.uniform(0.0, 10.0))
        nu = float(10.0 ** rng.uniform(-4.0, -2.0))
        exact = complex(kelvin_exact(k, xi, t, nu, default_omega_hat))
        oracle = characteristics_oracle(k, xi, t, nu, default_omega_hat)
        assert abs(exact - oracle) <= 1e-8 * abs(exact)


def test_enhanced_dissipation_ratio_at_time_zero_is_one():
    report = enhanced_dissipation_check((0.5, 1.0, 4.0), [0.0], (1e-2, 1e-4))
    assert report.sup_ratio == pytest.approx(1.0, abs=1e-15)


def test_enhanced_dissipation_worst_case_sits_at_the_bound():
    nu = 1e-3
    t = 2.0 / nu ** (1.0 / 3.0)
    report = enhanced_dissipation_check((1.0,), [t], (nu,))
    # e^{x - x³/12} peaks at x = 2; the k² t viscous term costs ν t
    assert report.sup_ratio == pytest.approx(math.exp(4.0 / 3.0 - nu * t), rel=1e-6)
    assert report.passed


def test_inviscid_damping_ratio_at_time_zero_is_one_half():
    report = inviscid_damping_check((1.0,), [0.0], (1e-3,))
    assert report.sup_ratio == pytest.approx(0.5, rel=1e-12)
    assert report.argmax[1] == 0.0


@pytest.mark.slow
def test_inviscid_damping_sup_is_stable_under_refinement():
    ks, nus = (0.5, 1.0, 2.0, 4.0), (1e-2, 1e-3)
    coarse = inviscid_damping_check(ks, None, nus, xi_points=401, time_points=201)
    fine = inviscid_damping_check(ks, None, nus, xi_points=801, time_points=401)
    assert abs(fine.sup_ratio - coarse.sup_ratio) < 0.05 * coarse.sup_ratio


def test_negative_cross_sign_raises_the_lyapunov_residual(grid32):
    omega0 = random_mode_data(grid32, 1, seed=21)[0]
    reports = []
    for sign in (1.0, -1.0):
        w = WeightSet(nu=1e-3, cross_sign=sign)
        traj = evolve_linear(grid32, 1.0, 1e-3, omega0, 1.0, dt=0.01, weights=w)
        reports.append(lyapunov_monitor(traj, w))
    dissipative, printed = reports
    assert np.all(printed.residuals > dissipative.residuals)
    assert printed.max_residual > dissipative.max_residual


@pytest.fixture(scope="module")
def calibration(grid32):
    data = random_mode_data(grid32, 10, seed=1)
    best = calibrate_constants(grid32, [1e-2], [1.0], data, t_end=2.0)
    return best, data


@pytest.mark.slow
def test_calibration_returns_feasible_constants(calibration, grid32):
    best, _ = calibration
    assert best.c == pytest.approx(best.c0 / 4.0)
    assert best.cross_sign in (1.0, -1.0)
    assert best.constants()["cross_sign"] == best.cross_sign
    c_j = operator_norm(assemble_j(grid32, 1.0), grid32)
    assert best.coercivity_margin(c_j) > 0.0


@pytest.mark.slow
def test_calibrated_constants_keep_the_lyapunov_residual_in_slack(calibration, grid32):
    best, data = calibration
    traj = evolve_linear(grid32, 1.0, 1e-2, data[0], 2.0, weights=best)
    report = lyapunov_monitor(traj, best)
    assert report.passed
    assert report.max_residual <= LYAPUNOV_SLACK * report.max_dissipation


def test_calibration_rejects_an_empty_sign_list(grid32):
    with pytest.raises(ConfigError):
        calibrate_constants(grid32, [1e-2], [1.0], random_mode_data(grid32, 10, seed=0), cross_signs=())


@pytest.mark.slow
def test_channel_efold_time_scales_like_the_enhanced_timescale():
    report = enhanced_dissipation_scaling([1.0], [1e-3, 1e-4], build_grid)
    assert abs(report.slopes[1.0] + 1.0 / 3.0) <= 0.25 / 3.0
    for value in report.normalized.values():
        assert np.isfinite(value) and value > 0.0
