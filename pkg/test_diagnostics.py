"""
Tests for the global functionals, the inequality harness and the run monitors
"""
import math
from dataclasses import replace

import numpy as np
import pytest

from couette.numerics.cheb import sine_basis
from couette.numerics.weights import WeightSet
from couette.services.diagnostics_service import (
    GROWTH_LIMIT,
    INEQUALITIES,
    REPORT_COLUMNS,
    EnergyHistory,
    EnergyReport,
    RatioStats,
    Sample,
    bootstrap_monitor,
    budget_closure,
    compare_refinement,
    gagliardo_nirenberg_ratio,
    global_energy,
    inequality_harness,
    lx_sensitivity,
    mode_factor,
)
from couette.services.flow_service import NonlinearSolver, PerturbationConfig, init_perturbation, zero_state
from couette.utils.errors import ConfigError

NU = 1e-3
LX = 60.0
K = 4


@pytest.fixture(scope="module")
def weights():
    return WeightSet(nu=NU)


def perturbation(grid, amplitude=0.01, seed=0):
    return init_perturbation(grid, LX, K, NU, PerturbationConfig(amplitude=amplitude, seed=seed, j_max=K, p_max=3))


def report(t, e_total, e=1.0):
    return EnergyReport(
        t=t,
        E_global=e,
        D_global=0.0,
        D_parts=(0.0,) * 5,
        n_parts=(0.0,) * 3,
        E_total=e_total,
        theorem_norm=0.0,
        D4_time_integral=0.0,
    )


def test_sine_profile_ratio(grid64):
    ratio = gagliardo_nirenberg_ratio(grid64, 1.0, sine_basis(grid64, 1))
    assert ratio == pytest.approx(1.0 / math.sqrt(1.0 + (math.pi / 2) ** 2), rel=1e-8)
    assert ratio == pytest.approx(0.537, abs=1e-3)


def test_mode_factor_at_time_zero(weights):
    assert mode_factor(1.0, 0.0, weights, 0.1) == pytest.approx(0.1 * 4.0 * 2.0**0.08)


def test_zero_state_has_zero_energy(grid32, cache32, weights):
    functionals = global_energy(grid32, zero_state(grid32, LX, K, NU), weights, cache32)
    assert functionals.energy == 0.0
    assert functionals.dissipation == 0.0


def test_global_energy_is_quadratic(grid32, cache32, weights):
    state = perturbation(grid32)
    single = global_energy(grid32, state, weights, cache32)
    double = global_energy(grid32, state.scaled(2.0), weights, cache32)
    assert single.energy > 0.0
    assert double.energy == pytest.approx(4.0 * single.energy, rel=1e-12)
    assert double.dissipation == pytest.approx(4.0 * single.dissipation, rel=1e-12)


def test_history_accumulates_the_total_energy(grid32, cache32, weights):
    history = EnergyHistory(grid32, weights, cache32)
    state = perturbation(grid32)
    solver = NonlinearSolver(grid32, LX, K, NU, 0.01)
    first = history.record(state)
    for _ in range(3):
        state = solver.step(state)
    second = history.record(state)
    assert len(history) == 2
    assert first.E_total == pytest.approx(first.E_global)
    assert second.E_total >= max(first.E_global, second.E_global)
    assert second.D4_time_integral > 0.0
    assert len(second.row()) == len(REPORT_COLUMNS)


def test_budget_closes_at_small_steps(grid32, cache32, weights):
    closure = budget_closure(grid32, perturbation(grid32, amplitude=0.05), weights, cache32, 1e-4)
    assert closure.max_dissipation > 0.0
    assert closure.defect < 0.05


def test_harness_reports_every_inequality(grid32, weights):
    samples = [Sample(grid=grid32, state=perturbation(grid32, seed=s)) for s in range(3)]
    stats = inequality_harness(samples, weights)
    assert set(stats) == set(INEQUALITIES)
    for name, entry in stats.items():
        assert math.isfinite(entry.max), name
        assert entry.median <= entry.max
    assert stats["gagliardo_nirenberg"].count == 3
    assert stats["gagliardo_nirenberg"].max <= 1.0


def test_harness_needs_samples(weights):
    with pytest.raises(ConfigError):
        inequality_harness([], weights)


def test_refinement_verdicts():
    coarse = {"a": RatioStats(max=1.0, median=0.5, count=4), "b": RatioStats(max=1.0, median=0.5, count=4)}
    fine = {"a": RatioStats(max=1.1, median=0.5, count=4), "b": RatioStats(max=2.0, median=0.5, count=4)}
    verdicts = compare_refinement(coarse, fine)
    assert verdicts["a"].bounded
    assert verdicts["a"].change == pytest.approx(0.1)
    assert not verdicts["b"].bounded


def test_bootstrap_on_a_stable_history():
    verdict = bootstrap_monitor([report(0.0, 1.0), report(1.0, 1.5), report(2.0, 2.0)], NU, 0.01)
    assert verdict.stable
    assert verdict.growth_ratio == pytest.approx(2.0)
    expected = max(e / (1.0 + NU**-0.5 * e**1.5) for e in (1.0, 1.5, 2.0))
    assert verdict.c1 == pytest.approx(expected)
    assert verdict.level == pytest.approx(2.0 / (0.01 * NU))


def test_bootstrap_flags_growth():
    verdict = bootstrap_monitor([report(0.0, 1.0), report(1.0, 2.0 * GROWTH_LIMIT)], NU, 0.01)
    assert not verdict.stable
    with pytest.raises(ConfigError):
        bootstrap_monitor([], NU, 0.01)


def test_box_length_sensitivity():
    result = lx_sensitivity({50.0: (1.0, 1.0), 100.0: (1.05, 1.0)})
    assert result.drift == pytest.approx(0.05)
    assert result.stable
    assert list(result.constants) == [50.0, 100.0]
    assert not lx_sensitivity({50.0: (1.0, 1.0), 100.0: (2.0, 1.0)}).stable
    with pytest.raises(ConfigError):
        lx_sensitivity({50.0: (1.0, 0.0)})


def test_energy_rejects_mismatched_grid(grid32, grid64, cache32, weights):
    with pytest.raises(ConfigError):
        global_energy(grid64, perturbation(grid32), weights, cache32)


def test_energy_history_without_nonlinear_terms(grid32, cache32, weights):
    history = EnergyHistory(grid32, weights, cache32, with_nonlinear=False)
    assert history.record(perturbation(grid32)).n_parts == (0.0, 0.0, 0.0)
    assert np.isfinite(history.reports[0].theorem_norm)


def test_printed_bounds_are_reported_alongside_the_homogeneous_ones(grid32, weights):
    state = perturbation(grid32, seed=4)
    stats = inequality_harness([Sample(grid=grid32, state=state)], weights)
    scaled = inequality_harness([Sample(grid=grid32, state=replace(state, modes=4.0 * state.modes))], weights)
    for name in ("gradient_bound", "cross_bound"):
        # small data: D4, D5 < 1, so the quarter powers give the larger right-hand side
        assert stats[f"{name}_printed"].max <= stats[name].max
        assert scaled[name].max == pytest.approx(stats[name].max, rel=1e-6)
