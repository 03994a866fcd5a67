"""
Tests for the Dirichlet Green's function
"""
import numpy as np
import pytest

from couette.numerics.cheb import helmholtz_solve, inner, resolved_basis, sine_basis
from couette.numerics.elliptic import apply_greens, assemble_greens, delta_defect, green_kernel
from couette.utils.errors import ConfigError


def test_kernel_is_symmetric_and_vanishes_at_walls():
    y = np.linspace(-1.0, 1.0, 9)
    values = green_kernel(1.3, y[:, None], y[None, :])
    np.testing.assert_allclose(values, values.T, atol=1e-15)
    np.testing.assert_allclose(values[[0, -1], :], 0.0, atol=1e-15)
    assert np.all(values[1:-1, 1:-1] < 0.0)


def test_small_wavenumber_limit_is_continuous():
    y, yp = 0.2, -0.4
    limit = green_kernel(5e-5, y, yp)
    assert limit == pytest.approx(-(1 + yp) * (1 - y) / 2)
    assert green_kernel(2e-4, y, yp) == pytest.approx(limit, abs=1e-6)


def test_large_wavenumber_does_not_overflow():
    value = green_kernel(1e3, 0.1, 0.2)
    assert np.isfinite(value)
    assert value == pytest.approx(-np.exp(-100.0) / 2000.0, rel=1e-10)


def test_green_integral_matches_helmholtz_solve(grid64):
    G = assemble_greens(grid64, 2.0)
    f = sine_basis(grid64, 3)
    np.testing.assert_allclose(apply_greens(G, grid64, f, split=True), helmholtz_solve(grid64, 2.0, f), atol=1e-9)


def test_nodal_rule_is_less_accurate_than_split_rule(grid32):
    G = assemble_greens(grid32, 1.0)
    f = sine_basis(grid32, 1)
    exact = helmholtz_solve(grid32, 1.0, f)
    split_error = np.max(np.abs(apply_greens(G, grid32, f, split=True) - exact))
    nodal_error = np.max(np.abs(apply_greens(G, grid32, f) - exact))
    assert split_error < nodal_error


def test_laplacian_inverts_green_integral(grid64):
    G = assemble_greens(grid64, 0.7)
    assert delta_defect(G, grid64, resolved_basis(grid64, 12)) < 1e-6


@pytest.mark.parametrize("k", [0.0, np.nan])
def test_rejects_invalid_wavenumbers(grid32, k):
    with pytest.raises(ConfigError):
        assemble_greens(grid32, k)


def test_nodal_rule_is_self_adjoint(grid64):
    G = assemble_greens(grid64, 1.5)
    rng = np.random.default_rng(2)
    f = rng.standard_normal(grid64.size) + 1j * rng.standard_normal(grid64.size)
    g = rng.standard_normal(grid64.size) + 1j * rng.standard_normal(grid64.size)
    left = inner(grid64, g, apply_greens(G, grid64, f))
    right = inner(grid64, apply_greens(G, grid64, g), f)
    assert abs(left - right) <= 1e-10 * max(abs(left), 1.0)


def test_nodal_rule_vanishes_at_walls_and_on_zero_data(grid32):
    G = assemble_greens(grid32, 0.5)
    phi = apply_greens(G, grid32, np.cos(grid32.nodes))
    assert phi[0] == 0.0 and phi[-1] == 0.0
    assert not np.any(apply_greens(G, grid32, np.zeros(grid32.size)))
