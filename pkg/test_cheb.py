"""
Tests for the Chebyshev collocation toolkit
"""
import numpy as np
import pytest

from couette.numerics.cheb import (
    build_grid,
    check_field,
    differentiate,
    helmholtz_solve,
    interp_matrix,
    quad,
    resolved_basis,
    sine_basis,
)
from couette.utils.errors import ConfigError, ShapeMismatch


def test_three_point_grid_by_hand():
    grid = build_grid(2, relaxed=True)
    np.testing.assert_array_equal(grid.nodes, [1.0, 0.0, -1.0])
    np.testing.assert_allclose(grid.qw, [1 / 3, 4 / 3, 1 / 3], rtol=1e-14)
    np.testing.assert_allclose(differentiate(grid, grid.nodes**2), 2.0 * grid.nodes, atol=1e-14)


def test_endpoints_and_midpoint_are_exact(grid32):
    assert grid32.nodes[0] == 1.0
    assert grid32.nodes[-1] == -1.0
    assert grid32.nodes[16] == 0.0
    assert grid32.size == 33


@pytest.mark.parametrize("n", [7, 6, 0])
def test_rejects_odd_or_small_grids(n):
    with pytest.raises(ConfigError):
        build_grid(n)


def test_grid_arrays_are_read_only(grid32):
    with pytest.raises(ValueError):
        grid32.d1[0, 0] = 1.0


def test_polynomials_are_differentiated_exactly(grid32):
    y = grid32.nodes
    np.testing.assert_allclose(differentiate(grid32, y**5), 5 * y**4, atol=1e-11)
    np.testing.assert_allclose(differentiate(grid32, y**5, order=2), 20 * y**3, atol=1e-9)
    with pytest.raises(ConfigError):
        differentiate(grid32, y, order=3)


def test_clenshaw_curtis_integrates_smooth_functions(grid32):
    y = grid32.nodes
    assert quad(grid32, np.ones_like(y)) == pytest.approx(2.0, rel=1e-14)
    assert quad(grid32, y**2) == pytest.approx(2.0 / 3.0, rel=1e-13)
    assert quad(grid32, np.exp(y)) == pytest.approx(np.e - 1.0 / np.e, rel=1e-13)


def test_field_shape_is_checked(grid32):
    with pytest.raises(ShapeMismatch):
        check_field(grid32, np.zeros(10))


@pytest.mark.parametrize("k", [0.0, 0.5, 3.0, 40.0])
def test_helmholtz_recovers_sine_mode(grid64, k):
    phi = sine_basis(grid64, 2)
    omega = -((np.pi) ** 2 + k * k) * phi
    solved = helmholtz_solve(grid64, k, omega)
    np.testing.assert_allclose(solved, phi, atol=1e-9)
    assert solved[0] == 0.0 and solved[-1] == 0.0


def test_helmholtz_rejects_non_finite_wavenumber(grid32):
    with pytest.raises(ConfigError):
        helmholtz_solve(grid32, np.inf, np.zeros(grid32.size))


def test_interpolation_reproduces_nodes_and_polynomials(grid32):
    y = grid32.nodes
    np.testing.assert_allclose(interp_matrix(grid32, y), np.eye(grid32.size), atol=1e-14)
    z = np.array([0.3, -0.71, 0.999])
    np.testing.assert_allclose(interp_matrix(grid32, z) @ y**3, z**3, atol=1e-13)


def test_resolved_basis_is_orthonormal(grid64):
    basis = resolved_basis(grid64, 12)
    gram = basis.T @ (grid64.qw[:, None] * basis)
    np.testing.assert_allclose(gram, np.eye(12), atol=1e-12)
    np.testing.assert_allclose(basis[[0, -1]], 0.0, atol=1e-14)
    with pytest.raises(ConfigError):
        resolved_basis(grid64, 64)
