"""
Chebyshev collocation toolkit for the channel cross-section [-1, 1]

Gauss-Lobatto nodes y_j = cos(pi j / n), dense differentiation matrices,
Clenshaw-Curtis weights and Dirichlet Helmholtz solves. All inner products
in the package go through the Clenshaw-Curtis weights.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from couette.utils.errors import ConfigError, NumericalFailure, ShapeMismatch

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ChebGrid:
    """Nodes, differentiation matrices and quadrature weights (read-only arrays)"""

    n: int
    nodes: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    qw: np.ndarray

    @property
    def size(self) -> int:
        return self.n + 1


def cheb_matrix(n: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Differentiation matrix on the n+1 Gauss-Lobatto nodes

    Off-diagonal entries from the standard formula, diagonal from the
    negative-sum trick so that constants are differentiated to zero.
    """
    s = np.arange(n + 1)
    x = np.cos(np.pi * s / n)
    c = np.ones(n + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** s
    dx = x[:, None] - x[None, :]
    d = np.outer(c, 1.0 / c) / (dx + np.eye(n + 1))
    np.fill_diagonal(d, 0.0)
    np.fill_diagonal(d, -d.sum(axis=1))
    return d, x


def clencurt(n: int) -> np.ndarray:
    """Clenshaw-Curtis weights on the n+1 Gauss-Lobatto nodes"""
    theta = np.pi * np.arange(n + 1) / n
    w = np.zeros(n + 1)
    interior = theta[1:-1]
    v = np.ones(n - 1)
    if n % 2 == 0:
        w[0] = w[-1] = 1.0 / (n**2 - 1)
        for k in range(1, n // 2):
            v -= 2.0 * np.cos(2 * k * interior) / (4 * k**2 - 1)
        v -= np.cos(n * interior) / (n**2 - 1)
    else:
        w[0] = w[-1] = 1.0 / n**2
        for k in range(1, (n - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * interior) / (4 * k**2 - 1)
    w[1:-1] = 2.0 * v / n
    return w


def build_grid(n: int, relaxed: bool = False) -> ChebGrid:
    """
    Build a Chebyshev-Gauss-Lobatto grid

    Args:
        n: Polynomial degree (node count minus one), even and >= 8
        relaxed: Allow any even n >= 2 (used for hand-checkable grids)
    """
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
        raise ConfigError(f"grid size must be an integer, got {n!r}")
    n = int(n)
    minimum = 2 if relaxed else 8
    if n < minimum or n % 2:
        raise ConfigError(f"grid size must be even and >= {minimum}, got {n}")

    d1, nodes = cheb_matrix(n)
    # Endpoints exactly ±1, midpoint exactly 0
    nodes[0], nodes[-1] = 1.0, -1.0
    nodes[n // 2] = 0.0
    d2 = d1 @ d1
    qw = clencurt(n)

    for array in (nodes, d1, d2, qw):
        array.flags.writeable = False

    logger.debug(f"Chebyshev grid built: n={n}")
    return ChebGrid(n=n, nodes=nodes, d1=d1, d2=d2, qw=qw)


def check_field(grid: ChebGrid, f: np.ndarray, name: str = "field") -> np.ndarray:
    """Return f as an array, raising ShapeMismatch unless it has n+1 entries"""
    arr = np.asarray(f)
    if arr.shape != (grid.size,):
        raise ShapeMismatch(f"{name} has shape {arr.shape}, expected ({grid.size},)")
    return arr


def differentiate(grid: ChebGrid, f: np.ndarray, order: int = 1) -> np.ndarray:
    """First or second y-derivative of nodal values"""
    f = check_field(grid, f)
    if order == 1:
        return grid.d1 @ f
    if order == 2:
        return grid.d2 @ f
    raise ConfigError(f"derivative order must be 1 or 2, got {order}")


def quad(grid: ChebGrid, f: np.ndarray):
    """Clenshaw-Curtis quadrature of nodal values over [-1, 1]"""
    f = check_field(grid, f)
    return grid.qw @ f


def inner(grid: ChebGrid, f: np.ndarray, g: np.ndarray) -> complex:
    """L2 inner product <f, g> = ∫ conj(f) g dy"""
    return complex(grid.qw @ (np.conj(f) * g))


def norm_sq(grid: ChebGrid, f: np.ndarray) -> float:
    """Squared L2 norm ‖f‖²"""
    return float(grid.qw @ (np.abs(f) ** 2))


def dirichlet_laplacian(grid: ChebGrid, k: float) -> np.ndarray:
    """Δ_k = ∂_y² - k² on all nodes, no boundary rows replaced"""
    return grid.d2 - (k * k) * np.eye(grid.size)


def helmholtz_matrix(grid: ChebGrid, k: float) -> np.ndarray:
    """Δ_k with the two boundary rows replaced by identity rows"""
    if not np.isfinite(k):
        raise ConfigError(f"wavenumber must be finite, got {k}")
    a = dirichlet_laplacian(grid, k)
    a[0, :] = 0.0
    a[-1, :] = 0.0
    a[0, 0] = 1.0
    a[-1, -1] = 1.0
    return a


def helmholtz_factor(grid: ChebGrid, k: float):
    """LU factorization of the Dirichlet Helmholtz matrix"""
    try:
        return linalg.lu_factor(helmholtz_matrix(grid, k), check_finite=True)
    except (linalg.LinAlgError, ValueError) as e:
        raise NumericalFailure(f"Helmholtz factorization failed at k={k}: {e}") from e


def dirichlet_rhs(omega: np.ndarray) -> np.ndarray:
    """Copy of omega with zero data on the boundary rows"""
    rhs = np.array(omega, dtype=np.result_type(omega, float))
    rhs[0] = 0.0
    rhs[-1] = 0.0
    return rhs


def helmholtz_solve(grid: ChebGrid, k: float, omega: np.ndarray, factor=None) -> np.ndarray:
    """
    Solve (∂_y² - k²) φ = ω with φ(±1) = 0

    Args:
        grid: Chebyshev grid
        k: Wavenumber (finite)
        omega: Right-hand side at the nodes
        factor: Optional cached result of helmholtz_factor for this k

    Returns:
        φ at the nodes, exactly zero at y = ±1
    """
    omega = check_field(grid, omega, "omega")
    rhs = dirichlet_rhs(omega)
    if factor is None:
        factor = helmholtz_factor(grid, k)
    phi = linalg.lu_solve(factor, rhs)
    if not np.all(np.isfinite(phi)):
        raise NumericalFailure(f"Helmholtz solve produced non-finite values at k={k}")
    phi[0] = 0.0
    phi[-1] = 0.0
    return phi


def barycentric_weights(n: int) -> np.ndarray:
    w = (-1.0) ** np.arange(n + 1)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def interp_matrix(grid: ChebGrid, z: np.ndarray) -> np.ndarray:
    """
    Barycentric interpolation matrix from the nodes to the points z

    Row q holds the Lagrange basis values at z_q, so interp_matrix(grid, z) @ f
    evaluates the degree-n interpolant of f.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    bw = barycentric_weights(grid.n)
    diff = z[:, None] - grid.nodes[None, :]
    exact = diff == 0.0
    diff[exact] = 1.0
    terms = bw[None, :] / diff
    mat = terms / terms.sum(axis=1, keepdims=True)
    rows, cols = np.nonzero(exact)
    if rows.size:
        mat[rows, :] = 0.0
        mat[rows, cols] = 1.0
    return mat


def sine_basis(grid: ChebGrid, p: int) -> np.ndarray:
    """sin(p π (y+1)/2) at the nodes, exactly zero at y = ±1"""
    f = np.sin(p * np.pi * (grid.nodes + 1.0) / 2.0)
    f[0] = 0.0
    f[-1] = 0.0
    return f


def resolved_basis(grid: ChebGrid, dim: int) -> np.ndarray:
    """
    Columns spanning the first dim sine modes, orthonormal in the quadrature inner product

    Sine modes vanish at the walls, so this is the subspace on which the
    discrete operators are consistent with their continuous counterparts.
    """
    if dim < 1 or dim > grid.n - 1:
        raise ConfigError(f"resolved dimension must lie in [1, {grid.n - 1}], got {dim}")
    sq = np.sqrt(grid.qw)
    basis = np.column_stack([sine_basis(grid, p) for p in range(1, dim + 1)])
    q, _ = np.linalg.qr(sq[:, None] * basis)
    return q / sq[:, None]
