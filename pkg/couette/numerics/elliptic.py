"""
Dirichlet Green's function of Δ_k = ∂_y² - k² on [-1, 1]

G_k(y, y') = -sinh(k(1 + a)) sinh(k(1 - b)) / (k sinh 2k),  a = min(y, y'), b = max(y, y')
"""
import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from couette.numerics.cheb import ChebGrid, check_field, interp_matrix
from couette.utils.errors import ConfigError

logger = logging.getLogger(__name__)

# Below this |k| the analytic k -> 0 limit replaces the sinh ratio
SMALL_K = 1e-4


@dataclass(frozen=True, eq=False)
class GreensMatrix:
    """
    Green's function of one wavenumber on a grid

    values holds G(y_i, y_j); kernel is the split-interval quadrature
    operator, kernel @ f ≈ ∫ G(y_i, y') f(y') dy' for the interpolant of f.
    """

    k: float
    values: np.ndarray
    kernel: np.ndarray


def green_kernel(k: float, y, yp) -> np.ndarray:
    """
    Evaluate G_k(y, y') with broadcasting

    The sinh ratio is rewritten with exponentials of non-positive arguments,
    so large |k| never overflows and |k| < SMALL_K uses the limit
    -(1 + a)(1 - b)/2.
    """
    y = np.asarray(y, dtype=float)
    yp = np.asarray(yp, dtype=float)
    a = np.minimum(y, yp)
    b = np.maximum(y, yp)
    s = abs(float(k))
    if s < SMALL_K:
        return -(1.0 + a) * (1.0 - b) / 2.0
    num = np.exp(s * (a - b)) * (-np.expm1(-2.0 * s * (1.0 + a))) * (-np.expm1(-2.0 * s * (1.0 - b)))
    return -num / (2.0 * s * (-np.expm1(-4.0 * s)))


def _validate_k(k: float) -> float:
    k = float(k)
    if not np.isfinite(k):
        raise ConfigError(f"wavenumber must be finite, got {k}")
    if k == 0.0:
        raise ConfigError("wavenumber k = 0 is not allowed; small |k| uses the analytic limit automatically")
    return k


@lru_cache(maxsize=8)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(order)


def panel_rule(lo: float, hi: float, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre points and weights on [lo, hi]"""
    x, w = gauss_legendre(order)
    half = 0.5 * (hi - lo)
    return half * x + 0.5 * (hi + lo), half * w


def panel_order(grid: ChebGrid) -> int:
    return max(32, grid.n)


def split_panels(grid: ChebGrid, i: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Quadrature points on [-1, y_i] and [y_i, 1] for interior node i

    Points never coincide with y_i, so kernels with a kink or a singularity
    at y' = y_i are integrated on each smooth side separately.
    """
    yi = grid.nodes[i]
    order = panel_order(grid)
    zl, wl = panel_rule(-1.0, yi, order)
    zr, wr = panel_rule(yi, 1.0, order)
    return np.concatenate([zl, zr]), np.concatenate([wl, wr])


def assemble_greens(grid: ChebGrid, k: float) -> GreensMatrix:
    """Nodal values of G_k and the split-interval integration operator"""
    k = _validate_k(k)
    y = grid.nodes
    values = green_kernel(k, y[:, None], y[None, :])
    kernel = np.zeros_like(values)
    for i in range(1, grid.n):
        z, wz = split_panels(grid, i)
        g = green_kernel(k, y[i], z)
        kernel[i] = (wz * g) @ interp_matrix(grid, z)

    values.flags.writeable = False
    kernel.flags.writeable = False
    return GreensMatrix(k=k, values=values, kernel=kernel)


def apply_greens(G: GreensMatrix, grid: ChebGrid, f: np.ndarray, split: bool = False) -> np.ndarray:
    """
    φ(y_i) = Σ_j qw_j G(y_i, y_j) f(y_j), the nodal rule for ∫ G(y_i, y') f(y') dy'

    Args:
        G: Assembled Green's function
        grid: Grid it was assembled on
        f: Right-hand side at the nodes
        split: Integrate the interpolant of f on both sides of the kink
            instead; spectrally accurate but no longer symmetric in qw
    """
    f = check_field(grid, f)
    if G.values.shape != (grid.size, grid.size):
        raise ConfigError(f"Green's matrix of shape {G.values.shape} does not match grid n={grid.n}")
    if split:
        return G.kernel @ f
    return G.values @ (grid.qw * f)


def delta_defect(G: GreensMatrix, grid: ChebGrid, basis: np.ndarray) -> float:
    """
    Max deviation of Δ_k applied to the Green's integral from the identity

    Measured on the interior rows for the columns of basis (boundary-vanishing
    resolved functions).
    """
    lap = grid.d2 - (G.k**2) * np.eye(grid.size)
    recovered = lap @ (G.kernel @ basis)
    return float(np.max(np.abs(recovered[1:-1] - basis[1:-1])))
