"""
The singular integral operator

    J_k[f](y) = (k / 2i) p.v. ∫ G_k(y, y') f(y') / (y - y') dy'

assembled as a dense matrix on the Chebyshev nodes, plus the measurements
used to check its boundedness, its commutator with ∂_y and its
self-adjointness.

The principal-value quadrature gives a real matrix R whose continuous
counterpart is skew in L². R is compressed onto polynomials of degree
<= n/2 vanishing at the walls and the skew part of the compression is
kept, so the assembled operator is self-adjoint in the quadrature inner
product up to rounding. How far R itself is from skew is reported as
quadrature_defect.
"""
import logging
import threading
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev
from scipy import linalg

from couette.numerics.cheb import ChebGrid, check_field, interp_matrix, resolved_basis
from couette.numerics.elliptic import green_kernel, split_panels
from couette.utils.errors import ConfigError, MissingOperator

logger = logging.getLogger(__name__)

MIN_GRID = 32
# Sine modes used for the resolved-subspace measurements
RESOLVED_MODES = 12


@dataclass(frozen=True, eq=False)
class SingularOperator:
    k: float
    mat: np.ndarray
    quadrature_defect: float = 0.0  # relative skew defect of the raw p.v. matrix


def _validate_k(k: float) -> float:
    k = float(k)
    if not np.isfinite(k):
        raise ConfigError(f"wavenumber must be finite, got {k}")
    if k == 0.0:
        raise ConfigError("singular operator is undefined at k = 0")
    return k


def _check_grid(grid: ChebGrid) -> None:
    if grid.n < MIN_GRID:
        raise ConfigError(f"n must be >= {MIN_GRID} for operator work, got {grid.n}")


def pv_matrix(grid: ChebGrid, k: float) -> np.ndarray:
    """
    Real principal-value matrix R with (R f)_i = p.v. ∫ G(y_i, y') f(y') / (y_i - y') dy'

    Singularity subtraction:
        ∫ [G(y_i, y') f(y') - G_ii f_i] / (y_i - y') dy' + G_ii f_i ln((1 + y_i)/(1 - y_i))
    The regular integral runs over Gauss-Legendre panels on each side of
    y_i applied to the interpolant of f. Wall rows are zero since G
    vanishes there.
    """
    k = _validate_k(k)
    _check_grid(grid)
    y = grid.nodes
    rows = np.zeros((grid.size, grid.size))
    for i in range(1, grid.n):
        yi = y[i]
        z, wz = split_panels(grid, i)
        g = green_kernel(k, yi, z)
        gii = float(green_kernel(k, yi, yi))
        q = wz / (yi - z)
        rows[i] = (q * g) @ interp_matrix(grid, z)
        rows[i, i] += gii * (np.log((1.0 + yi) / (1.0 - yi)) - q.sum())
    return rows


def compression_basis(grid: ChebGrid) -> np.ndarray:
    """(1 - y²) T_j(y), j < n/2, orthonormal in the quadrature inner product"""
    y = grid.nodes
    vander = chebyshev.chebvander(y, grid.n // 2 - 1) * (1.0 - y * y)[:, None]
    sq = np.sqrt(grid.qw)
    q, _ = linalg.qr(sq[:, None] * vander, mode="economic")
    basis = q / sq[:, None]
    basis[[0, -1]] = 0.0
    return basis


def skew_defect(grid: ChebGrid, raw: np.ndarray, dim: int | None = None) -> float:
    """‖sym part‖ / ‖compression‖ of a real matrix on the resolved sine modes"""
    basis = resolved_basis(grid, _resolved_dim(grid, dim))
    compressed = basis.T @ (grid.qw[:, None] * raw) @ basis
    scale = float(linalg.svdvals(compressed)[0])
    if scale == 0.0:
        return 0.0
    return float(linalg.svdvals(compressed + compressed.T)[0]) / (2.0 * scale)


def assemble_j(grid: ChebGrid, k: float) -> SingularOperator:
    """Assemble J_k; the result is purely imaginary, odd in k and self-adjoint"""
    k = _validate_k(k)
    _check_grid(grid)
    raw = pv_matrix(grid, k)
    basis = compression_basis(grid)
    compressed = basis.T @ (grid.qw[:, None] * raw) @ basis
    skew = 0.5 * (compressed - compressed.T)
    mat = (-0.5j * k) * (basis @ skew @ (basis.T * grid.qw[None, :]))
    mat.flags.writeable = False
    return SingularOperator(k=k, mat=mat, quadrature_defect=skew_defect(grid, raw))


def apply_j(J: SingularOperator, grid: ChebGrid, f: np.ndarray) -> np.ndarray:
    f = check_field(grid, f)
    _check_shape(J, grid)
    return J.mat @ f


def quadratic_form(J: SingularOperator, grid: ChebGrid, f: np.ndarray, g: np.ndarray | None = None) -> complex:
    """<f, J g> in the quadrature inner product (g defaults to f)"""
    f = check_field(grid, f)
    g = f if g is None else g
    return complex(grid.qw @ (np.conj(f) * apply_j(J, grid, g)))


def _weighted(grid: ChebGrid, mat: np.ndarray) -> np.ndarray:
    sq = np.sqrt(grid.qw)
    return sq[:, None] * mat / sq[None, :]


def _resolved_dim(grid: ChebGrid, dim: int | None) -> int:
    if dim is None:
        dim = RESOLVED_MODES
    return max(1, min(dim, grid.n // 4))


def _check_shape(J: SingularOperator, grid: ChebGrid) -> None:
    if J.mat.shape != (grid.size, grid.size):
        raise ConfigError(f"operator of shape {J.mat.shape} does not match grid n={grid.n}")


def weighted_norm(grid: ChebGrid, mat: np.ndarray, dim: int | None = None, full: bool = False) -> float:
    """
    L2 -> L2 norm of a nodal matrix in the quadrature inner product

    full=True measures on every nodal vector (largest singular value of
    W^{1/2} mat W^{-1/2}); otherwise on the resolved sine subspace.
    """
    if full:
        return float(linalg.svdvals(_weighted(grid, mat))[0])
    basis = resolved_basis(grid, _resolved_dim(grid, dim))
    sq = np.sqrt(grid.qw)
    return float(linalg.svdvals(sq[:, None] * (mat @ basis))[0])


def operator_norm(J: SingularOperator, grid: ChebGrid, dim: int | None = None, full: bool = True) -> float:
    """Largest singular value of W^{1/2} J W^{-1/2} (or its resolved restriction)"""
    _check_shape(J, grid)
    if not np.any(J.mat):
        return 0.0
    return weighted_norm(grid, J.mat, dim=dim, full=full)


def commutator_norm(J: SingularOperator, grid: ChebGrid, dim: int | None = None) -> float:
    """
    ‖[∂_y, J_k]‖ / |k| between resolved sine modes

    For f, g vanishing at the walls <g, [∂_y, J] f> = -<∂_y g, J f> - <g, J ∂_y f>,
    so the derivative only ever acts on the smooth basis.
    """
    _check_shape(J, grid)
    if not np.any(J.mat):
        return 0.0
    basis = resolved_basis(grid, _resolved_dim(grid, dim))
    dbasis = grid.d1 @ basis
    w_mat = grid.qw[:, None] * J.mat
    comm = -(dbasis.conj().T @ w_mat @ basis) - basis.conj().T @ w_mat @ dbasis
    return float(linalg.svdvals(comm)[0]) / abs(J.k)


def interior_commutator_norm(J: SingularOperator, grid: ChebGrid) -> float:
    """Weighted norm of d1·mat - mat·d1 on interior nodes, divided by |k|"""
    _check_shape(J, grid)
    if not np.any(J.mat):
        return 0.0
    inner_nodes = slice(1, -1)
    comm = (grid.d1 @ J.mat - J.mat @ grid.d1)[inner_nodes, inner_nodes]
    sq = np.sqrt(grid.qw[inner_nodes])
    return float(linalg.svdvals(sq[:, None] * comm / sq[None, :])[0]) / abs(J.k)


@dataclass(frozen=True)
class AdjointDefect:
    form: float  # weighted norm of mat - W^{-1} mat^H W
    real_part: float  # max |Re J_ij|

    @property
    def value(self) -> float:
        return max(self.form, self.real_part)


def adjoint_defect_parts(J: SingularOperator, grid: ChebGrid) -> AdjointDefect:
    _check_shape(J, grid)
    if not J.mat.size:
        return AdjointDefect(form=0.0, real_part=0.0)
    adjoint = (J.mat.conj().T * grid.qw[None, :]) / grid.qw[:, None]
    form = weighted_norm(grid, J.mat - adjoint, full=True)
    real_part = float(np.max(np.abs(J.mat.real)))
    return AdjointDefect(form=form, real_part=real_part)


def adjoint_defect(J: SingularOperator, grid: ChebGrid) -> float:
    """Larger of the weighted self-adjointness defect and the largest real entry"""
    return adjoint_defect_parts(J, grid).value


class OperatorCache:
    """
    Lazily assembled singular operators keyed by wavenumber

    J_{-k} is produced from J_k by negation. With autofill=False a missing
    entry raises MissingOperator instead of being assembled.
    """

    def __init__(self, grid: ChebGrid, autofill: bool = True):
        self.grid = grid
        self.autofill = autofill
        self._operators: dict[float, SingularOperator] = {}
        self._lock = threading.Lock()

    def _key(self, k: float) -> float:
        return float(np.round(abs(k), 14))

    def preload(self, ks) -> None:
        for k in ks:
            if k != 0.0:
                self.get(k, assemble=True)
        logger.info(f"Operator cache holds {len(self._operators)} wavenumbers on n={self.grid.n}")

    def get(self, k: float, assemble: bool | None = None) -> SingularOperator:
        key = self._key(k)
        with self._lock:
            J = self._operators.get(key)
        if J is None:
            if not (self.autofill if assemble is None else assemble):
                raise MissingOperator(f"no singular operator cached for k={k}")
            J = assemble_j(self.grid, key)
            with self._lock:
                self._operators.setdefault(key, J)
        if k < 0:
            return SingularOperator(k=float(k), mat=-J.mat, quadrature_defect=J.quadrature_defect)
        return J

    def __contains__(self, k: float) -> bool:
        return self._key(k) in self._operators

    def __len__(self) -> int:
        return len(self._operators)
