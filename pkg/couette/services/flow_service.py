"""
Nonlinear 2D vorticity solver on a periodic-in-x box of length Lx

    ∂_t ω + y ∂_x ω + u·∇ω - ν Δω = 0,  u = (∂_yφ, -∂_xφ),  Δφ = ω

Modes k_j = 2πj/Lx for j = -K..K, Chebyshev collocation in y, pseudospectral
products on a 2/3-dealiased x-grid, IMEX CNAB2 in time.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import linalg

from couette.numerics.cheb import ChebGrid, dirichlet_laplacian, helmholtz_factor, helmholtz_solve, norm_sq, sine_basis
from couette.numerics.weights import theorem_norm
from couette.utils.errors import CFLViolation, ConfigError, NumericalFailure, ShapeMismatch

logger = logging.getLogger(__name__)

MIN_LX = 50.0
REALITY_TOL = 1e-12
BOUNDARY_TOL = 1e-8
CFL_LIMIT = 0.5


@dataclass
class FlowState:
    """
    Vorticity modes ω_{k_j}, j = -K..K, stored row-wise (row K is the x-average)

    The j = 0 row is evolved but excluded from the weighted functionals.
    """

    Lx: float
    K: int
    modes: np.ndarray
    t: float
    nu: float

    def __post_init__(self):
        if not self.Lx >= MIN_LX:
            raise ConfigError(f"box length Lx must be >= {MIN_LX}, got {self.Lx}")
        if self.K < 1:
            raise ConfigError(f"K must be >= 1, got {self.K}")
        self.modes = np.asarray(self.modes, dtype=complex)
        if self.modes.ndim != 2 or self.modes.shape[0] != 2 * self.K + 1:
            raise ShapeMismatch(f"modes of shape {self.modes.shape} do not match K={self.K}")

    @property
    def dk(self) -> float:
        return 2.0 * math.pi / self.Lx

    @property
    def ks(self) -> np.ndarray:
        return self.dk * np.arange(-self.K, self.K + 1)

    @property
    def n(self) -> int:
        return self.modes.shape[1] - 1

    def mode(self, j: int) -> np.ndarray:
        return self.modes[j + self.K]

    def copy(self) -> "FlowState":
        return FlowState(Lx=self.Lx, K=self.K, modes=self.modes.copy(), t=self.t, nu=self.nu)

    def scaled(self, factor: float) -> "FlowState":
        return FlowState(Lx=self.Lx, K=self.K, modes=factor * self.modes, t=self.t, nu=self.nu)

    def enstrophy(self, grid: ChebGrid) -> float:
        return float(sum(norm_sq(grid, w) for w in self.modes))

    def reality_defect(self) -> float:
        scale = float(np.max(np.abs(self.modes))) if self.modes.size else 0.0
        if scale == 0.0:
            return 0.0
        return float(np.max(np.abs(self.modes - np.conj(self.modes[::-1])))) / scale

    def boundary_defect(self) -> float:
        scale = float(np.max(np.abs(self.modes))) if self.modes.size else 0.0
        if scale == 0.0:
            return 0.0
        return float(np.max(np.abs(self.modes[:, [0, -1]]))) / scale

    def check_invariants(self) -> None:
        if self.reality_defect() > REALITY_TOL:
            raise NumericalFailure(f"reality violated: defect {self.reality_defect():.3e}")
        if self.boundary_defect() > BOUNDARY_TOL:
            raise NumericalFailure(f"wall values violated: defect {self.boundary_defect():.3e}")


def symmetrize(modes: np.ndarray) -> np.ndarray:
    """Impose ω_{-k} = conj(ω_k) from the nonnegative half and a real x-average"""
    K = (modes.shape[0] - 1) // 2
    out = modes.copy()
    out[K] = out[K].real
    out[:K] = np.conj(out[K + 1 :][::-1])
    return out


def zero_state(grid: ChebGrid, Lx: float, K: int, nu: float) -> FlowState:
    return FlowState(Lx=Lx, K=K, modes=np.zeros((2 * K + 1, grid.size), dtype=complex), t=0.0, nu=nu)


@dataclass(frozen=True)
class PerturbationConfig:
    """Initial data family: random sine combinations on the active modes"""

    amplitude: float
    seed: int = 0
    j_max: int = 8
    p_max: int = 6
    m: float = 2.0
    eps: float = 0.08


def init_perturbation(grid: ChebGrid, Lx: float, K: int, nu: float, config: PerturbationConfig) -> FlowState:
    """
    ω_in = A Σ_{1<=|j|<=j_max, p<=p_max} a_{j,p} e^{ik_j x} sin(pπ(y+1)/2), conjugate-symmetric in j

    The coefficients are complex Gaussians of unit expected power, and the
    result is rescaled so that its initial-data norm equals A.
    """
    if config.amplitude < 0.0 or not math.isfinite(config.amplitude):
        raise ConfigError(f"amplitude must be finite and >= 0, got {config.amplitude}")
    if not 1 <= config.j_max <= K:
        raise ConfigError(f"active mode range j_max={config.j_max} must lie in [1, K={K}]")
    if not 1 <= config.p_max <= grid.n // 2:
        raise ConfigError(f"sine range p_max={config.p_max} must lie in [1, n/2={grid.n // 2}]")

    state = zero_state(grid, Lx, K, nu)
    if config.amplitude == 0.0:
        return state

    rng = np.random.default_rng(config.seed)
    basis = np.column_stack([sine_basis(grid, p) for p in range(1, config.p_max + 1)])
    for j in range(1, config.j_max + 1):
        coeffs = (rng.standard_normal(config.p_max) + 1j * rng.standard_normal(config.p_max)) / math.sqrt(2.0)
        state.modes[K + j] = basis @ coeffs
    state.modes = symmetrize(state.modes)

    current = theorem_norm(grid, state.ks, state.modes, nu, config.m, config.eps, state.dk)
    state.modes *= config.amplitude / current
    return state


def physical_points(K: int) -> int:
    """x-points for 2/3 dealiasing of quadratic products"""
    return 3 * K + 1


def to_physical(half: np.ndarray, nx: int) -> np.ndarray:
    """Real field on nx x-points from the nonnegative modes (rows j = 0..K)"""
    padded = np.zeros((nx // 2 + 1, half.shape[1]), dtype=complex)
    padded[: half.shape[0]] = half
    return np.fft.irfft(padded, n=nx, axis=0) * nx


def to_modes(field_x: np.ndarray, K: int) -> np.ndarray:
    """Nonnegative modes j = 0..K of a real physical field"""
    nx = field_x.shape[0]
    return np.fft.rfft(field_x, axis=0)[: K + 1] / nx


def stream_functions(grid: ChebGrid, state: FlowState, solve: Callable | None = None) -> np.ndarray:
    """φ_k for every mode (Dirichlet Helmholtz solves), conjugate-symmetric like ω"""
    phis = np.zeros_like(state.modes)
    K = state.K
    for j in range(0, K + 1):
        k = state.ks[K + j]
        if solve is None:
            phis[K + j] = helmholtz_solve(grid, k, state.modes[K + j])
        else:
            phis[K + j] = solve(j, state.modes[K + j])
    return symmetrize(phis)


def velocity_from_vorticity(grid: ChebGrid, state: FlowState, phis: np.ndarray | None = None):
    """Per-mode velocity u1_k = ∂_yφ_k, u2_k = -i k φ_k"""
    if phis is None:
        phis = stream_functions(grid, state)
    u1 = phis @ grid.d1.T
    u2 = -1j * state.ks[:, None] * phis
    return u1, u2


@dataclass
class Products:
    """Nonlinear term and the physical velocity it was built from"""

    term: np.ndarray
    max_u1: float = 0.0


def _nonlinear_products(grid: ChebGrid, state: FlowState, phis: np.ndarray) -> Products:
    K = state.K
    nx = physical_points(K)
    u1, u2 = velocity_from_vorticity(grid, state, phis)
    ks = state.ks[:, None]
    wx = 1j * ks * state.modes
    wy = state.modes @ grid.d1.T

    half = slice(K, 2 * K + 1)
    U1 = to_physical(u1[half], nx)
    U2 = to_physical(u2[half], nx)
    WX = to_physical(wx[half], nx)
    WY = to_physical(wy[half], nx)

    product = to_modes(U1 * WX + U2 * WY, K)
    term = np.zeros_like(state.modes)
    term[K:] = -product
    return Products(term=symmetrize(term), max_u1=float(np.max(np.abs(U1 + grid.nodes[None, :]))))


def nonlinear_term(grid: ChebGrid, state: FlowState, phis: np.ndarray | None = None) -> np.ndarray:
    """n_k = -(u·∇ω)_k by dealiased pseudospectral products in x"""
    if state.modes.shape[1] != grid.size:
        raise ShapeMismatch(f"state has {state.modes.shape[1]} nodes, grid has {grid.size}")
    if phis is None:
        phis = stream_functions(grid, state)
    return _nonlinear_products(grid, state, phis).term


def convolution_nonlinear_term(grid: ChebGrid, state: FlowState) -> np.ndarray:
    """
    Brute-force triad sum over the stored modes

    n_k = -Σ_ℓ [∂_yφ_ℓ i(k-ℓ) ω_{k-ℓ} - i ℓ φ_ℓ ∂_yω_{k-ℓ}]
    """
    K = state.K
    ks = state.ks
    phis = stream_functions(grid, state)
    dphis = phis @ grid.d1.T
    dws = state.modes @ grid.d1.T
    out = np.zeros_like(state.modes)
    for a in range(-K, K + 1):
        acc = np.zeros(grid.size, dtype=complex)
        for b in range(-K, K + 1):
            c = a - b
            if abs(c) > K:
                continue
            kl, kc = ks[b + K], ks[c + K]
            acc += 1j * kl * phis[b + K] * dws[c + K] - dphis[b + K] * 1j * kc * state.modes[c + K]
        out[a + K] = acc
    return out


def enstrophy_transfer(grid: ChebGrid, state: FlowState, term: np.ndarray | None = None) -> float:
    """Σ_k Re<ω_k, n_k>: the enstrophy change due to the nonlinearity"""
    if term is None:
        term = nonlinear_term(grid, state)
    return float(sum((grid.qw @ (np.conj(w) * n)).real for w, n in zip(state.modes, term)))


class NonlinearSolver:
    """
    CNAB2 integrator of the full system

    Caches the implicit factorizations and the Helmholtz factorizations of
    every nonnegative mode; keeps the explicit-term history between steps.
    include_nonlinear=False gives the linearized dynamics on the same modes.
    """

    def __init__(self, grid: ChebGrid, Lx: float, K: int, nu: float, dt: float, include_nonlinear: bool = True):
        if not dt > 0.0:
            raise ConfigError(f"time step must be positive, got {dt}")
        self.grid = grid
        self.Lx = float(Lx)
        self.K = int(K)
        self.nu = float(nu)
        self.dt = float(dt)
        self.include_nonlinear = include_nonlinear
        self.nx = physical_points(self.K)
        self.dx = self.Lx / self.nx
        self.ks = 2.0 * math.pi / self.Lx * np.arange(0, self.K + 1)

        eye = np.eye(grid.size)
        self._implicit = []
        self._explicit = []
        self._helmholtz = []
        for k in self.ks:
            lap = dirichlet_laplacian(grid, k)
            implicit = eye - 0.5 * dt * nu * lap
            implicit[[0, -1], :] = 0.0
            implicit[0, 0] = implicit[-1, -1] = 1.0
            try:
                self._implicit.append(linalg.lu_factor(implicit))
            except (linalg.LinAlgError, ValueError) as e:
                raise NumericalFailure(f"implicit factorization failed at k={k}: {e}") from e
            self._explicit.append(eye + 0.5 * dt * nu * lap)
            self._helmholtz.append(helmholtz_factor(grid, k))
        self._previous: np.ndarray | None = None
        self.steps_taken = 0
        logger.info(f"Nonlinear solver ready: K={K}, n={grid.n}, nx={self.nx}, dt={dt}, nonlinear={include_nonlinear}")

    def solve_stream(self, j: int, omega: np.ndarray) -> np.ndarray:
        return helmholtz_solve(self.grid, self.ks[j], omega, factor=self._helmholtz[j])

    def stream_functions(self, state: FlowState) -> np.ndarray:
        return stream_functions(self.grid, state, solve=self.solve_stream)

    def reset(self) -> None:
        self._previous = None
        self.steps_taken = 0

    def _tendency(self, state: FlowState) -> np.ndarray:
        K = self.K
        advection = -1j * state.ks[:, None] * self.grid.nodes[None, :] * state.modes
        if not self.include_nonlinear:
            max_speed = float(np.max(np.abs(self.grid.nodes)))
            self._check_cfl(max_speed)
            return advection
        products = _nonlinear_products(self.grid, state, self.stream_functions(state))
        self._check_cfl(products.max_u1)
        tendency = advection + products.term
        tendency[:K] = np.conj(tendency[K + 1 :][::-1])
        return tendency

    def _check_cfl(self, max_speed: float) -> None:
        limit = CFL_LIMIT * self.dx / max(max_speed, 1e-300)
        if self.dt > limit:
            raise CFLViolation(
                f"dt={self.dt} exceeds the advective CFL bound {limit:.4g} (max |u1 + y| = {max_speed:.4g}); "
                f"reduce dt or K/Lx"
            )

    def step(self, state: FlowState) -> FlowState:
        if state.K != self.K or state.modes.shape[1] != self.grid.size:
            raise ShapeMismatch("state does not match the solver resolution")
        current = self._tendency(state)
        if self._previous is None:
            explicit = current
        else:
            explicit = 1.5 * current - 0.5 * self._previous
        self._previous = current

        K = self.K
        new = np.zeros_like(state.modes)
        for j in range(0, K + 1):
            row = K + j
            rhs = self._explicit[j] @ state.modes[row] + self.dt * explicit[row]
            rhs[0] = rhs[-1] = 0.0
            new[row] = linalg.lu_solve(self._implicit[j], rhs)
        new[:, 0] = 0.0
        new[:, -1] = 0.0
        new = symmetrize(new)
        if not np.all(np.isfinite(new)):
            raise NumericalFailure(f"non-finite vorticity at t={state.t + self.dt:.4f}")
        self.steps_taken += 1
        return FlowState(Lx=state.Lx, K=K, modes=new, t=state.t + self.dt, nu=state.nu)

    def evolve(self, state: FlowState, t_end: float, callback: Callable[[FlowState], None] | None = None) -> FlowState:
        """Step until t_end (the last step is not shortened; t_end should be a multiple of dt)"""
        steps = int(round((t_end - state.t) / self.dt))
        for _ in range(steps):
            state = self.step(state)
            if callback is not None:
                callback(state)
        return state


def step_nonlinear(grid: ChebGrid, state: FlowState, dt: float) -> FlowState:
    """One step from a fresh solver (explicit Euler start)"""
    return NonlinearSolver(grid, state.Lx, state.K, state.nu, dt).step(state)

