"""
Frequency weights, per-mode energy E_k and dissipation functionals Dis_1..Dis_5
"""
import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from couette.numerics.cheb import ChebGrid, check_field, helmholtz_solve, inner, norm_sq
from couette.numerics.jop import SingularOperator, apply_j
from couette.utils.errors import BoundaryViolation, ConfigError, NumericalFailure

logger = logging.getLogger(__name__)

EPS_MAX = 1.0 / 12.0
BOUNDARY_TOL = 1e-10
STREAM_TOL = 1e-6
# Relative imaginary residue allowed in the J quadratic forms
IMAG_TOL = 1e-8


@dataclass(frozen=True)
class WeightSet:
    """
    Viscosity, energy constants and norm exponents

    cross_sign is the sign in front of the β cross term of E_k. +1 makes the
    term dissipative under the shear (d/dt Re<ikω, ∂_yω> = -k²‖ω‖² for pure
    advection); -1 is the literal printed arrangement.
    """

    nu: float
    m: float = 2.0
    eps: float = 0.08
    c_alpha: float = 0.05
    c_beta: float = 0.05
    c_tau: float = 0.05
    c0: float = 0.02
    c: float | None = None
    cross_sign: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.nu < 1.0:
            raise ConfigError(f"ν must lie in (0, 1), got {self.nu}")
        if not self.m > 1.0:
            raise ConfigError(f"m must be > 1, got {self.m}")
        if not 0.0 < self.eps < EPS_MAX:
            raise ConfigError(f"ε must lie in (0, 1/12), got {self.eps}")
        for name in ("c_alpha", "c_beta", "c_tau", "c0"):
            if not getattr(self, name) > 0.0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.cross_sign not in (1.0, -1.0):
            raise ConfigError(f"cross_sign must be +1 or -1, got {self.cross_sign}")
        if self.c is None:
            object.__setattr__(self, "c", self.c0 / 4.0)
        if not 0.0 < self.c <= self.c0 / 4.0:
            raise ConfigError(f"c must lie in (0, c0/4] = (0, {self.c0 / 4.0}], got {self.c}")

    @property
    def cross_bound(self) -> float:
        """Cauchy-Schwarz bound of the β term relative to ‖ω‖² + c_α α‖∂_yω‖²"""
        return self.c_beta / (2.0 * math.sqrt(self.c_alpha))

    def coercivity_margin(self, c_j: float) -> float:
        """1/2 - (c_τ C_J + β-term bound); positive means E_k ≈ ‖ω‖² + α‖∂_yω‖²"""
        return 0.5 - (self.c_tau * c_j + self.cross_bound)

    def check_coercivity(self, c_j: float) -> None:
        margin = self.coercivity_margin(c_j)
        if margin <= 0.0:
            raise ConfigError(
                f"coercivity margin violated: c_tau*C_J + c_beta/(2 sqrt(c_alpha)) = {0.5 - margin:.4f} >= 1/2"
            )

    def with_nu(self, nu: float) -> "WeightSet":
        return replace(self, nu=nu)

    def constants(self) -> dict:
        return {
            "c_alpha": self.c_alpha,
            "c_beta": self.c_beta,
            "c_tau": self.c_tau,
            "c0": self.c0,
            "c": self.c,
            "cross_sign": self.cross_sign,
        }


@dataclass(frozen=True)
class ModeWeights:
    alpha: float
    beta: float
    lam: float
    active: bool  # |k| >= ν branch


def mode_weights(k: float, nu: float) -> ModeWeights:
    """α, β, λ_k; the |k| >= ν branch is used at |k| = ν"""
    if k == 0.0:
        raise ConfigError("mode weights are undefined at k = 0")
    if not 0.0 < nu < 1.0:
        raise ConfigError(f"ν must lie in (0, 1), got {nu}")
    s = abs(float(k))
    if s >= nu:
        ratio = nu / s
        return ModeWeights(
            alpha=ratio ** (2.0 / 3.0),
            beta=ratio ** (4.0 / 3.0) / nu,
            lam=nu * (s / nu) ** (2.0 / 3.0),
            active=True,
        )
    return ModeWeights(alpha=1.0, beta=0.0, lam=nu, active=False)


def aniso_weight(k: float, m: float, eps: float) -> float:
    """⟨k⟩^{2m} ⟨1/k⟩^{2ε} with ⟨x⟩ = sqrt(1 + x²)"""
    if k == 0.0:
        raise ConfigError("anisotropic weight diverges at k = 0")
    k2 = float(k) ** 2
    return (1.0 + k2) ** m * (1.0 + 1.0 / k2) ** eps


def check_boundary(omega: np.ndarray, name: str = "omega") -> None:
    scale = float(np.max(np.abs(omega))) if omega.size else 0.0
    edge = max(abs(omega[0]), abs(omega[-1]))
    if edge > BOUNDARY_TOL * max(scale, 1e-300) and edge > 0.0:
        raise BoundaryViolation(f"{name} does not vanish at y = ±1 (|value| = {edge:.3e})")


@dataclass(frozen=True)
class EnergyTerms:
    """
    Constant-free pieces of E_k

    E_k = enstrophy + c_α α grad + s c_β β cross + c_τ j_form + c_τ c_α α j_grad
    """

    enstrophy: float
    grad: float
    cross: float
    j_form: float
    j_grad: float
    imag_residue: float

    def combine(self, w: WeightSet, mw: ModeWeights) -> float:
        value = self.enstrophy + w.c_alpha * mw.alpha * self.grad
        if mw.active:
            value += w.cross_sign * w.c_beta * mw.beta * self.cross
        value += w.c_tau * self.j_form + w.c_tau * w.c_alpha * mw.alpha * self.j_grad
        return value


def energy_terms(grid: ChebGrid, J: SingularOperator, k: float, omega: np.ndarray) -> EnergyTerms:
    omega = check_field(grid, omega, "omega")
    check_boundary(omega)
    domega = grid.d1 @ omega
    j_form = inner(grid, omega, apply_j(J, grid, omega))
    j_grad = inner(grid, apply_j(J, grid, domega), domega)
    cross = inner(grid, 1j * k * omega, domega)
    scale = norm_sq(grid, omega) + norm_sq(grid, domega)
    imag = abs(j_form.imag) + abs(j_grad.imag)
    residue = imag / scale if scale > 0.0 else 0.0
    if residue > IMAG_TOL:
        raise NumericalFailure(f"E_k has imaginary residue {residue:.3e} at k={k} (limit {IMAG_TOL:.0e})")
    return EnergyTerms(
        enstrophy=norm_sq(grid, omega),
        grad=norm_sq(grid, domega),
        cross=cross.real,
        j_form=j_form.real,
        j_grad=j_grad.real,
        imag_residue=residue,
    )


def mode_energy(
    grid: ChebGrid, J: SingularOperator, w: WeightSet, mw: ModeWeights, k: float, omega: np.ndarray
) -> float:
    """
    E_k[ω] = ‖ω‖² + c_α α‖∂_yω‖² + s 1_{|k|>=ν} c_β β Re<ikω, ∂_yω>
             + c_τ Re<ω, J ω> + c_τ c_α α Re<J ∂_yω, ∂_yω>
    """
    return energy_terms(grid, J, k, omega).combine(w, mw)


@dataclass(frozen=True)
class Dissipation:
    parts: tuple[float, float, float, float, float]

    @property
    def total(self) -> float:
        return float(sum(self.parts))


def dissipation_parts(grid: ChebGrid, nu: float, mw: ModeWeights, k: float, omega: np.ndarray, phi: np.ndarray):
    k2 = k * k
    d_omega = grid.d1 @ omega
    dd_omega = grid.d2 @ omega
    d_phi = grid.d1 @ phi
    dd_phi = grid.d2 @ phi
    n_omega = norm_sq(grid, omega)
    n_domega = norm_sq(grid, d_omega)
    n_dphi = norm_sq(grid, d_phi)
    dis1 = nu * (k2 * n_omega + n_domega)
    dis2 = nu * mw.alpha * (k2 * n_domega + norm_sq(grid, dd_omega))
    dis3 = mw.lam * n_omega
    dis4 = k2 * (k2 * norm_sq(grid, phi) + n_dphi)
    dis5 = mw.alpha * k2 * (k2 * n_dphi + norm_sq(grid, dd_phi))
    return Dissipation(parts=(dis1, dis2, dis3, dis4, dis5))


def mode_dissipation(
    grid: ChebGrid,
    w: WeightSet,
    mw: ModeWeights,
    k: float,
    omega: np.ndarray,
    phi: np.ndarray | None = None,
) -> Dissipation:
    """
    Dis_1..Dis_5 of one mode; phi is recomputed when omitted

    Dis_1 = ν‖∇_kω‖², Dis_2 = να‖∂_y∇_kω‖², Dis_3 = λ_k‖ω‖²,
    Dis_4 = k²‖∇_kφ‖², Dis_5 = αk²‖∂_y∇_kφ‖²
    """
    omega = check_field(grid, omega, "omega")
    if phi is None:
        phi = helmholtz_solve(grid, k, omega)
    else:
        phi = check_field(grid, phi, "phi")
        residual = (grid.d2 @ phi - k * k * phi - omega)[1:-1]
        scale = float(np.max(np.abs(omega))) if omega.size else 0.0
        if float(np.max(np.abs(residual), initial=0.0)) > STREAM_TOL * max(scale, 1e-300) and scale > 0.0:
            raise NumericalFailure("stream function is inconsistent with vorticity (Δ_kφ ≠ ω)")
    return dissipation_parts(grid, w.nu, mw, k, omega, phi)


def theorem_norm(grid: ChebGrid, ks: np.ndarray, modes: np.ndarray, nu: float, m: float, eps: float, dk: float) -> float:
    """
    Initial-data norm Σ_{s=0,1} ‖(ν^{1/3}∂_y)^s ⟨∂_x⟩^{m-s} ⟨1/∂_x⟩^ε ω‖

    Riemann sum over the nonzero wavenumbers with spacing dk.
    """
    total = 0.0
    for s in (0, 1):
        acc = 0.0
        for k, omega in zip(ks, modes):
            if k == 0.0:
                continue
            f = omega if s == 0 else grid.d1 @ omega
            weight = (1.0 + k * k) ** (m - s) * (1.0 + 1.0 / (k * k)) ** eps * nu ** (2.0 * s / 3.0)
            acc += weight * norm_sq(grid, f)
        total += math.sqrt(dk * acc)
    return total
