"""
Global weighted functionals of a FlowState, the nonlinear budget terms, the
empirical inequality harness and the bootstrap monitor
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from couette.numerics.cheb import ChebGrid, norm_sq
from couette.numerics.jop import OperatorCache, apply_j
from couette.numerics.weights import WeightSet, aniso_weight, dissipation_parts, energy_terms, mode_weights, theorem_norm
from couette.services.flow_service import FlowState, NonlinearSolver, nonlinear_term, stream_functions
from couette.utils.errors import ConfigError

logger = logging.getLogger(__name__)

RATIO_FLOOR = 1e-14
REFINEMENT_TOL = 0.15
GROWTH_LIMIT = 10.0


def mode_factor(k: float, t: float, weights: WeightSet, dk: float) -> float:
    """Δk e^{2cλ_k t} ⟨k⟩^{2m} ⟨1/k⟩^{2ε}"""
    lam = mode_weights(k, weights.nu).lam
    return dk * math.exp(2.0 * weights.c * lam * t) * aniso_weight(k, weights.m, weights.eps)


@dataclass(frozen=True)
class GlobalFunctionals:
    energy: float
    dissipation: float
    parts: tuple[float, float, float, float, float]


def global_energy(
    grid: ChebGrid,
    state: FlowState,
    weights: WeightSet,
    cache: OperatorCache,
    phis: np.ndarray | None = None,
) -> GlobalFunctionals:
    """
    𝓔 = Δk Σ_{j≠0} e^{2cλ_k t} ⟨k⟩^{2m} ⟨1/k⟩^{2ε} E_k[ω_k], and the same sums of Dis_1..Dis_5

    Modes are summed in increasing j so the result is reproducible.
    """
    if state.modes.shape[1] != grid.size:
        raise ConfigError(f"state has {state.modes.shape[1]} nodes, grid has {grid.size}")
    if phis is None:
        phis = stream_functions(grid, state)
    energy = 0.0
    parts = np.zeros(5)
    for k, omega, phi in zip(state.ks, state.modes, phis):
        if k == 0.0:
            continue
        factor = mode_factor(k, state.t, weights, state.dk)
        mw = mode_weights(k, weights.nu)
        J = cache.get(k)
        energy += factor * energy_terms(grid, J, k, omega).combine(weights, mw)
        parts += factor * np.array(dissipation_parts(grid, weights.nu, mw, k, omega, phi).parts)
    parts_t = tuple(float(p) for p in parts)
    return GlobalFunctionals(energy=float(energy), dissipation=float(sum(parts_t)), parts=parts_t)


def nonlinear_terms(
    grid: ChebGrid,
    state: FlowState,
    weights: WeightSet,
    cache: OperatorCache,
    term: np.ndarray | None = None,
) -> tuple[float, float, float]:
    """
    Rate of change of 𝓔 caused by the nonlinearity, split as n1 + n2 + n3

    n1 = 2 Σ w_k Re<ω_k, (1 + c_τ J_k) n_k>
    n2 = -2 c_α Σ w_k α Re<∂_y(1 + c_τ J_k)∂_yω_k, n_k>      (by parts, n_k(±1) = 0)
    n3 = s c_β Σ_{|k|>=ν} w_k β [Re<ik n_k, ∂_yω_k> - Re<ik ∂_yω_k, n_k>]
    """
    if term is None:
        term = nonlinear_term(grid, state)
    n1 = n2 = n3 = 0.0
    qw = grid.qw
    for k, omega, nk in zip(state.ks, state.modes, term):
        if k == 0.0:
            continue
        factor = mode_factor(k, state.t, weights, state.dk)
        mw = mode_weights(k, weights.nu)
        J = cache.get(k)
        domega = grid.d1 @ omega
        n1 += 2.0 * factor * float((qw @ (np.conj(omega) * (nk + weights.c_tau * apply_j(J, grid, nk)))).real)
        flux = grid.d1 @ (domega + weights.c_tau * apply_j(J, grid, domega))
        n2 += -2.0 * weights.c_alpha * factor * mw.alpha * float((qw @ (np.conj(flux) * nk)).real)
        if mw.active:
            pair = qw @ (np.conj(1j * k * nk) * domega) - qw @ (np.conj(1j * k * domega) * nk)
            n3 += weights.cross_sign * weights.c_beta * factor * mw.beta * float(pair.real)
    return float(n1), float(n2), float(n3)


@dataclass(frozen=True)
class EnergyReport:
    t: float
    E_global: float
    D_global: float
    D_parts: tuple[float, float, float, float, float]
    n_parts: tuple[float, float, float]
    E_total: float
    theorem_norm: float
    D4_time_integral: float

    def row(self) -> list:
        return [
            self.t,
            self.E_global,
            self.D_global,
            *self.D_parts,
            *self.n_parts,
            self.E_total,
            self.theorem_norm,
            self.D4_time_integral,
        ]


REPORT_COLUMNS = ["t", "E", "D", "D1", "D2", "D3", "D4", "D5", "n1", "n2", "n3", "E_total", "theorem_norm", "intD4"]


@dataclass
class EnergyHistory:
    """
    Accumulates EnergyReports along a run

    𝓔_total(t) = sup_{τ<=t} 𝓔(τ) + ∫_0^t 𝓓 dτ with trapezoidal time integrals.
    """

    grid: ChebGrid
    weights: WeightSet
    cache: OperatorCache
    with_nonlinear: bool = True
    reports: list[EnergyReport] = field(default_factory=list)
    _sup: float = 0.0
    _int_d: float = 0.0
    _int_d4: float = 0.0

    def record(self, state: FlowState) -> EnergyReport:
        phis = stream_functions(self.grid, state)
        functionals = global_energy(self.grid, state, self.weights, self.cache, phis=phis)
        if self.with_nonlinear:
            term = nonlinear_term(self.grid, state, phis=phis)
            n_parts = nonlinear_terms(self.grid, state, self.weights, self.cache, term=term)
        else:
            n_parts = (0.0, 0.0, 0.0)

        if self.reports:
            last = self.reports[-1]
            dt = state.t - last.t
            self._int_d += 0.5 * dt * (last.D_global + functionals.dissipation)
            self._int_d4 += 0.5 * dt * (last.D_parts[3] + functionals.parts[3])
            self._sup = max(self._sup, functionals.energy)
        else:
            self._sup = functionals.energy

        report = EnergyReport(
            t=state.t,
            E_global=functionals.energy,
            D_global=functionals.dissipation,
            D_parts=functionals.parts,
            n_parts=n_parts,
            E_total=self._sup + self._int_d,
            theorem_norm=theorem_norm(
                self.grid, state.ks, state.modes, self.weights.nu, self.weights.m, self.weights.eps, state.dk
            ),
            D4_time_integral=self._int_d4,
        )
        self.reports.append(report)
        return report

    def __len__(self) -> int:
        return len(self.reports)


@dataclass(frozen=True)
class BudgetClosure:
    nonlinear_rate: float  # (𝓔 after full step - 𝓔 after linear step) / dt
    predicted: float  # n1 + n2 + n3 at the start of the step
    max_dissipation: float

    @property
    def defect(self) -> float:
        if self.max_dissipation == 0.0:
            return abs(self.nonlinear_rate - self.predicted)
        return abs(self.nonlinear_rate - self.predicted) / self.max_dissipation


def budget_closure(grid: ChebGrid, state: FlowState, weights: WeightSet, cache: OperatorCache, dt: float) -> BudgetClosure:
    """
    Compare the nonlinear part of d𝓔/dt with n1 + n2 + n3

    One step of the full solver and one of the linearized solver start from
    the same state; the difference of their 𝓔 over dt is the nonlinear
    contribution.
    """
    full = NonlinearSolver(grid, state.Lx, state.K, state.nu, dt).step(state)
    linear = NonlinearSolver(grid, state.Lx, state.K, state.nu, dt, include_nonlinear=False).step(state)
    e_full = global_energy(grid, full, weights, cache).energy
    e_linear = global_energy(grid, linear, weights, cache).energy
    predicted = sum(nonlinear_terms(grid, state, weights, cache))
    d_max = max(global_energy(grid, s, weights, cache).dissipation for s in (state, full))
    return BudgetClosure(nonlinear_rate=(e_full - e_linear) / dt, predicted=predicted, max_dissipation=d_max)


@dataclass(frozen=True)
class Sample:
    """One snapshot for the inequality harness with its own grid"""

    grid: ChebGrid
    state: FlowState


@dataclass(frozen=True)
class RatioStats:
    max: float
    median: float
    count: int


def gagliardo_nirenberg_ratio(grid: ChebGrid, k: float, f: np.ndarray) -> float:
    """‖f‖_∞ / (|k|^{-1/2} ‖∇_k f‖) for one boundary-vanishing profile"""
    rhs = abs(k) ** -0.5 * math.sqrt(k * k * norm_sq(grid, f) + norm_sq(grid, grid.d1 @ f))
    if rhs <= RATIO_FLOOR:
        return 0.0
    return float(np.max(np.abs(f))) / rhs


def _inequality_quantities(sample: Sample, weights: WeightSet, cache: OperatorCache) -> dict[str, tuple[float, float]]:
    """
    (LHS, RHS) of every aggregate inequality at one snapshot, constants set to 1

    L¹ and L² norms in k become Riemann sums over j ≠ 0. Every bound is
    homogeneous of degree three in ω for the nonlinear terms, which fixes the
    exponents (𝓓5^{1/2} in the gradient bound and
    𝓓1^{1/2} 𝓓4^{1/2} in the cross bound). The *_printed entries keep the
    non-homogeneous 𝓓5^{1/4} and 𝓓1^{1/2} 𝓓4^{1/4} exponents instead.
    """
    grid, state = sample.grid, sample.state
    nu, t, dk = weights.nu, state.t, state.dk
    phis = stream_functions(grid, state)
    g = global_energy(grid, state, weights, cache, phis=phis)
    E = max(g.energy, 0.0)
    D1, D2, D3, D4, D5 = g.parts
    term = nonlinear_term(grid, state, phis=phis)
    n1, n2, n3 = nonlinear_terms(grid, state, weights, cache, term=term)

    sup_sums = np.zeros(5)
    enstrophy_sums = np.zeros(4)
    hessian_sums = np.zeros(3)
    gn = 0.0
    for k, omega, phi in zip(state.ks, state.modes, phis):
        if k == 0.0:
            continue
        s = abs(k)
        active = s >= nu
        weight = math.exp(2.0 * weights.c * mode_weights(k, nu).lam * t) * aniso_weight(k, weights.m, weights.eps)
        alpha = mode_weights(k, nu).alpha
        dphi = grid.d1 @ phi
        ddphi = grid.d2 @ phi
        n_omega = norm_sq(grid, omega)
        sup_ddphi = float(np.max(np.abs(ddphi)))

        sup_sums += dk * np.array(
            [
                float(np.max(np.abs(dphi))),
                s * float(np.max(np.abs(phi))),
                s**-0.5 * math.sqrt(norm_sq(grid, grid.d1 @ omega)),
                (1.0 + 1.0 / (k * k)) ** 0.25 * math.sqrt(n_omega),
                float(np.max(np.abs(omega))),
            ]
        )
        enstrophy_sums[0] += dk * weight * alpha * k * k * n_omega
        if active:
            enstrophy_sums[1] += dk * weight * s ** (2.0 / 3.0) * n_omega
            enstrophy_sums[2] += dk * weight * nu ** (1.0 / 6.0) * s ** (1.0 / 3.0) * n_omega
            enstrophy_sums[3] += dk * weight * s * n_omega
            hessian_sums[0] += dk * weight * s ** (7.0 / 3.0) * float(np.max(np.abs(dphi))) ** 2
        hessian_sums[1] += dk * sup_ddphi
        hessian_sums[2] += dk * nu ** (2.0 / 3.0) * s ** (4.0 / 3.0) * aniso_weight(k, weights.m, weights.eps) * sup_ddphi**2
        if np.any(omega):
            gn = max(gn, gagliardo_nirenberg_ratio(grid, k, omega))

    root_e = math.sqrt(E)
    n1_rhs = nu**-0.5 * root_e * (math.sqrt(D1 * D4) + math.sqrt(D1 * D3) + D1**0.25 * D3**0.75)
    n2_rhs = nu**-0.5 * root_e * math.sqrt(D2) * (math.sqrt(D4) + (D1 * D3) ** 0.25 + math.sqrt(D5))
    n2_printed = nu**-0.5 * root_e * math.sqrt(D2) * (math.sqrt(D4) + (D1 * D3) ** 0.25 + D5**0.25)
    n3_common = (
        D1**0.375 * D3**0.625
        + math.sqrt(D1 * D3)
        + D1**0.75 * D3**0.25
        + D1**0.125 * D2**0.25 * D3**0.375 * D5**0.25
        + D1**0.25 * D2**0.25 * D3**0.5
    )
    n3_rhs = nu**-0.5 * root_e * (n3_common + math.sqrt(D1 * D4))
    n3_printed = nu**-0.5 * root_e * (n3_common + math.sqrt(D1) * D4**0.25)
    return {
        "stream_gradient_sup": (sup_sums[0], root_e),
        "stream_sup": (sup_sums[1], math.sqrt(D4)),
        "vorticity_gradient": (sup_sums[2], nu**-0.5 * math.sqrt(D1)),
        "vorticity_low_frequency": (sup_sums[3], root_e),
        "vorticity_sup": (sup_sums[4], nu**-0.5 * math.sqrt(D1)),
        "alpha_enstrophy": (enstrophy_sums[0], math.sqrt(D1 * D3)),
        "two_thirds_enstrophy": (enstrophy_sums[1], nu ** (-1.0 / 3.0) * root_e * (D1 * D3) ** 0.25),
        "sixth_enstrophy": (math.sqrt(enstrophy_sums[2]), E**0.25 * D3**0.25),
        "first_order_enstrophy": (math.sqrt(enstrophy_sums[3]), nu**-0.25 * D1**0.125 * D3**0.375),
        "weighted_stream_gradient_sup": (hessian_sums[0], nu ** (-2.0 / 3.0) * D5),
        "stream_hessian_sup": (hessian_sums[1], nu**-0.25 * (E * D1) ** 0.25),
        "weighted_stream_hessian_sup": (math.sqrt(hessian_sums[2]), nu**-0.25 * (D2 * D5) ** 0.25),
        "transport_bound": (abs(n1), n1_rhs),
        "gradient_bound": (abs(n2), n2_rhs),
        "cross_bound": (abs(n3), n3_rhs),
        "gradient_bound_printed": (abs(n2), n2_printed),
        "cross_bound_printed": (abs(n3), n3_printed),
        "gagliardo_nirenberg": (gn, 1.0 if gn > 0.0 else 0.0),
    }


INEQUALITIES = (
    "stream_gradient_sup",
    "stream_sup",
    "vorticity_gradient",
    "vorticity_low_frequency",
    "vorticity_sup",
    "alpha_enstrophy",
    "two_thirds_enstrophy",
    "sixth_enstrophy",
    "first_order_enstrophy",
    "weighted_stream_gradient_sup",
    "stream_hessian_sup",
    "weighted_stream_hessian_sup",
    "transport_bound",
    "gradient_bound",
    "cross_bound",
    "gradient_bound_printed",
    "cross_bound_printed",
    "gagliardo_nirenberg",
)


def inequality_harness(samples: list[Sample], weights: WeightSet, caches: dict | None = None) -> dict[str, RatioStats]:
    """
    Empirical LHS/RHS ratios of the aggregate inequalities

    Samples whose RHS is below RATIO_FLOOR are skipped. One operator cache is
    kept per grid size.
    """
    if not samples:
        raise ConfigError("inequality harness needs at least one sample")
    caches = {} if caches is None else caches
    ratios: dict[str, list[float]] = {name: [] for name in INEQUALITIES}
    for sample in samples:
        cache = caches.setdefault(sample.grid.n, OperatorCache(sample.grid))
        for name, (lhs, rhs) in _inequality_quantities(sample, weights, cache).items():
            if rhs > RATIO_FLOOR:
                ratios[name].append(lhs / rhs)
    return {
        name: RatioStats(
            max=float(np.max(values)) if values else 0.0,
            median=float(np.median(values)) if values else 0.0,
            count=len(values),
        )
        for name, values in ratios.items()
    }


@dataclass(frozen=True)
class RefinementVerdict:
    coarse: float
    fine: float
    change: float
    bounded: bool


def compare_refinement(
    coarse: dict[str, RatioStats], fine: dict[str, RatioStats], tol: float = REFINEMENT_TOL
) -> dict[str, RefinementVerdict]:
    """'bounded' when the fine max ratio is finite and within tol of the coarse one"""
    verdicts = {}
    for name, stats in coarse.items():
        other = fine.get(name)
        if other is None:
            continue
        scale = max(abs(stats.max), RATIO_FLOOR)
        change = abs(other.max - stats.max) / scale
        verdicts[name] = RefinementVerdict(
            coarse=stats.max,
            fine=other.max,
            change=change,
            bounded=bool(math.isfinite(other.max) and change < tol),
        )
    return verdicts


@dataclass(frozen=True)
class BootstrapVerdict:
    e_total: np.ndarray
    c1: float
    growth_ratio: float
    stable: bool
    level: float  # max 𝓔_total / (ε0 ν)


def bootstrap_monitor(history: list[EnergyReport], nu: float, eps0: float) -> BootstrapVerdict:
    """
    Bootstrap inequality 𝓔_total(t) <= C1 (𝓔_total(0) + ν^{-1/2} 𝓔_total(t)^{3/2})

    Reports the smallest C1 over the run and the desk-scale verdict
    𝓔_total(t) <= 10 𝓔_total(0) throughout.
    """
    if not history:
        raise ConfigError("bootstrap monitor needs a nonempty history")
    e_total = np.array([r.E_total for r in history])
    e0 = e_total[0]
    bound = e0 + nu**-0.5 * np.clip(e_total, 0.0, None) ** 1.5
    with np.errstate(divide="ignore", invalid="ignore"):
        c1_values = np.where(bound > 0.0, e_total / bound, 0.0)
    c1 = float(np.max(c1_values))
    if e0 > 0.0:
        growth = float(np.max(e_total) / e0)
    else:
        growth = 0.0 if not np.any(e_total) else math.inf
    finite = bool(np.all(np.isfinite(e_total)))
    return BootstrapVerdict(
        e_total=e_total,
        c1=c1,
        growth_ratio=growth,
        stable=finite and growth <= GROWTH_LIMIT,
        level=float(np.max(e_total) / (eps0 * nu)) if eps0 > 0.0 else math.nan,
    )


@dataclass(frozen=True)
class LxSensitivity:
    constants: dict  # Lx -> ∫𝓓4 dτ / 𝓔(0)
    drift: float  # (max - min) / min
    stable: bool


def lx_sensitivity(results: dict[float, tuple[float, float]], tol: float = REFINEMENT_TOL) -> LxSensitivity:
    """Spread of ∫𝓓4 / 𝓔(0) across box lengths; results maps Lx -> (∫𝓓4, 𝓔(0))"""
    if not results:
        raise ConfigError("Lx sensitivity needs at least one run")
    constants = {lx: d4 / e0 for lx, (d4, e0) in sorted(results.items()) if e0 > 0.0}
    if not constants:
        raise ConfigError("every run has zero initial energy")
    values = np.array(list(constants.values()))
    drift = float((values.max() - values.min()) / max(values.min(), RATIO_FLOOR))
    return LxSensitivity(constants=constants, drift=drift, stable=drift < tol)
