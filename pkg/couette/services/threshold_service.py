"""
Amplitude sweeps probing the ν^{1/2} stability threshold

A probe runs the nonlinear solver from a perturbation scaled in the initial-data norm and
returns a finite-time verdict; the bisection controller brackets the
transition amplitude per viscosity and scaling_fit regresses log A* on log ν.
"""
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import stats

from couette.numerics.cheb import build_grid
from couette.numerics.jop import OperatorCache
from couette.numerics.weights import WeightSet
from couette.services.diagnostics_service import GROWTH_LIMIT, global_energy
from couette.services.flow_service import NonlinearSolver, PerturbationConfig, init_perturbation
from couette.utils.errors import CFLViolation, ConfigError, InconclusiveResolution, NumericalFailure

logger = logging.getLogger(__name__)

STABLE = "stable"
UNSTABLE = "unstable"
INCONCLUSIVE = "inconclusive"

BRACKET_TOL = 0.05
MAX_DOUBLINGS = 1000


@dataclass(frozen=True)
class ProbeConfig:
    """Resolution and horizon of a stability probe"""

    n: int = 64
    K: int = 32
    Lx: float = 100.0
    m: float = 2.0
    eps: float = 0.08
    dt: float = 0.01
    seed: int = 0
    j_max: int = 8
    p_max: int = 6
    horizon: float | None = None
    diag_every: int = 10

    def horizon_for(self, nu: float) -> float:
        """max(10, 3ν^{-1/3}) unless set explicitly"""
        if self.horizon is not None:
            return self.horizon
        return max(10.0, 3.0 * nu ** (-1.0 / 3.0))


@dataclass(frozen=True)
class ProbeVerdict:
    amplitude: float
    status: str
    peak_ratio: float
    final_ratio: float
    runtime_seconds: float = 0.0
    message: str = ""


def stability_probe(
    nu: float,
    amplitude: float,
    config: ProbeConfig,
    weights: WeightSet | None = None,
    cache: OperatorCache | None = None,
) -> ProbeVerdict:
    """
    Finite-time verdict at one amplitude

    unstable: sup 𝓔 > 10 𝓔(0) or non-finite values before the horizon
    stable: the run completes with sup 𝓔 <= 10 𝓔(0) and 𝓔(T) <= 𝓔(0)
    inconclusive: the CFL bound is violated at this resolution
    """
    if amplitude < 0.0:
        raise ConfigError(f"amplitude must be >= 0, got {amplitude}")
    started = time.perf_counter()
    if amplitude == 0.0:
        return ProbeVerdict(amplitude=0.0, status=STABLE, peak_ratio=1.0, final_ratio=1.0)

    grid = build_grid(config.n)
    weights = weights or WeightSet(nu=nu, m=config.m, eps=config.eps)
    cache = cache or OperatorCache(grid)
    perturbation = PerturbationConfig(
        amplitude=amplitude, seed=config.seed, j_max=config.j_max, p_max=config.p_max, m=config.m, eps=config.eps
    )
    state = init_perturbation(grid, config.Lx, config.K, nu, perturbation)
    e0 = global_energy(grid, state, weights, cache).energy
    horizon = config.horizon_for(nu)
    steps = int(math.ceil(horizon / config.dt))
    peak = e0
    energy = e0

    try:
        solver = NonlinearSolver(grid, config.Lx, config.K, nu, config.dt)
        for i in range(1, steps + 1):
            state = solver.step(state)
            if i % config.diag_every == 0 or i == steps:
                energy = global_energy(grid, state, weights, cache).energy
                if not math.isfinite(energy):
                    raise NumericalFailure(f"non-finite energy at t={state.t:.3f}")
                peak = max(peak, energy)
                if peak > GROWTH_LIMIT * e0:
                    logger.info(f"Probe A={amplitude:.4e} ν={nu:.2e}: growth beyond {GROWTH_LIMIT}x at t={state.t:.2f}")
                    return ProbeVerdict(
                        amplitude=amplitude,
                        status=UNSTABLE,
                        peak_ratio=peak / e0,
                        final_ratio=energy / e0,
                        runtime_seconds=time.perf_counter() - started,
                        message=f"growth at t={state.t:.3f}",
                    )
    except CFLViolation as e:
        logger.warning(f"Probe A={amplitude:.4e} ν={nu:.2e} inconclusive: {e}")
        return ProbeVerdict(
            amplitude=amplitude,
            status=INCONCLUSIVE,
            peak_ratio=peak / e0,
            final_ratio=energy / e0,
            runtime_seconds=time.perf_counter() - started,
            message=str(e),
        )
    except NumericalFailure as e:
        logger.info(f"Probe A={amplitude:.4e} ν={nu:.2e} blew up: {e}")
        return ProbeVerdict(
            amplitude=amplitude,
            status=UNSTABLE,
            peak_ratio=math.inf,
            final_ratio=math.nan,
            runtime_seconds=time.perf_counter() - started,
            message=str(e),
        )

    status = STABLE if energy <= e0 else UNSTABLE
    return ProbeVerdict(
        amplitude=amplitude,
        status=status,
        peak_ratio=peak / e0,
        final_ratio=energy / e0,
        runtime_seconds=time.perf_counter() - started,
        message="" if status == STABLE else "no recovery by the horizon",
    )


@dataclass
class SweepResult:
    nu: float
    A_star: float | None
    verdicts: list[ProbeVerdict] = field(default_factory=list)
    bisection_tol: float = math.nan
    note: str = ""

    @property
    def found(self) -> bool:
        return self.A_star is not None

    def bracket(self) -> tuple[float, float]:
        stable = [v.amplitude for v in self.verdicts if v.status == STABLE]
        unstable = [v.amplitude for v in self.verdicts if v.status == UNSTABLE]
        return (max(stable) if stable else 0.0, min(unstable) if unstable else math.inf)


Probe = Callable[[float, float], ProbeVerdict]


def bisect_threshold(
    nu: float,
    config: ProbeConfig | None = None,
    probe: Probe | None = None,
    tol: float = BRACKET_TOL,
    max_doublings: int = MAX_DOUBLINGS,
) -> SweepResult:
    """
    Bracket and bisect the transition amplitude at one viscosity

    Starts at 0.01ν^{1/2}, doubles until a probe is unstable (halves while
    the first probe is unstable), then bisects in log space until the
    bracket width is below tol. A_star is the geometric mean of the bracket.
    """
    if not 0.0 < tol <= BRACKET_TOL:
        raise ConfigError(f"bracket tolerance must lie in (0, {BRACKET_TOL}], got {tol}")
    if probe is None:
        config = config or ProbeConfig()

        def probe(nu_, amplitude):
            return stability_probe(nu_, amplitude, config)

    result = SweepResult(nu=nu, A_star=None)

    def run(amplitude: float) -> ProbeVerdict:
        verdict = probe(nu, amplitude)
        result.verdicts.append(verdict)
        if verdict.status == INCONCLUSIVE:
            raise InconclusiveResolution(
                f"probe at A={amplitude:.4e}, ν={nu:.2e} is inconclusive ({verdict.message}); "
                f"refine the resolution (smaller dt, larger n or K)"
            )
        return verdict

    amplitude = 0.01 * math.sqrt(nu)
    first = run(amplitude)
    if first.status == STABLE:
        lo, hi = amplitude, None
        for _ in range(max_doublings):
            amplitude *= 2.0
            if run(amplitude).status == UNSTABLE:
                hi = amplitude
                break
            lo = amplitude
        if hi is None:
            result.note = "no instability found"
            logger.info(f"ν={nu:.2e}: no instability found up to A={amplitude:.3e}")
            return result
    else:
        lo, hi = None, amplitude
        for _ in range(max_doublings):
            amplitude /= 2.0
            if run(amplitude).status == STABLE:
                lo = amplitude
                break
            hi = amplitude
        if lo is None:
            result.note = "no stable amplitude found"
            return result

    while hi / lo - 1.0 > tol:
        mid = math.sqrt(lo * hi)
        if run(mid).status == STABLE:
            lo = mid
        else:
            hi = mid

    result.A_star = math.sqrt(lo * hi)
    result.bisection_tol = hi / lo - 1.0
    logger.info(f"ν={nu:.2e}: A* = {result.A_star:.4e} (bracket width {result.bisection_tol:.3%})")
    return result


@dataclass(frozen=True)
class ScalingFit:
    gamma: float
    r_squared: float
    stderr: float
    ci_low: float
    ci_high: float
    residuals: tuple[float, ...]


def scaling_fit(results: list[SweepResult], confidence: float = 0.95) -> ScalingFit:
    """Least-squares slope of log A* against log ν with a t-based confidence interval"""
    points = [(r.nu, r.A_star) for r in results if r.A_star is not None and math.isfinite(r.A_star)]
    if len(points) < 3:
        raise ConfigError(f"scaling fit needs at least 3 viscosities with finite A*, got {len(points)}")
    x = np.log([p[0] for p in points])
    y = np.log([p[1] for p in points])
    fit = stats.linregress(x, y)
    dof = len(points) - 2
    spread = stats.t.ppf(0.5 + confidence / 2.0, dof) * fit.stderr
    residuals = y - (fit.intercept + fit.slope * x)
    return ScalingFit(
        gamma=float(fit.slope),
        r_squared=float(fit.rvalue**2),
        stderr=float(fit.stderr),
        ci_low=float(fit.slope - spread),
        ci_high=float(fit.slope + spread),
        residuals=tuple(float(r) for r in residuals),
    )
