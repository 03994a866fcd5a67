"""
Nonlinear experiments: stability runs and the inequality harness
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from couette.handlers.linear import weights_for
from couette.handlers.router import Router, RunContext
from couette.numerics.cheb import build_grid
from couette.numerics.jop import OperatorCache
from couette.numerics.weights import WeightSet
from couette.services.checkpoint_service import dump_state, read_checkpoint
from couette.services.diagnostics_service import (
    GROWTH_LIMIT,
    REPORT_COLUMNS,
    EnergyHistory,
    Sample,
    bootstrap_monitor,
    budget_closure,
    compare_refinement,
    inequality_harness,
    lx_sensitivity,
)
from couette.services.flow_service import FlowState, NonlinearSolver, PerturbationConfig, init_perturbation
from couette.utils.errors import ConfigError

logger = logging.getLogger(__name__)
router = Router()

DIAG_EVERY = 10
SYNTHETIC_SAMPLES = 50
TRAJECTORY_SNAPSHOTS = 5
HARNESS_T_END = 20.0
INEQUALITY_COLUMNS = ["inequality", "coarse_max", "coarse_median", "fine_max", "fine_median", "change", "bounded"]


@dataclass
class NonlinearRun:
    history: EnergyHistory
    initial: FlowState
    state: FlowState
    terminated: bool


def run_nonlinear(
    n: int,
    K: int,
    Lx: float,
    weights: WeightSet,
    amplitude: float,
    seed: int,
    dt: float,
    t_end: float,
    initial: FlowState | None = None,
    diag_every: int = DIAG_EVERY,
) -> NonlinearRun:
    """
    Evolve a perturbation to t_end and record an EnergyReport every diag_every steps

    The run stops early once 𝓔 exceeds GROWTH_LIMIT times its initial value.
    """
    grid = build_grid(n)
    nu = weights.nu
    if initial is None:
        perturbation = PerturbationConfig(amplitude=amplitude, seed=seed, j_max=min(8, K), m=weights.m, eps=weights.eps)
        state = init_perturbation(grid, Lx, K, nu, perturbation)
    else:
        if (initial.n, initial.K, initial.Lx) != (n, K, Lx):
            raise ConfigError(
                f"checkpoint (n={initial.n}, K={initial.K}, Lx={initial.Lx}) differs from the run (n={n}, K={K}, Lx={Lx})"
            )
        state = initial
    first = state

    cache = OperatorCache(grid)
    cache.preload(state.ks[K + 1 :])
    history = EnergyHistory(grid, weights, cache)
    e0 = history.record(state).E_global
    solver = NonlinearSolver(grid, state.Lx, K, nu, dt)
    steps = int(math.ceil((t_end - state.t) / dt - 1e-9))
    terminated = False
    for i in range(1, steps + 1):
        state = solver.step(state)
        if i % diag_every == 0 or i == steps:
            report = history.record(state)
            if e0 > 0.0 and report.E_global > GROWTH_LIMIT * e0:
                logger.warning(f"Run terminated at t={state.t:.2f}: 𝓔 grew beyond {GROWTH_LIMIT}x")
                terminated = True
                break
    logger.info(f"Nonlinear run done: Lx={Lx}, t={state.t:.2f}, {len(history)} reports")
    return NonlinearRun(history=history, initial=first, state=state, terminated=terminated)


def closure_job(n: int, state: FlowState, weights: WeightSet, dt: float):
    grid = build_grid(n)
    return budget_closure(grid, state, weights, OperatorCache(grid), dt)


@router.experiment("nonlinear-run")
async def nonlinear_run(ctx: RunContext):
    """Stability run from ε0 ν^{1/2}-scaled data (or a checkpoint), with the optional Lx sweep"""
    cfg = ctx.config
    weights = weights_for(ctx, cfg.nu)
    if cfg.resume and cfg.lx_list:
        raise ConfigError("a resumed run cannot sweep Lx")
    initial = await read_checkpoint(cfg.resume) if cfg.resume else None
    t_end = cfg.horizon if initial is None else initial.t + cfg.horizon

    lx_values = sorted(set(cfg.lx_list) | {cfg.Lx}) if cfg.lx_list else [cfg.Lx]
    runs = await ctx.queue.map(
        lambda lx: run_nonlinear(cfg.n, cfg.K, lx, weights, cfg.amplitude, cfg.seed, cfg.dt, t_end, initial=initial),
        lx_values,
        label="nonlinear run",
    )
    by_lx = dict(zip(lx_values, runs))

    for lx, run in by_lx.items():
        name = "energy.csv" if lx == cfg.Lx else f"energy_Lx{lx:g}.csv"
        await ctx.writer.write_csv(name, REPORT_COLUMNS, [r.row() for r in run.history.reports])

    main = by_lx[cfg.Lx]
    await ctx.writer.write_bytes("final.ctck", dump_state(main.state))
    reports = main.history.reports
    verdict = bootstrap_monitor(reports, cfg.nu, cfg.eps0)
    closure = await ctx.queue.run(closure_job, cfg.n, main.initial, weights, cfg.dt, label="budget closure")

    e0 = reports[0].E_global
    ctx.summary.update(
        {
            "amplitude": cfg.amplitude,
            "t_final": reports[-1].t,
            "terminated": main.terminated,
            "sup_E_ratio": max(r.E_global for r in reports) / e0 if e0 > 0.0 else 0.0,
            "final_E_ratio": reports[-1].E_global / e0 if e0 > 0.0 else 0.0,
            "bootstrap_c1": verdict.c1,
            "growth_ratio": verdict.growth_ratio,
            "stable": verdict.stable and not main.terminated,
            "E_total_over_eps0_nu": verdict.level,
            "intD4_over_E0": reports[-1].D4_time_integral / e0 if e0 > 0.0 else 0.0,
            "budget_closure_defect": closure.defect,
        }
    )
    if len(by_lx) > 1:
        sensitivity = lx_sensitivity(
            {lx: (run.history.reports[-1].D4_time_integral, run.history.reports[0].E_global) for lx, run in by_lx.items()}
        )
        ctx.summary["lx_sensitivity"] = {
            "constants": sensitivity.constants,
            "drift": sensitivity.drift,
            "stable": sensitivity.stable,
        }
    if main.terminated:
        ctx.notes.append(f"run terminated early: 𝓔 exceeded {GROWTH_LIMIT}x its initial value")


def build_samples(
    n: int, K: int, Lx: float, weights: WeightSet, eps0: float, seed: int, count: int, dt: float, t_end: float
) -> list[Sample]:
    """
    Synthetic spectra at random amplitudes around ε0 ν^{1/2} plus snapshots of two
    stable trajectories; the same seeds give the same fields at every resolution
    """
    grid = build_grid(n)
    nu = weights.nu
    base = eps0 * math.sqrt(nu)
    rng = np.random.default_rng(seed)
    samples = []
    for i in range(count):
        amplitude = base * 10.0 ** rng.uniform(-1.0, 1.0)
        perturbation = PerturbationConfig(amplitude=amplitude, seed=seed + i, j_max=min(8, K), m=weights.m, eps=weights.eps)
        samples.append(Sample(grid=grid, state=init_perturbation(grid, Lx, K, nu, perturbation)))

    diag_every = max(1, int(round(t_end / dt / TRAJECTORY_SNAPSHOTS)))
    for offset in (10_000, 10_001):
        perturbation = PerturbationConfig(amplitude=base, seed=seed + offset, j_max=min(8, K), m=weights.m, eps=weights.eps)
        state = init_perturbation(grid, Lx, K, nu, perturbation)
        solver = NonlinearSolver(grid, Lx, K, nu, dt)
        samples.append(Sample(grid=grid, state=state))
        for i in range(1, int(round(t_end / dt)) + 1):
            state = solver.step(state)
            if i % diag_every == 0:
                samples.append(Sample(grid=grid, state=state))
    return samples


def harness_job(n: int, K: int, Lx: float, weights: WeightSet, eps0: float, seed: int, dt: float, t_end: float):
    samples = build_samples(n, K, Lx, weights, eps0, seed, SYNTHETIC_SAMPLES, dt, t_end)
    return inequality_harness(samples, weights)


def refined(n: int, K: int) -> tuple[int, int]:
    """(n, K) -> (3n/2, 3K/2), n kept even"""
    fine_n = 3 * n // 2
    return fine_n + (fine_n % 2), 3 * K // 2


@router.experiment("inequalities")
async def inequalities(ctx: RunContext):
    """Empirical LHS/RHS ratios at (n, K) and at 1.5x resolution"""
    cfg = ctx.config
    weights = weights_for(ctx, cfg.nu)
    t_end = cfg.t_end if cfg.t_end is not None else HARNESS_T_END
    fine_n, fine_K = refined(cfg.n, cfg.K)
    coarse, fine = await ctx.queue.map(
        lambda res: harness_job(res[0], res[1], cfg.Lx, weights, cfg.eps0, cfg.seed, cfg.dt, t_end),
        [(cfg.n, cfg.K), (fine_n, fine_K)],
        label="inequality harness",
    )
    verdicts = compare_refinement(coarse, fine)
    rows = []
    for name, verdict in verdicts.items():
        rows.append(
            [name, coarse[name].max, coarse[name].median, fine[name].max, fine[name].median, verdict.change, verdict.bounded]
        )
    await ctx.writer.write_csv("inequalities.csv", INEQUALITY_COLUMNS, rows)

    stable = await ctx.queue.run(
        run_nonlinear, cfg.n, cfg.K, cfg.Lx, weights, cfg.amplitude, cfg.seed, cfg.dt, t_end, label="bootstrap run"
    )
    verdict = bootstrap_monitor(stable.history.reports, cfg.nu, cfg.eps0)
    ctx.summary.update(
        {
            "resolutions": [[cfg.n, cfg.K], [fine_n, fine_K]],
            "all_bounded": all(v.bounded for v in verdicts.values()),
            "unbounded": sorted(name for name, v in verdicts.items() if not v.bounded),
            "bootstrap_c1": verdict.c1,
            "bootstrap_stable": verdict.stable,
        }
    )
