"""
threshold-sweep: bisection of the transition amplitude per viscosity and the log-log fit
"""
import logging

import config
from couette.handlers.linear import weights_for
from couette.handlers.router import Router, RunContext
from couette.services.threshold_service import ProbeConfig, bisect_threshold, scaling_fit, stability_probe
from couette.utils.errors import ConfigError

logger = logging.getLogger(__name__)
router = Router()

THRESHOLD_COLUMNS = ["nu", "A", "verdict", "peak_ratio", "runtime_seconds"]


def probe_config(ctx: RunContext) -> ProbeConfig:
    cfg = ctx.config
    return ProbeConfig(
        n=cfg.n, K=cfg.K, Lx=cfg.Lx, m=cfg.m, eps=cfg.eps, dt=cfg.dt, seed=cfg.seed, j_max=min(8, cfg.K), horizon=cfg.t_end
    )


@router.experiment("threshold-sweep")
async def threshold_sweep(ctx: RunContext):
    """One bisection per viscosity (in parallel), then the exponent fit"""
    nus = list(ctx.config.nu_list) or list(config.SWEEP_NUS)
    probe_cfg = probe_config(ctx)

    def sweep(nu: float):
        weights = weights_for(ctx, nu)
        return bisect_threshold(nu, probe=lambda nu_, amplitude: stability_probe(nu_, amplitude, probe_cfg, weights))

    results = await ctx.queue.map(sweep, nus, label="threshold bisection")

    rows = []
    for result in results:
        for verdict in result.verdicts:
            rows.append([result.nu, verdict.amplitude, verdict.status, verdict.peak_ratio, verdict.runtime_seconds])
    await ctx.writer.write_csv("threshold.csv", THRESHOLD_COLUMNS, rows)

    per_nu = [
        {
            "nu": r.nu,
            "A_star": r.A_star,
            "A_star_over_sqrt_nu": r.A_star / r.nu**0.5 if r.found else None,
            "bisection_tol": r.bisection_tol if r.found else None,
            "note": r.note or None,
        }
        for r in results
    ]
    summary = {"sweep": per_nu}
    try:
        fit = scaling_fit(results)
        summary["fit"] = {
            "gamma": fit.gamma,
            "r_squared": fit.r_squared,
            "stderr": fit.stderr,
            "ci95": [fit.ci_low, fit.ci_high],
            "residuals": list(fit.residuals),
        }
    except ConfigError as e:
        logger.info(f"No exponent fit: {e}")
        summary["fit"] = None
        ctx.notes.append(str(e))
    await ctx.writer.write_json("threshold.json", summary)
    ctx.summary.update(summary)
