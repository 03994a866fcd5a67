"""
verify-operator: boundedness, commutator and self-adjointness sweep of J_k
"""
import logging

import numpy as np

import config
from couette.handlers.router import Router, RunContext
from couette.numerics.cheb import build_grid
from couette.numerics.jop import (
    adjoint_defect,
    assemble_j,
    commutator_norm,
    interior_commutator_norm,
    operator_norm,
)

logger = logging.getLogger(__name__)
router = Router()

OPERATOR_COLUMNS = [
    "k",
    "n",
    "norm",
    "commutator_ratio",
    "adjoint_defect",
    "commutator_interior",
    "quadrature_defect",
]
COMMUTATOR_RANGE = (0.1, 100.0)


def operator_wavenumbers() -> np.ndarray:
    lo, hi = config.OPERATOR_K_RANGE
    return np.logspace(np.log10(lo), np.log10(hi), config.OPERATOR_K_POINTS)


def measure_operator(n: int, k: float) -> list:
    """One CSV row of operator measurements at (n, k)"""
    grid = build_grid(n)
    J = assemble_j(grid, k)
    norm = operator_norm(J, grid)
    defect = adjoint_defect(J, grid)
    relative = defect / norm if norm > 0.0 else defect
    return [
        float(k),
        n,
        norm,
        commutator_norm(J, grid),
        relative,
        interior_commutator_norm(J, grid),
        J.quadrature_defect,
    ]


@router.experiment("verify-operator")
async def verify_operator(ctx: RunContext):
    """Sweep k over the log grid at the configured n and summarize the envelopes"""
    n = ctx.config.n
    ks = operator_wavenumbers()
    logger.info(f"verify-operator: {len(ks)} wavenumbers at n={n}")
    rows = await ctx.queue.map(lambda k: measure_operator(n, k), ks, label="operator")
    await ctx.writer.write_csv("operator.csv", OPERATOR_COLUMNS, rows)

    lo, hi = COMMUTATOR_RANGE
    commutators = [row[3] for row in rows if lo <= row[0] <= hi]
    ctx.summary.update(
        {
            "n": n,
            "sup_norm": max(row[2] for row in rows),
            "sup_commutator_ratio": max(commutators) if commutators else None,
            "max_adjoint_defect": max(row[4] for row in rows),
            "max_quadrature_defect": max(row[6] for row in rows),
        }
    )
