"""
Experiment dispatch: runs a handler, writes the manifest and registers the run
"""
import json
import logging
import time
import uuid
from pathlib import Path
from typing import Optional

import config
from couette.database.base import RunStoreInterface
from couette.database.models import RunStore
from couette.handlers import linear, nonlinear, operator, threshold
from couette.handlers.router import Router, RunContext
from couette.services.failure_record import build_failure_record
from couette.services.output_service import OutputWriter, read_json
from couette.services.run_queue import make_queue
from couette.services.settings_service import RunConfig
from couette.utils.errors import ConfigError, exit_code_for

logger = logging.getLogger(__name__)

router = Router()
router.include_router(operator.router)
router.include_router(linear.router)
router.include_router(nonlinear.router)
router.include_router(threshold.router)

# Keys of a constants.json accepted by WeightSet
CONSTANT_KEYS = ("c_alpha", "c_beta", "c_tau", "c0", "c", "cross_sign")


async def load_constants(path: str) -> dict:
    """Energy constants from a calibrate run; unknown keys are ignored"""
    try:
        payload = await read_json(path)
    except (OSError, ValueError) as e:
        raise ConfigError(f"cannot read constants from {path}: {e}") from e
    constants = {key: float(payload[key]) for key in CONSTANT_KEYS if key in payload}
    if not constants:
        raise ConfigError(f"{path} holds no energy constants")
    logger.info(f"Loaded energy constants from {path}: {constants}")
    return constants


async def _register(store: Optional[RunStoreInterface], action: str, *args) -> None:
    """Registry errors are logged, never fatal to the run"""
    if store is None:
        return
    try:
        await getattr(store, action)(*args)
    except Exception as e:
        logger.error(f"Run registry {action} failed: {e}", exc_info=True)


async def dispatch(run_config: RunConfig, store: Optional[RunStoreInterface] = None) -> int:
    """
    Run one experiment end to end

    Args:
        run_config: Validated configuration
        store: Run registry; defaults to the SQLite store at config.RUNS_DB

    Returns:
        Process exit code (0 success, 1 numerical failure, 2 usage, 3 inconclusive)
    """
    if store is None:
        store = RunStore(config.RUNS_DB)
    await _register(store, "init_db")

    run_id = uuid.uuid4().hex
    handler = router.resolve(run_config.experiment)
    writer = OutputWriter(run_config.out)
    ctx = RunContext(config=run_config, writer=writer, queue=make_queue(run_config.threads), run_id=run_id)
    await _register(
        store, "create_run", run_id, run_config.experiment, json.dumps(run_config.echo(), sort_keys=True), config.LAB_VERSION
    )

    logger.info(f"Starting {run_config.experiment} (run {run_id}) -> {Path(run_config.out).resolve()}")
    started = time.perf_counter()
    failure = None
    try:
        if run_config.constants:
            ctx.constants.update(await load_constants(run_config.constants))
        await handler(ctx)
        exit_code = 0
    except Exception as e:
        failure = build_failure_record(e, context=f"{run_config.experiment} handler", experiment=run_config.experiment,
                                       partial_artifacts=writer.artifacts)
        exit_code = exit_code_for(e)
        await writer.write_json(config.FAILURE_NAME, failure)
    wall_time = time.perf_counter() - started

    manifest = {
        "run_id": run_id,
        "experiment": run_config.experiment,
        "lab_version": config.LAB_VERSION,
        "config": run_config.echo(),
        "constants": ctx.constants or dict(config.ENERGY_CONSTANTS),
        "summary": ctx.summary,
        "notes": ctx.notes,
        "status": "success" if failure is None else "failed",
        "exit_code": exit_code,
        "partial": failure is not None,
        "wall_time_seconds": wall_time,
        "artifacts": list(writer.artifacts),
    }
    await writer.write_json(config.MANIFEST_NAME, manifest)

    for name in writer.artifacts:
        await _register(store, "add_artifact", run_id, name, Path(name).suffix.lstrip(".") or "file")
    await _register(store, "finish_run", run_id, manifest["status"], wall_time, exit_code)

    if failure is None:
        logger.info(f"{run_config.experiment} finished in {wall_time:.1f}s ({len(writer.artifacts)} artifacts)")
    else:
        logger.error(f"{run_config.experiment} failed after {wall_time:.1f}s with exit code {exit_code}")
    return exit_code
