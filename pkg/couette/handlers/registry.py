"""
Run registry listing: recent runs, one run's artifacts and CSV row counts
"""
import json
import logging
from pathlib import Path
from typing import List, Optional

from couette.database.base import RunStoreInterface
from couette.services.output_service import read_csv

logger = logging.getLogger(__name__)


def _format_run(run: dict) -> str:
    wall = run.get("wall_time")
    wall_text = f"{wall:.1f}s" if wall is not None else "-"
    exit_code = run.get("exit_code")
    return (
        f"{run['run_id']}  {run['experiment']:<16} {run['status']:<8} "
        f"exit={exit_code if exit_code is not None else '-'}  {wall_text:>8}  {run.get('created_at') or ''}"
    )


async def recent_runs(store: RunStoreInterface, experiment: Optional[str] = None, limit: int = 20) -> List[str]:
    """One line per run, most recent first"""
    await store.init_db()
    runs = await store.list_runs(experiment, limit)
    if not runs:
        return ["no runs registered"]
    return [_format_run(run) for run in runs]


async def run_details(store: RunStoreInterface, run_id: str) -> List[str]:
    """
    A run and its artifacts

    CSV artifacts still present in the run's output directory are listed
    with their row count.
    """
    await store.init_db()
    run = await store.get_run(run_id)
    if run is None:
        return [f"run {run_id} not found"]
    lines = [_format_run(run)]
    try:
        out_dir = Path(json.loads(run.get("config_json") or "{}").get("out", "."))
    except ValueError:
        out_dir = Path(".")
    for artifact in await store.get_artifacts(run_id):
        path = out_dir / artifact["name"]
        detail = ""
        if artifact["kind"] == "csv" and path.exists():
            try:
                detail = f"  {len(await read_csv(str(path)))} rows"
            except (OSError, ValueError) as e:
                logger.warning(f"Cannot read {path}: {e}")
                detail = "  unreadable"
        elif not path.exists():
            detail = "  missing"
        lines.append(f"  {artifact['name']} ({artifact['kind']}){detail}")
    return lines
