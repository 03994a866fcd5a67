"""
Failure records for aborted runs
Turns an exception into the machine-readable failure.json payload
"""
import logging
import traceback
from datetime import datetime, timezone
from typing import Any, Dict, Optional

from couette.utils.errors import exit_code_for

logger = logging.getLogger(__name__)

TRACEBACK_LIMIT = 1500
MESSAGE_LIMIT = 500


def build_failure_record(
    error: BaseException,
    context: str = "",
    experiment: Optional[str] = None,
    partial_artifacts: Optional[list] = None,
) -> Dict[str, Any]:
    """
    Describe a failed run

    Args:
        error: The exception that aborted the run
        context: What the run was doing when it failed
        experiment: Experiment name
        partial_artifacts: Files written before the failure

    Returns:
        Dict ready to be written as JSON
    """
    timestamp = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    error_type = type(error).__name__
    error_msg = str(error)

    # Short traceback (last frames only)
    tb_lines = traceback.format_exception(type(error), error, error.__traceback__)
    tb_short = "".join(tb_lines[-5:]) if len(tb_lines) > 5 else "".join(tb_lines)
    if len(tb_short) > TRACEBACK_LIMIT:
        tb_short = tb_short[:TRACEBACK_LIMIT] + "..."

    record = {
        "timestamp": timestamp,
        "experiment": experiment,
        "error_type": error_type,
        "message": error_msg[:MESSAGE_LIMIT],
        "context": context,
        "exit_code": exit_code_for(error),
        "traceback": tb_short,
        "partial_artifacts": list(partial_artifacts or []),
    }
    logger.error(f"Run failed ({error_type}): {error_msg[:200]} [{context}]")
    return record
