"""
Couette stability lab - Main entry point
Batch experiments for 2D Navier-Stokes perturbations of Couette flow in a channel
"""
import argparse
import asyncio
import logging
import sys

import config
from couette.database.models import RunStore
from couette.handlers.dispatch import dispatch
from couette.handlers.registry import recent_runs, run_details
from couette.services.settings_service import EXPERIMENTS, parse_config
from couette.utils.errors import ConfigError, LabError, exit_code_for

# Configure logging
logging.basicConfig(
    level=getattr(logging, config.LOG_LEVEL.upper(), logging.INFO),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="couette", description="Couette flow stability experiments")
    parser.add_argument("experiment", choices=EXPERIMENTS, help="experiment to run")
    parser.add_argument("--config", dest="config_path", metavar="PATH", help="KEY: value configuration file")
    parser.add_argument("--nu", type=float, help="viscosity in (0, 1)")
    parser.add_argument("--n", type=int, help="Chebyshev polynomial degree (even)")
    parser.add_argument("--K", type=int, help="number of positive x-modes")
    parser.add_argument("--Lx", type=float, help="box length (>= 50)")
    parser.add_argument("--m", type=float, help="Sobolev exponent (> 1)")
    parser.add_argument("--eps", type=float, help="low-frequency exponent in (0, 1/12)")
    parser.add_argument("--A", type=float, help="initial amplitude in the initial-data norm")
    parser.add_argument("--eps0", type=float, help="amplitude prefactor: A = eps0 * nu^(1/2)")
    parser.add_argument("--dt", type=float, help="time step")
    parser.add_argument("--t-end", dest="t_end", type=float, help="final time")
    parser.add_argument("--k", type=float, help="wavenumber of a linear-run")
    parser.add_argument("--seed", type=int, help="random seed")
    parser.add_argument("--nu-list", dest="nu_list", type=float, nargs="+", help="viscosities for sweeps")
    parser.add_argument("--lx-list", dest="lx_list", type=float, nargs="+", help="box lengths for the Lx sensitivity run")
    parser.add_argument("--constants", metavar="JSON", help="energy constants written by a calibrate run")
    parser.add_argument("--resume", metavar="CHECKPOINT", help="start a nonlinear-run from a checkpoint")
    parser.add_argument("--out", metavar="DIR", help="output directory (default: $COUETTE_OUTPUT_ROOT)")
    parser.add_argument("--threads", type=int, help="worker threads for parameter grids")
    return parser


def build_runs_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="couette runs", description="List registered runs")
    parser.add_argument("--experiment", choices=EXPERIMENTS, help="only runs of this experiment")
    parser.add_argument("--limit", type=int, default=20, help="number of runs to list")
    parser.add_argument("--run", dest="run_id", metavar="ID", help="show one run with its artifacts")
    parser.add_argument("--db", default=None, metavar="PATH", help="registry database (default: $COUETTE_RUNS_DB)")
    return parser


def list_runs_command(argv) -> int:
    """The `runs` command: print the registry and return the exit code"""
    args = build_runs_parser().parse_args(argv)
    if args.limit < 1:
        print("couette runs: error: --limit must be >= 1", file=sys.stderr)
        return 2
    store = RunStore(args.db or config.RUNS_DB)
    if args.run_id:
        lines = asyncio.run(run_details(store, args.run_id))
    else:
        lines = asyncio.run(recent_runs(store, args.experiment, args.limit))
    print("\n".join(lines))
    return 0


def main(argv=None) -> int:
    """Parse arguments, run the experiment and return the exit code"""
    argv = sys.argv[1:] if argv is None else list(argv)
    if argv and argv[0] == "runs":
        return list_runs_command(argv[1:])
    args = build_parser().parse_args(argv)
    overrides = {key: value for key, value in vars(args).items() if key not in ("experiment", "config_path")}
    try:
        run_config = parse_config(args.experiment, args.config_path, overrides)
    except ConfigError as e:
        logger.error(f"Invalid configuration: {e}")
        print(f"couette: error: {e}", file=sys.stderr)
        return exit_code_for(e)

    try:
        return asyncio.run(dispatch(run_config))
    except LabError as e:
        logger.error(f"{args.experiment} aborted: {e}", exc_info=True)
        return exit_code_for(e)
    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        return 130


if __name__ == "__main__":
    sys.exit(main())
