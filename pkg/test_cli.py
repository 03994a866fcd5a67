"""
Tests for the command-line entry point and the experiment dispatcher
"""
import asyncio
import json

import pytest

import config
from couette.database.models import RunStore
from couette.handlers import dispatch as dispatch_module
from couette.handlers.dispatch import dispatch
from couette.handlers.router import Router
from couette.services.settings_service import EXPERIMENTS, RunConfig
from couette.utils.errors import ConfigError, NumericalFailure
from main import build_parser, main


def test_every_experiment_has_a_handler():
    assert dispatch_module.router.names() == sorted(EXPERIMENTS)


def test_unknown_experiment_exits_with_usage_error():
    with pytest.raises(SystemExit) as exc:
        build_parser().parse_args(["bogus"])
    assert exc.value.code == 2


def test_parser_reads_lists_and_dashed_flags():
    args = build_parser().parse_args(["threshold-sweep", "--nu-list", "1e-2", "1e-3", "--t-end", "5"])
    assert args.nu_list == [1e-2, 1e-3]
    assert args.t_end == 5.0
    assert args.config_path is None


def test_invalid_configuration_returns_two(tmp_path, capsys):
    assert main(["linear-run", "--eps", "0.2", "--out", str(tmp_path)]) == 2
    assert "ε must lie in" in capsys.readouterr().err


def test_router_rejects_duplicates():
    router = Router()

    @router.experiment("kelvin-check")
    async def first(ctx):
        pass

    with pytest.raises(ConfigError):
        router.experiment("kelvin-check")(first)
    with pytest.raises(ConfigError):
        router.resolve("calibrate")


def test_dispatch_writes_manifest(monkeypatch, out_dir, tmp_path):
    async def handler(ctx):
        ctx.summary["answer"] = 42
        await ctx.writer.write_csv("values.csv", ["x"], [[1]])

    monkeypatch.setitem(dispatch_module.router.handlers, "kelvin-check", handler)
    store = RunStore(str(tmp_path / "runs.db"))
    run_config = RunConfig(experiment="kelvin-check", out=str(out_dir))
    assert asyncio.run(dispatch(run_config, store=store)) == 0

    manifest = json.loads((out_dir / config.MANIFEST_NAME).read_text())
    assert manifest["status"] == "success"
    assert manifest["summary"] == {"answer": 42}
    assert manifest["artifacts"] == ["values.csv"]
    assert manifest["lab_version"] == config.LAB_VERSION
    assert manifest["config"]["experiment"] == "kelvin-check"

    run = asyncio.run(store.get_run(manifest["run_id"]))
    assert run["status"] == "success"


def test_failed_handler_leaves_a_failure_record(monkeypatch, out_dir, tmp_path):
    async def handler(ctx):
        await ctx.writer.write_csv("partial.csv", ["x"], [[1]])
        raise NumericalFailure("singular solve")

    monkeypatch.setitem(dispatch_module.router.handlers, "kelvin-check", handler)
    run_config = RunConfig(experiment="kelvin-check", out=str(out_dir))
    assert asyncio.run(dispatch(run_config, store=RunStore(str(tmp_path / "runs.db")))) == 1

    failure = json.loads((out_dir / config.FAILURE_NAME).read_text())
    assert failure["error_type"] == "NumericalFailure"
    assert failure["partial_artifacts"] == ["partial.csv"]
    manifest = json.loads((out_dir / config.MANIFEST_NAME).read_text())
    assert manifest["partial"] is True
    assert manifest["exit_code"] == 1


def test_verify_operator_end_to_end(monkeypatch, out_dir, tmp_path, capsys):
    monkeypatch.setattr(config, "RUNS_DB", str(tmp_path / "runs.db"))
    assert main(["verify-operator", "--n", "32", "--out", str(out_dir), "--threads", "2"]) == 0

    lines = (out_dir / "operator.csv").read_text().splitlines()
    assert lines[0] == "k,n,norm,commutator_ratio,adjoint_defect,commutator_interior,quadrature_defect"
    assert len(lines) == 1 + config.OPERATOR_K_POINTS
    manifest = json.loads((out_dir / config.MANIFEST_NAME).read_text())
    assert manifest["summary"]["n"] == 32
    assert manifest["summary"]["sup_norm"] > 0.0

    capsys.readouterr()
    assert main(["runs", "--experiment", "verify-operator"]) == 0
    listing = capsys.readouterr().out
    assert manifest["run_id"] in listing
    assert "success" in listing
    assert main(["runs", "--run", manifest["run_id"]]) == 0
    details = capsys.readouterr().out
    assert f"operator.csv (csv)  {config.OPERATOR_K_POINTS} rows" in details


@pytest.mark.slow
def test_kelvin_check_end_to_end(monkeypatch, out_dir, tmp_path):
    monkeypatch.setattr(config, "RUNS_DB", str(tmp_path / "runs.db"))
    assert main(["kelvin-check", "--n", "16", "--nu-list", "1e-3", "1e-4", "--out", str(out_dir)]) == 0
    assert (out_dir / "kelvin.csv").exists()
    assert (out_dir / "kelvin_oracle.csv").exists()
    scaling = (out_dir / "scaling.csv").read_text().splitlines()
    assert scaling[0] == "k,nu,efold_time,timescale,normalized"
    assert len(scaling) == 1 + 3 * 2
    kelvin = (out_dir / "kelvin.csv").read_text()
    assert "efold_exponent_k=1," in kelvin


def test_calibrated_constants_reach_the_handler(monkeypatch, out_dir, tmp_path):
    seen = {}

    async def handler(ctx):
        seen.update(ctx.constants)

    path = tmp_path / "constants.json"
    path.write_text(json.dumps({"c_alpha": 0.02, "c0": 0.05, "note": "ignored"}))
    monkeypatch.setitem(dispatch_module.router.handlers, "kelvin-check", handler)
    run_config = RunConfig(experiment="kelvin-check", out=str(out_dir), constants=str(path))
    assert asyncio.run(dispatch(run_config, store=RunStore(str(tmp_path / "runs.db")))) == 0
    assert seen == {"c_alpha": 0.02, "c0": 0.05}
    manifest = json.loads((out_dir / config.MANIFEST_NAME).read_text())
    assert manifest["constants"] == {"c_alpha": 0.02, "c0": 0.05}


def test_missing_constants_file_is_a_usage_error(monkeypatch, out_dir, tmp_path):
    async def handler(ctx):
        pass

    monkeypatch.setitem(dispatch_module.router.handlers, "kelvin-check", handler)
    run_config = RunConfig(experiment="kelvin-check", out=str(out_dir), constants=str(tmp_path / "absent.json"))
    assert asyncio.run(dispatch(run_config, store=RunStore(str(tmp_path / "runs.db")))) == 2


def test_runs_listing_of_an_empty_registry(tmp_path, capsys):
    assert main(["runs", "--db", str(tmp_path / "empty.db")]) == 0
    assert "no runs registered" in capsys.readouterr().out
    assert main(["runs", "--db", str(tmp_path / "empty.db"), "--run", "absent"]) == 0
    assert "run absent not found" in capsys.readouterr().out
    assert main(["runs", "--db", str(tmp_path / "empty.db"), "--limit", "0"]) == 2
