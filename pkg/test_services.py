"""
Tests for configuration, artifact output, checkpoints, the run queue and the run registry
"""
import asyncio
import math
import threading

import numpy as np
import pytest

import config
from couette.database.models import RunStore
from couette.services.checkpoint_service import HEADER, dump_state, load_state, read_checkpoint
from couette.services.failure_record import build_failure_record
from couette.services.flow_service import PerturbationConfig, init_perturbation
from couette.services.output_service import OutputWriter, format_value, read_csv, read_json, render_csv
from couette.services.run_queue import RunQueue, make_queue
from couette.services.settings_service import RunConfig, SettingsService, parse_config
from couette.utils.errors import (
    CFLViolation,
    ConfigError,
    InconclusiveResolution,
    NumericalFailure,
    ShapeMismatch,
    exit_code_for,
)


# Settings

def test_empty_file_gives_defaults(tmp_path):
    path = tmp_path / "empty.cfg"
    path.write_text("# nothing here\n")
    cfg = parse_config("nonlinear-run", str(path), service=SettingsService())
    assert cfg.n == config.DEFAULT_N
    assert cfg.nu == config.DEFAULT_NU
    assert cfg.amplitude == pytest.approx(config.DEFAULT_EPS0 * math.sqrt(config.DEFAULT_NU))
    assert cfg.horizon == pytest.approx(3.0 * config.DEFAULT_NU ** (-1.0 / 3.0))


def test_file_values_and_flag_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("nu: 1e-2\nn = 48  # finer\n---\nt-end: 5\nnu-list: 1e-2, 1e-3\n")
    cfg = parse_config("threshold-sweep", str(path), {"n": 64, "seed": None}, service=SettingsService())
    assert cfg.nu == 1e-2
    assert cfg.n == 64
    assert cfg.t_end == 5.0
    assert cfg.nu_list == (1e-2, 1e-3)
    assert cfg.seed == 0


def test_out_of_range_epsilon_is_rejected(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("eps: 0.2\n")
    with pytest.raises(ConfigError, match="ε must lie in"):
        parse_config("linear-run", str(path), service=SettingsService())


def test_unknown_key_and_malformed_line(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("colour: blue\n")
    with pytest.raises(ConfigError, match="unknown configuration key"):
        parse_config("linear-run", str(path), service=SettingsService())
    path.write_text("just words\n")
    with pytest.raises(ConfigError):
        parse_config("linear-run", str(path), service=SettingsService())


def test_settings_are_cached_until_cleared(tmp_path):
    service = SettingsService()
    path = tmp_path / "run.cfg"
    path.write_text("nu: 1e-2\n")
    assert service.read_settings_file(str(path)) == {"nu": "1e-2"}
    path.write_text("nu: 1e-3\n")
    assert service.read_settings_file(str(path)) == {"nu": "1e-2"}
    service.clear_cache()
    assert service.read_settings_file(str(path)) == {"nu": "1e-3"}


def test_operator_experiments_need_fine_grids():
    with pytest.raises(ConfigError):
        RunConfig(experiment="verify-operator", n=16)
    assert RunConfig(experiment="kelvin-check", n=16).n == 16
    with pytest.raises(ConfigError):
        RunConfig(experiment="bogus")
    with pytest.raises(ConfigError):
        RunConfig(experiment="nonlinear-run", lx_list=(40.0,))


def test_echo_is_plain_data():
    echo = RunConfig(experiment="threshold-sweep", nu_list=(1e-3,)).echo()
    assert echo["nu_list"] == [1e-3]
    assert echo["experiment"] == "threshold-sweep"


# Output

def test_format_value():
    assert format_value(0.1) == "0.10000000000000001"
    assert format_value(float("nan")) == "nan"
    assert format_value(-math.inf) == "-inf"
    assert format_value(True) == "true"
    assert format_value(np.int64(3)) == "3"
    assert format_value(None) == ""


def test_render_csv_checks_row_length():
    assert render_csv(["a", "b"], [[1, 2.5]]) == "a,b\n1,2.5\n"
    with pytest.raises(ValueError):
        render_csv(["a", "b"], [[1]])


def test_writer_round_trip(out_dir):
    async def scenario():
        writer = OutputWriter(str(out_dir))
        await writer.write_csv("table.csv", ["x", "y"], [[1, 0.5], [2, math.inf]])
        await writer.append_csv("log.csv", ["step"], [1])
        await writer.append_csv("log.csv", ["step"], [2])
        await writer.write_json("summary.json", {"value": np.float64(0.25), "flag": np.bool_(True), "bad": math.nan})
        rows = await read_csv(str(writer.path("table.csv")))
        log = await read_csv(str(writer.path("log.csv")))
        summary = await read_json(str(writer.path("summary.json")))
        return writer, rows, log, summary

    writer, rows, log, summary = asyncio.run(scenario())
    assert rows == [{"x": "1", "y": "0.5"}, {"x": "2", "y": "inf"}]
    assert [r["step"] for r in log] == ["1", "2"]
    assert summary == {"bad": "nan", "flag": True, "value": 0.25}
    assert writer.artifacts == ["table.csv", "log.csv", "summary.json"]


# Checkpoints

def test_checkpoint_round_trip(grid32, tmp_path):
    state = init_perturbation(grid32, 60.0, 4, 1e-3, PerturbationConfig(amplitude=0.01, j_max=4, p_max=3))
    state.t = 1.25
    data = dump_state(state)
    assert len(data) == HEADER.size + 16 * 9 * 33
    restored = load_state(data)
    np.testing.assert_array_equal(restored.modes, state.modes)
    assert (restored.Lx, restored.K, restored.n, restored.nu, restored.t) == (60.0, 4, 32, 1e-3, 1.25)

    path = tmp_path / "state.ctck"
    path.write_bytes(data)
    from_file = asyncio.run(read_checkpoint(str(path)))
    np.testing.assert_array_equal(from_file.modes, state.modes)


def test_corrupt_checkpoints_are_rejected(grid32):
    state = init_perturbation(grid32, 60.0, 4, 1e-3, PerturbationConfig(amplitude=0.01, j_max=4, p_max=3))
    data = dump_state(state)
    with pytest.raises(ConfigError):
        load_state(b"XXXX" + data[4:])
    with pytest.raises(ShapeMismatch):
        load_state(data[:-16])
    with pytest.raises(ShapeMismatch):
        load_state(data[:10])


# Run queue

def test_queue_keeps_submission_order():
    async def scenario():
        queue = RunQueue(max_concurrent=3)
        results = await queue.map(lambda x: x * x, range(6), label="square")
        return queue, results

    queue, results = asyncio.run(scenario())
    assert results == [0, 1, 4, 9, 16, 25]
    assert queue.completed == 6
    assert queue.queue_size == 0


def test_queue_runs_jobs_off_the_event_loop():
    async def scenario():
        return await make_queue(2).run(threading.get_ident, label="ident")

    assert asyncio.run(scenario()) != threading.get_ident()


def test_queue_needs_a_slot():
    with pytest.raises(ValueError):
        RunQueue(max_concurrent=0)


# Errors and failure records

def test_exit_codes():
    assert exit_code_for(ConfigError("x")) == 2
    assert exit_code_for(NumericalFailure("x")) == 1
    assert exit_code_for(InconclusiveResolution("x")) == 3
    assert exit_code_for(CFLViolation("x")) == 3
    assert exit_code_for(RuntimeError("x")) == 1


def test_failure_record():
    try:
        raise NumericalFailure("y" * 900)
    except NumericalFailure as e:
        record = build_failure_record(e, context="probe", experiment="threshold-sweep", partial_artifacts=["a.csv"])
    assert record["error_type"] == "NumericalFailure"
    assert record["exit_code"] == 1
    assert len(record["message"]) == 500
    assert record["partial_artifacts"] == ["a.csv"]
    assert "NumericalFailure" in record["traceback"]


# Run registry

def test_run_store_lifecycle(tmp_path):
    async def scenario():
        store = RunStore(str(tmp_path / "runs.db"))
        await store.init_db()
        created = await store.create_run("r1", "kelvin-check", "{}", "0.0")
        duplicate = await store.create_run("r1", "kelvin-check", "{}", "0.0")
        await store.add_artifact("r1", "kelvin.csv", "csv")
        finished = await store.finish_run("r1", "success", 1.5, 0)
        return created, duplicate, finished, await store.get_run("r1"), await store.list_runs("kelvin-check"), await store.get_artifacts("r1")

    created, duplicate, finished, run, runs, artifacts = asyncio.run(scenario())
    assert created and not duplicate and finished
    assert run["status"] == "success"
    assert run["exit_code"] == 0
    assert [r["run_id"] for r in runs] == ["r1"]
    assert artifacts == [{"name": "kelvin.csv", "kind": "csv"}]
