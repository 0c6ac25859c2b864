import json
import os

import numpy as np
import pandas as pd
import pytest

from ptmarket import (
    RECORD_COLUMNS,
    ValidationError,
    build_state,
    load_checkpoint,
    load_config,
    load_report,
    report_to_dict,
    run_period,
    run_simulation,
    save_checkpoint,
    synthetic_traces,
    write_json,
    write_report,
)

# noinspection PyUnresolvedReferences
from .util import approx, config, small_config


@pytest.fixture(scope="module")
def report():
    config = small_config(horizon=4)
    return run_simulation(config, synthetic_traces(config))


def test_json(tmp_path, report):
    path = str(tmp_path / "report.json")
    assert write_report(report, path) == [path]
    with open(path) as f:
        d = json.load(f)
    assert d["format_version"] == 1
    assert d["seed"] == 0
    assert d["strategy"] == "debate_pqr"
    assert d["prosumers"] == report.ids
    assert len(d["periods"]) == 4
    assert "wall_time" not in d
    assert d["aggregates"]["totals"] == report.totals

    loaded = load_report(path)
    assert loaded.config == report.config
    assert loaded.ids == report.ids
    assert loaded.version == report.version
    assert loaded.wall_time is None
    pd.testing.assert_frame_equal(loaded.periods, report.periods)
    pd.testing.assert_frame_equal(loaded.records, report.records)
    for r1, r2 in zip(loaded.results, report.results):
        approx(r1.allocation, r2.allocation, rtol=0, atol=0)
        assert r1.buyer_ids == r2.buyer_ids

    assert report_to_dict(loaded) == report_to_dict(report)
    again = str(tmp_path / "again.json")
    write_report(loaded, again)
    with open(path) as f1, open(again) as f2:
        assert f1.read() == f2.read()


def test_json_deterministic(tmp_path, report):
    write_report(report, str(tmp_path / "a.json"))
    write_report(report, str(tmp_path / "b.json"))
    with open(tmp_path / "a.json") as f1, open(tmp_path / "b.json") as f2:
        assert f1.read() == f2.read()


def test_csv(tmp_path, report):
    path = str(tmp_path / "report.csv")
    paths = write_report(report, path, "csv")
    assert paths == [
        path,
        str(tmp_path / "report_periods.csv"),
        str(tmp_path / "report_aggregates.csv"),
        str(tmp_path / "report_config.yaml"),
    ]
    for p in paths:
        assert os.path.exists(p)

    records = pd.read_csv(paths[0])
    assert list(records.columns) == RECORD_COLUMNS
    assert set(records["role"]) <= {"buyer", "seller"}
    periods = pd.read_csv(paths[1])
    aggregates = pd.read_csv(paths[2])
    assert len(aggregates) == 1
    assert aggregates["seed"].iloc[0] == 0
    assert aggregates["strategy"].iloc[0] == "debate_pqr"
    for column in ["fitness", "seller_reward", "local_energy", "grid_import"]:
        assert aggregates[column].iloc[0] == pytest.approx(periods[column].sum())
    buyers = records[records["role"] == "buyer"]
    assert buyers["value"].sum() == pytest.approx(periods["fitness"].sum())

    assert load_config(paths[3]) == report.config


def test_unknown_format(tmp_path, report):
    with pytest.raises(ValidationError):
        write_report(report, str(tmp_path / "report.xml"), "xml")


def test_load_report_errors(tmp_path, report):
    path = tmp_path / "report.json"
    path.write_text("{")
    with pytest.raises(ValidationError):
        load_report(str(path))

    d = report_to_dict(report)
    write_json({**d, "format_version": 2}, str(path))
    with pytest.raises(ValidationError):
        load_report(str(path))

    write_json({k: v for k, v in d.items() if k != "periods"}, str(path))
    with pytest.raises(ValidationError):
        load_report(str(path))

    with pytest.raises(OSError):
        load_report(str(tmp_path / "missing.json"))


def test_write_json_numpy(tmp_path):
    path = str(tmp_path / "x.json")
    write_json({"a": np.arange(3), "b": np.float64(0.5), 1: (np.int64(2),)}, path)
    with open(path) as f:
        assert json.load(f) == {"a": [0, 1, 2], "b": 0.5, "1": [2]}


def test_checkpoint(tmp_path, config):
    traces = synthetic_traces(config)
    state = build_state(config, traces.ids)
    run_period(state, traces, config)
    path = str(tmp_path / "checkpoint.json")
    save_checkpoint(state, path)
    loaded = load_checkpoint(path)

    assert loaded.t == 1
    assert loaded.ids == state.ids
    assert loaded.profiles == state.profiles
    approx(loaded.loss, state.loss, rtol=0, atol=0)
    approx(loaded.prices, state.prices, rtol=0, atol=0)
    for i, agent in state.agents.items():
        approx(loaded.agents[i].q, agent.q, rtol=0, atol=0)
        assert loaded.agents[i].epsilon == agent.epsilon
        assert loaded.agents[i].rng.random() == agent.rng.random()


def test_checkpoint_errors(tmp_path, config):
    state = build_state(config, ["a", "b"])
    path = str(tmp_path / "checkpoint.json")
    save_checkpoint(state, path)
    with open(path) as f:
        d = json.load(f)

    write_json({**d, "format_version": 0}, path)
    with pytest.raises(ValidationError):
        load_checkpoint(path)

    write_json({**d, "agents": d["agents"][:1]}, path)
    with pytest.raises(ValidationError):
        load_checkpoint(path)

    write_json({**d, "loss": [1, 2, 3]}, path)
    with pytest.raises(ValidationError):
        load_checkpoint(path)
