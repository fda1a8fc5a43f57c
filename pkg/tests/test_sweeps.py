"""
Tests for the sweep harness, figure presets, CSV emission, and CLI
==================================================================

Determinism is the headline contract: rerunning any sweep or preset with the
same seed must reproduce CSV bodies byte for byte, including across Monte
Carlo worker counts. The CLI is exercised through subprocesses so the exit
code semantics (0 ok / 1 usage / 2 nonconverged-or-error) are tested at the
same boundary users see.
"""

import csv
import dataclasses
import json
import math
import os
import subprocess
import sys

import pytest

from ambientd2d import ConfigError, ProtocolMetrics
from ambientd2d.cli import parse_sweep
from ambientd2d.sweeps import (
    PRESETS,
    SweepSpec,
    csv_columns,
    emit_figure_dataset,
    exit_code_for,
    run_experiment,
    write_rows_csv,
    _crosscheck,
)

CLI = [sys.executable, "-m", "ambientd2d.cli"]


def _run_cli(*argv, cwd=None):
    return subprocess.run(CLI + list(argv), capture_output=True, text=True,
                          timeout=420, cwd=cwd)


# =============================================================================
# Spec validation
# =============================================================================

def test_spec_validation_aggregates_problems(table1_params):
    spec = SweepSpec(key="bogus", values=(), protocols=("ptp", "csma"),
                     engines=("analytic", "gpu"), metrics=("O", "Z"),
                     n_trials=0, workers=0)
    with pytest.raises(ConfigError) as excinfo:
        run_experiment(spec, table1_params)
    text = str(excinfo.value)
    for fragment in ("bogus", "empty", "csma", "gpu", "'Z'",
                     "n_trials", "workers"):
        assert fragment in text
    assert len(excinfo.value.violations) >= 6


def test_grid_must_strictly_increase(table1_params):
    spec = SweepSpec(key="zeta_A", values=(0.02, 0.01))
    with pytest.raises(ConfigError, match="strictly increasing"):
        run_experiment(spec, table1_params)


def test_single_point_rejects_grid(table1_params):
    spec = SweepSpec(key=None, values=(0.01,))
    with pytest.raises(ConfigError, match="single-point"):
        run_experiment(spec, table1_params)


def test_parse_sweep_forms():
    key, values = parse_sweep("zeta_A=0.01:0.03:3")
    assert key == "zeta_A"
    assert values == pytest.approx((0.01, 0.02, 0.03))
    for bad in ("zeta_A=0.01:0.03", "=1:2:3", "zeta_A=a:2:3", "d=1:2:0"):
        with pytest.raises(ConfigError):
            parse_sweep(bad)


# =============================================================================
# Row production
# =============================================================================

def test_single_point_rows(table1_params):
    spec = SweepSpec(key=None, values=(), protocols=("ptp", "pure-htt"),
                     metrics=("O",), label="point")
    rows = run_experiment(spec, table1_params)
    assert [row["protocol"] for row in rows] == ["ptp", "pure-htt"]
    for row in rows:
        assert row["engine"] == "analytic"
        assert row["status"] == "ok"
        assert 0.0 <= row["B"] <= 1.0
        assert 0.0 <= row["O"] <= 1.0
        assert math.isnan(row["C"]) and math.isnan(row["T"])
        assert row["O_err"] is None
        assert len(row["params_hash"]) == 12
        assert row["_params"].zeta_A == table1_params.zeta_A
        assert row["wall_time_s"] >= 0.0
        assert "zeta_A" not in row  # no sweep column on a point run
    assert exit_code_for(rows) == 0


def test_row_order_grid_protocol_engine(table1_params):
    spec = SweepSpec(key="zeta_A", values=(0.01, 0.02),
                     protocols=("ptp", "stp"), engines=("analytic", "mc"),
                     metrics=("O",), n_trials=400, seed=5)
    rows = run_experiment(spec, table1_params)
    layout = [(row["zeta_A"], row["protocol"], row["engine"]) for row in rows]
    assert layout == [
        (0.01, "ptp", "analytic"), (0.01, "ptp", "mc"),
        (0.01, "stp", "analytic"), (0.01, "stp", "mc"),
        (0.02, "ptp", "analytic"), (0.02, "ptp", "mc"),
        (0.02, "stp", "analytic"), (0.02, "stp", "mc"),
    ]
    for row in rows:
        if row["engine"] == "mc":
            assert row["status"] in ("ok", "crosscheck")
            assert row["O_err"] is not None
        assert row["seed"] == 5


def test_xi_pseudo_parameter(table1_params):
    spec = SweepSpec(key="xi", values=(0.2, 0.8), protocols=("pure-htt",),
                     metrics=("C",))
    rows = run_experiment(spec, table1_params)
    assert [row["xi"] for row in rows] == [0.2, 0.8]
    for row, xi in zip(rows, (0.2, 0.8)):
        expected = xi * table1_params.l_A * table1_params.zeta_A / table1_params.l_B
        assert math.isclose(row["_params"].zeta_B, expected, rel_tol=1e-12)


def test_xi_requires_positive_interferer_load(table1_params):
    spec = SweepSpec(key=None, values=(), protocols=("pure-htt",),
                     metrics=("C",), overrides={"l_B": 0.0, "xi": 0.5})
    rows = run_experiment(spec, table1_params)
    assert rows[0]["status"].startswith("error:")
    assert "l_B" in rows[0]["status"]
    assert exit_code_for(rows) == 2


def test_error_points_do_not_abort_sweep(table1_params):
    # m = 1.5 is rejected at that grid point; its neighbours still evaluate.
    spec = SweepSpec(key="m", values=(1.0, 1.5, 2.0), protocols=("pure-bs",),
                     metrics=("C",))
    rows = run_experiment(spec, table1_params)
    statuses = [row["status"] for row in rows]
    assert statuses[0] == "ok"
    assert statuses[1].startswith("error:") and "integer" in statuses[1]
    assert statuses[2] == "ok"
    assert exit_code_for(rows) == 2
    assert rows[1]["B"] is None and rows[1]["params_hash"] == ""


# =============================================================================
# Cross-check stamping
# =============================================================================

def _metrics(engine, **overrides):
    base = dict(protocol="ptp", engine=engine, B=0.5, O=0.1, C=0.9, T=100.0)
    if engine == "mc":
        base.update(B_err=0.01, O_err=0.01, C_err=0.01, T_err=0.5)
    base.update(overrides)
    return ProtocolMetrics(**base)


def test_crosscheck_trip_conditions():
    agree = _metrics("mc")
    assert not _crosscheck(_metrics("analytic"), agree)
    # T disagrees by 10 with a 3-sigma band of ~0.77: must trip.
    assert _crosscheck(_metrics("analytic"), _metrics("mc", T=90.0))
    # NaN analytic values (unrequested metrics) never participate.
    assert not _crosscheck(_metrics("analytic", T=math.nan),
                           _metrics("mc", T=90.0))
    # The absolute floor absorbs certification-level differences.
    assert not _crosscheck(_metrics("analytic", T=100.0 + 4e-5),
                           _metrics("mc", T=100.0, T_err=1e-8))


# =============================================================================
# CSV serialization
# =============================================================================

def test_csv_columns_layout():
    assert csv_columns("zeta_A", ("alpha", "mu")) == [
        "zeta_A", "alpha", "mu", "protocol", "engine", "B", "O", "C", "T",
        "O_err", "C_err", "T_err", "status", "seed", "params_hash"]
    assert csv_columns(None)[0] == "protocol"


def test_write_rows_csv_formatting(tmp_path):
    rows = [
        {"d": 5.0, "protocol": "ptp", "B": 0.1, "O": math.nan, "C": None,
         "T": 1e-07, "status": "ok", "seed": 3},
        {"d": 10.0, "protocol": "stp", "B": 1.0, "O": 0.25, "C": 0.5,
         "T": 2.0, "status": "error: boom", "seed": 3},
    ]
    columns = ["d", "protocol", "B", "O", "C", "T", "status", "seed"]
    path = tmp_path / "rows.csv"
    write_rows_csv(rows, columns, str(path))
    text = path.read_text(encoding="utf-8")
    lines = text.splitlines()
    assert lines[0] == "d,protocol,B,O,C,T,status,seed"
    assert lines[1] == "5.0,ptp,0.1,,,1e-07,ok,3"
    assert lines[2] == "10.0,stp,1.0,0.25,0.5,2.0,error: boom,3"
    assert text.endswith("\n")
    assert not os.path.exists(str(path) + ".tmp")


def test_exit_codes_from_statuses():
    ok_rows = [{"status": "ok"}, {"status": "crosscheck"},
               {"status": "low-confidence"}]
    assert exit_code_for(ok_rows) == 0
    assert exit_code_for(ok_rows + [{"status": "nonconverged"}]) == 2
    assert exit_code_for([{"status": "error: boom"}]) == 2


# =============================================================================
# Figure presets
# =============================================================================

def test_preset_registry_shape():
    ids = sorted(PRESETS, key=lambda s: int(s[3:]))
    assert ids[0] == "fig3" and ids[-1] == "fig13"
    assert len(ids) == 11
    for preset in PRESETS.values():
        assert preset.figure_id in PRESETS
        assert len(preset.grid) >= 8
        assert all(b > a for a, b in zip(preset.grid, preset.grid[1:]))
        assert preset.protocols
        assert set(preset.metrics) <= {"O", "C", "T"}
        assert preset.curves


def test_unknown_figure_id_lists_valid_ids(tmp_path):
    with pytest.raises(ConfigError, match="fig3.*fig13"):
        emit_figure_dataset("fig99", str(tmp_path))


@pytest.fixture()
def small_fig9(monkeypatch):
    """fig9 preset truncated to 2 grid points and 1 curve for fast tests."""
    preset = PRESETS["fig9"]
    small = dataclasses.replace(preset, grid=preset.grid[:2],
                                curves=preset.curves[:1])
    monkeypatch.setitem(PRESETS, "fig9", small)
    return small


def test_emit_figure_dataset_files(small_fig9, tmp_path):
    manifest = emit_figure_dataset("fig9", str(tmp_path))
    names = sorted(os.listdir(tmp_path))
    expected = sorted(
        f"fig9_zeta_A-0p02_{proto}.csv" for proto in small_fig9.protocols
    ) + ["fig9_manifest.json"]
    assert names == sorted(expected)

    with open(tmp_path / "fig9_zeta_A-0p02_ptp.csv", newline="",
              encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2
    assert [row["delta"] for row in rows] == [repr(v) for v in small_fig9.grid]
    assert {row["zeta_A"] for row in rows} == {"0.02"}
    assert {row["status"] for row in rows} == {"ok"}
    assert {row["engine"] for row in rows} == {"analytic"}
    for row in rows:
        assert 0.0 <= float(row["C"]) <= 1.0
        assert row["O"] == "" and row["T"] == ""   # unrequested metrics

    on_disk = json.loads((tmp_path / "fig9_manifest.json").read_text())
    assert on_disk["exit_code"] == 0
    assert on_disk["figure_id"] == "fig9"
    assert on_disk["seed"] == manifest["seed"] == 12345
    assert len(on_disk["curves"]) == len(small_fig9.protocols)
    for entry in on_disk["curves"]:
        assert entry["rows"] == 2
        assert entry["statuses"] == ["ok"]
    assert on_disk["base_config"] == dict(sorted(on_disk["base_config"].items()))


def test_emit_rerun_byte_identical_across_workers(small_fig9, tmp_path):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    emit_figure_dataset("fig9", str(out_a), engines=("analytic", "mc"),
                        n_trials=300, seed=99, workers=1)
    emit_figure_dataset("fig9", str(out_b), engines=("analytic", "mc"),
                        n_trials=300, seed=99, workers=2)
    csv_names = sorted(n for n in os.listdir(out_a) if n.endswith(".csv"))
    assert csv_names  # the preset produced curve files
    for name in csv_names:
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()


def test_trace_files_written(table1_params, tmp_path):
    spec = SweepSpec(key=None, values=(), protocols=("ptp",),
                     engines=("mc",), n_trials=130, seed=17,
                     metrics=("O",), trace_dir=str(tmp_path), label="point")
    run_experiment(spec, table1_params)
    trace = tmp_path / "trace_point_0_ptp.csv"
    assert trace.exists()
    with open(trace, newline="", encoding="utf-8") as fh:
        assert len(list(csv.reader(fh))) == 131


# =============================================================================
# CLI subprocess boundary
# =============================================================================

def test_cli_point_run_ok():
    result = _run_cli("--protocol", "pure-bs", "--engine", "analytic")
    assert result.returncode == 0
    assert "params_hash=" in result.stdout
    assert "pure-bs" in result.stdout
    assert "ok" in result.stdout


def test_cli_usage_error_is_exit_1():
    result = _run_cli("--engine", "warp")
    assert result.returncode == 1
    assert "usage" in result.stderr


def test_cli_malformed_sweep_is_exit_1():
    result = _run_cli("--sweep", "zeta_A=0.01:0.02")
    assert result.returncode == 1
    assert "KEY=START:STOP:N" in result.stderr


def test_cli_unknown_config_key_is_exit_1(tmp_path):
    config = tmp_path / "bad.cfg"
    config.write_text("bogus=3\n", encoding="utf-8")
    result = _run_cli("--config", str(config))
    assert result.returncode == 1
    assert "unknown key" in result.stderr


def test_cli_unknown_figure_is_exit_1(tmp_path):
    result = _run_cli("--figure", "fig99", "--out", str(tmp_path))
    assert result.returncode == 1
    assert "unknown figure id" in result.stderr


def test_cli_error_rows_give_exit_2(tmp_path):
    result = _run_cli("--sweep", "m=1:2:3", "--protocol", "pure-bs",
                      "--out", str(tmp_path))
    assert result.returncode == 2
    assert "error: m must take integer values" in result.stdout
    out_file = tmp_path / "sweep_m.csv"
    assert out_file.exists()
    with open(out_file, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 3
    assert rows[0]["status"] == "ok"
    assert rows[1]["status"].startswith("error:")


def test_cli_sweep_writes_csv(tmp_path):
    result = _run_cli("--sweep", "zeta_A=0.01:0.02:2", "--protocol", "ptp",
                      "--engine", "analytic", "--out", str(tmp_path))
    assert result.returncode == 0
    with open(tmp_path / "sweep_zeta_A.csv", newline="",
              encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2
    assert [row["zeta_A"] for row in rows] == ["0.01", "0.02"]
    assert all(row["engine"] == "analytic" for row in rows)
