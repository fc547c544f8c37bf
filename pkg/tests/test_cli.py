import csv
import json
import subprocess
import sys

import pytest

from mavol_lab import cli

SMALL_GRID = {"base_radial": 4, "base_angular": 4}


def write_config(tmp_path, name="cfg.json", **doc):
    base = {
        "scenario": "tiny",
        "weight": {"a": 1, "b": 1, "perturbation": "none", "eps": 0.0},
        "k": [2, 4],
        "grid": SMALL_GRID,
    }
    base.update(doc)
    path = tmp_path / name
    path.write_text(json.dumps(base))
    return path


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_run_product_small(tmp_path):
    out = tmp_path / "r.csv"
    assert cli.main(["run", str(write_config(tmp_path)), "--out", str(out)]) == cli.EXIT_OK
    rows = read_rows(out)
    assert [r["k"] for r in rows] == ["2", "4"]
    assert list(rows[0]) == list(cli.COLUMNS)
    for r in rows:
        assert abs(float(r["ratio_thm11"]) - 1) <= 1e-6
        assert abs(float(r["mavol_rescaled"]) - 1) <= 1e-6
        assert r["runtime_seconds"] == "nan"
    mirror = json.loads(out.with_suffix(".json").read_text())
    assert mirror["columns"] == list(cli.COLUMNS)
    assert mirror["rows"][1]["N_k"] == 5


def test_numbers_have_twelve_digits():
    assert cli._fmt(1 / 3) == "0.333333333333"
    assert cli._fmt(float("nan")) == "nan"


@pytest.mark.parametrize(
    "doc",
    [
        {"bogus": 1},
        {"weight": {"a": 1, "b": 1, "color": "red"}},
        {"grid": {"base_radial": 4, "fd_step": 1e-9}},
        {"k": [4, 2]},
        {"k": []},
        {"nu_b": "flat"},
        {"symbols": ["x", "nope"]},
        {"gates": {"demailly_tol": "tight"}},
    ],
)
def test_invalid_config_exit_2_no_report(tmp_path, doc):
    out = tmp_path / "never.csv"
    assert cli.main(["run", str(write_config(tmp_path, **doc)), "--out", str(out)]) == cli.EXIT_CONFIG
    assert not out.exists()


def test_weight_and_bundle_exclusive(tmp_path):
    path = write_config(tmp_path, bundle=[1, 2])
    assert cli.main(["run", str(path), "--out", str(tmp_path / "x.csv")]) == cli.EXIT_CONFIG


def test_missing_file_is_config_error(tmp_path):
    assert cli.main(["run", str(tmp_path / "missing.json")]) == cli.EXIT_CONFIG


def test_non_ample_weight_is_numerical_abort(tmp_path):
    path = write_config(tmp_path, weight={"a": 1, "b": 1, "perturbation": "cross", "eps": 5.0})
    assert cli.main(["run", str(path), "--out", str(tmp_path / "x.csv")]) == cli.EXIT_NUMERIC


def test_gate_failure_exit_1_report_written(tmp_path, capsys):
    # an unreachable order gate must fail, name the gate, and still write rows
    path = write_config(
        tmp_path,
        weight={"a": 1, "b": 1, "perturbation": "cross", "eps": 0.2},
        gates={"min_order": 10.0},
    )
    out = tmp_path / "g.csv"
    assert cli.main(["run", str(path), "--out", str(out)]) == cli.EXIT_GATE
    assert len(read_rows(out)) == 2
    err = capsys.readouterr().err
    assert "ratio_order violated" in err and "tiny" in err


def test_sweep_rows_and_eps_zero_consistency(tmp_path):
    path = write_config(tmp_path, weight={"a": 1, "b": 1, "perturbation": "cross", "eps": 0.1}, gates={"min_order": 0.0})
    out = tmp_path / "s.csv"
    code = cli.main(["sweep", str(path), "--eps", "0,0.1", "--k", "2,3,4", "--out", str(out)])
    assert code == cli.EXIT_OK
    rows = read_rows(out)
    assert len(rows) == 6
    assert [r["scenario"] for r in rows[:3]] == ["tiny[eps=0]"] * 3
    assert [r["k"] for r in rows] == ["2", "3", "4"] * 2
    prod = tmp_path / "p.csv"
    cli.main(["run", str(write_config(tmp_path, "p.json", k=[2, 3, 4])), "--out", str(prod)])
    for a, b in zip(rows[:3], read_rows(prod)):
        for col in cli.COLUMNS[3:-1]:
            assert float(a[col]) == pytest.approx(float(b[col]), abs=1e-10)


def test_reports_byte_identical_across_threads(tmp_path):
    path = write_config(tmp_path, weight={"a": 1, "b": 1, "perturbation": "sep", "eps": 0.1}, k=[2, 3, 4])
    one, four, again = tmp_path / "1.csv", tmp_path / "4.csv", tmp_path / "again.csv"
    cli.main(["run", str(path), "--out", str(one), "--threads", "1"])
    cli.main(["run", str(path), "--out", str(four), "--threads", "4"])
    cli.main(["run", str(path), "--out", str(again)])
    assert one.read_bytes() == four.read_bytes() == again.read_bytes()
    assert one.with_suffix(".json").read_bytes() == four.with_suffix(".json").read_bytes()


def test_timing_flag_fills_runtime(tmp_path):
    out = tmp_path / "t.csv"
    cli.main(["run", str(write_config(tmp_path, k=[2])), "--out", str(out), "--timing"])
    assert float(read_rows(out)[0]["runtime_seconds"]) >= 0


def test_heavy_grid_caps_k(tmp_path, capsys):
    cfg = cli.parse_config(
        {"scenario": "h", "weight": {"a": 1, "b": 1}, "k": [2, 17], "grid": {"base_radial": 16, "base_angular": 16}}
    )
    res = cli.evaluate(cli.replace(cfg, k=[17]))
    assert res.rows == []
    assert "capping k" in capsys.readouterr().err


def test_sympow_scenario_rows(tmp_path):
    out = tmp_path / "sp.csv"
    assert cli.main(["run", "sympow-1-1", "--out", str(out)]) == cli.EXIT_OK
    rows = read_rows(out)
    assert [float(r["mavol_rescaled"]) for r in rows] == [1.0] * len(rows)
    assert float(rows[0]["sat_residual"]) <= 1e-10


def test_catalog_lists_bundled(capsys):
    assert cli.main(["catalog"]) == cli.EXIT_OK
    text = capsys.readouterr().out
    for name in ("product", "sep-eps01", "sep-eps02", "cross-eps01", "perturbed-eps02", "sympow-1-1", "sympow-1-2"):
        assert name in text


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "mavol_lab.cli", "catalog"], capture_output=True, text=True)
    assert proc.returncode == 0 and "product" in proc.stdout
