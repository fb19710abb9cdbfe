from __future__ import annotations

import json
import os

import numpy as np
import pytest

from nonsmooth_atlas import cli, export, verify
from nonsmooth_atlas.cli import UsageError, parse_range, run


# ---------------------------------------------------------------- export

def test_csv_round_trip(tmp_path):
    path = tmp_path / "t.csv"
    header = export.make_header(["prog", "--x", "1"], tolerances={"rtol": 1e-10})
    rows = [(0.1, 1 / 3, "Right"), (np.float64(2.0), np.nan, "Sliding")]
    export.write_csv(str(path), ("a", "b", "regime"), rows, header)
    h, cols, body = export.read_csv(str(path))
    assert h["package"] == "nonsmooth_atlas" and h["invocation"] == "prog --x 1"
    assert h["tolerances"] == {"rtol": 1e-10}
    assert cols == ["a", "b", "regime"]
    assert float(body[0][1]) == 1 / 3 and body[1][1] == "nan"


def test_seventeen_digit_format():
    v = 0.1 + 0.2
    assert float(export.fmt(v)) == v
    assert export.fmt(True) == "1" and export.fmt(np.int64(3)) == "3"


def test_json_header():
    doc = json.loads(export.json_text({"x": np.arange(3)}, export.make_header()))
    assert doc["_header"]["package"] == "nonsmooth_atlas" and doc["x"] == [0, 1, 2]


def test_atomic_write_leaves_no_partial_file(tmp_path):
    path = tmp_path / "out.txt"
    with pytest.raises(TypeError):
        export.atomic_write(str(path), object())
    assert os.listdir(tmp_path) == []
    export.atomic_write(str(path), "ok\n")
    assert path.read_text() == "ok\n" and os.listdir(tmp_path) == ["out.txt"]


# ---------------------------------------------------------------- cli

def test_parse_range():
    assert np.allclose(parse_range("0:1:0.25"), [0, 0.25, 0.5, 0.75, 1.0])
    assert np.allclose(parse_range("-3:-2:0.5"), [-3.0, -2.5, -2.0])
    assert np.allclose(parse_range("0.1,0.05"), [0.1, 0.05])
    for bad in ("0:1", "0:1:-1", "a:b:c", "1,x"):
        with pytest.raises(UsageError):
            parse_range(bad)


def test_simulate_csv_has_sliding(tmp_path, capsys):
    out = tmp_path / "traj.csv"
    ev = tmp_path / "ev.csv"
    rc = run(["simulate", "--model", "toy", "--nu", "0.2", "--eta", "0.2", "--tmax", "60",
              "--out", str(out), "--events", str(ev)])
    assert rc == 0
    h, cols, rows = export.read_csv(str(out))
    assert cols == list(export.TRAJECTORY_COLUMNS)
    assert "simulate" in h["invocation"]
    assert {r[4] for r in rows} >= {"Sliding", "Right"}
    _, ecols, erows = export.read_csv(str(ev))
    assert ecols == list(export.EVENT_COLUMNS) and any(r[1] == "SlideEntry" for r in erows)


def test_bhb_report_json(capsys):
    assert run(["bhb-report", "--model", "toy"]) == 0
    doc = json.loads(capsys.readouterr().out)
    lim = doc["limits"]
    assert (lim["tau_L0"], lim["tau_R0"], lim["delta_R0"]) == pytest.approx((-1.8616, 1.2846, 0.2846), abs=1e-4)
    assert doc["beb_type"] == "NonsmoothFold" and doc["chi_hb_sign"] == "Supercritical"


def test_domain_error_exit_one(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"model": "toy", "params": {"zeta": 1.0}}))
    assert run(["simulate", "--config", str(cfg), "--tmax", "1"]) == 1
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "UnknownParameter"


def test_usage_errors_exit_two(capsys):
    assert run(["simulate", "--tmax", "-1"]) == 2
    assert run(["bcnf-scan", "--tauL", "0:1", "--tauR", "0:1:0.5"]) == 2
    assert run(["no-such-command"]) == 2


def test_bcnf_curves_and_scan(tmp_path):
    out = tmp_path / "c.csv"
    assert run(["bcnf-curves", "--kind", "FirstOlive", "--values=-3:-2:0.5", "--out", str(out)]) == 0
    _, cols, rows = export.read_csv(str(out))
    assert cols == list(export.BOUNDARY_COLUMNS)
    assert float(rows[0][2]) == pytest.approx(0.625, abs=1e-10)
    scan = tmp_path / "s.csv"
    assert run(["bcnf-scan", "--tauL=-2:0:1", "--tauR", "0.5:1.5:0.5", "--transient", "500",
                "--samples", "500", "--out", str(scan)]) == 0
    _, cols, rows = export.read_csv(str(scan))
    assert cols == list(export.SCAN_COLUMNS) and len(rows) == 9


def test_verify_exit_status(monkeypatch, capsys):
    bad = verify.CheckResult(99, "synthetic", "oracles", False, {"x": 1.0}, {"x": 0.0})
    monkeypatch.setattr(verify, "run_suite", lambda suite: [bad])
    assert cli.run(["verify", "oracles"]) == 1
    assert "[FAIL]" in capsys.readouterr().out
    good = verify.CheckResult(98, "synthetic", "oracles", True)
    monkeypatch.setattr(verify, "run_suite", lambda suite: [good])
    assert cli.run(["verify", "oracles"]) == 0
