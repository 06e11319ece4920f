from __future__ import annotations

import json
import math
import subprocess
import sys

import pytest

from ccdim.cli import main
from conftest import CANTOR_DIM, HALFQUARTER_DIM, config


def run(capsys, *argv):
    try:
        code = main([str(a) for a in argv])
    except SystemExit as exc:  # argparse usage errors
        code = exc.code
    out, err = capsys.readouterr()
    return code, out, err


def report(text: str) -> dict:
    rows = {}
    for line in text.splitlines():
        if line.startswith("#"):
            continue
        key, _, val = line.partition(" = ")
        rows[key] = val
    return rows


# ----------------------------------------------------------------------
# validate


def test_validate_cantor(capsys):
    code, out, _ = run(capsys, "validate", config("cantor"))
    assert code == 0
    assert "xi = 1\n" in out
    assert report(out)["constants"] == "certified"


def test_validate_overlap_exit_2(capsys):
    code, _, err = run(capsys, "validate", config("overlapping-branches"))
    assert code == 2
    assert "overlap" in err


def test_validate_missing_file(capsys, tmp_path):
    code, _, err = run(capsys, "validate", tmp_path / "nope.json")
    assert code == 2
    assert "cannot read" in err


def test_validate_reports_holder_failure(capsys, tmp_path):
    cfg = json.loads(config("perturbed").read_text())
    cfg["stages"][0]["holder"]["c"] = 0.1
    p = tmp_path / "tight.json"
    p.write_text(json.dumps(cfg))
    code, out, err = run(capsys, "validate", p, "--no-banner")
    assert code == 1
    assert "stage[0].holder_ok = false" in out
    assert "Hoelder" in err


def test_usage_errors_exit_2(capsys):
    assert run(capsys, "dim")[0] == 2
    assert run(capsys, "frobnicate", config("cantor"))[0] == 2
    assert run(capsys, "moran", config("cantor"))[0] == 2
    assert run(capsys, "moran", config("cantor"), "--r", "1.5")[0] == 2
    assert run(capsys, "boxcount", config("cantor"), "--r-min", "0.5", "--r-max", "0.1")[0] == 2
    assert run(capsys, "measure", config("cantor"))[0] == 2
    assert run(capsys, "measure", config("cantor"), "--sigma", "13")[0] == 2
    assert run(capsys, "pressure", config("cantor"), "--t", "-1")[0] == 2


def test_bad_thread_env(capsys, monkeypatch):
    monkeypatch.setenv("CCDIM_THREADS", "many")
    code, _, err = run(capsys, "validate", config("cantor"))
    assert code == 2 and "CCDIM_THREADS" in err


# ----------------------------------------------------------------------
# dim and bounds


@pytest.mark.parametrize("name,h", [("cantor", CANTOR_DIM), ("halfquarter", HALFQUARTER_DIM)])
def test_dim_affine(capsys, name, h):
    code, out, _ = run(capsys, "dim", config(name), "--depth", 8, "--no-banner")
    assert code == 0
    rows = report(out)
    assert abs(float(rows["h_lo"]) - h) <= 1e-12 and abs(float(rows["h_hi"]) - h) <= 1e-12
    assert rows["corollary_check"] == "pass"
    assert rows["status"] == "certified"


def test_dim_perturbed_json(capsys):
    code, out, _ = run(capsys, "dim", config("perturbed"), "--depth", 12, "--json", "--no-banner")
    assert code == 0
    doc = json.loads(out)
    enc = doc["results"]["enclosure"]
    assert enc["h_hi"] - enc["h_lo"] <= 0.10
    assert enc["h_lo"] < 0.6486862706993309 < enc["h_hi"]
    assert doc["results"]["corollary"]["ok"]
    assert {"h_lo", "h_hi", "depth", "xi", "certified_width_bound", "xi_emp", "tol"} <= enc.keys()
    assert "wall_time_s" not in doc


def test_dim_bracketing_failure_exit_1(capsys):
    code, _, err = run(capsys, "dim", config("logistic"))
    assert code == 1
    assert "doublings" in err


def test_bounds_cantor(capsys):
    code, out, _ = run(capsys, "bounds", config("cantor"), "--no-banner")
    assert code == 0
    rows = report(out)
    assert rows["M"] == "12"
    assert float(rows["hausdorff_lower"]) == pytest.approx(1 / 12)
    assert float(rows["packing_upper"]) == pytest.approx(6**CANTOR_DIM, rel=1e-10)


def test_banner(capsys):
    _, out, _ = run(capsys, "validate", config("cantor"))
    assert out.startswith("# ccdim ")
    assert "# wall time" in out
    _, out, _ = run(capsys, "validate", config("cantor"), "--no-banner")
    assert "#" not in out


# ----------------------------------------------------------------------
# CSV subcommands


def test_pressure_at_zero(capsys):
    code, out, _ = run(capsys, "pressure", config("cantor"), "--t", 0)
    assert code == 0
    header, row = out.splitlines()
    assert header == "t,logZ,L,U,midpoint"
    t, logz, L, U, mid = (float(v) for v in row.split(","))
    assert L == U == pytest.approx(math.log(2), rel=1e-15)


def test_pressure_grid(capsys):
    code, out, _ = run(capsys, "pressure", config("perturbed"), "--t-min", 0, "--t-max", 1,
                       "--steps", 5, "--depth", 8)
    assert code == 0
    rows = [list(map(float, r.split(","))) for r in out.splitlines()[1:]]
    assert [r[0] for r in rows] == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert all(r[2] <= r[3] for r in rows)


def test_moran(capsys):
    code, out, _ = run(capsys, "moran", config("cantor"), "--r", 0.4)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "word,lo,hi,diam"
    assert [line.split(",")[0] for line in lines[1:]] == ["1", "2"]


def test_measure(capsys):
    code, out, _ = run(capsys, "measure", config("cantor"), "--sigma", 1, "--stage", 4)
    assert code == 0
    row = out.splitlines()[1].split(",")
    assert row[0] == "1" and float(row[1]) == pytest.approx(0.5, rel=1e-14)


def test_measure_level_json(capsys):
    code, out, _ = run(capsys, "measure", config("period2"), "--level", 2, "--stage", 3,
                       "--depth", 7, "--json")
    assert code == 0
    doc = json.loads(out)
    assert doc["enclosure"]["depth"] == 8  # rounded up to the schedule period
    assert [r["word"] for r in doc["rows"]] == ["11", "12", "21", "22"]
    assert sum(r["nu"] for r in doc["rows"]) == pytest.approx(1.0, abs=1e-12)


def test_boxcount(capsys, tmp_path):
    out_file = tmp_path / "box.csv"
    code, out, _ = run(capsys, "boxcount", config("cantor"), "--r-min", 3.0**-6,
                       "--r-max", 3.0**-2, "--points", 5, "--out", out_file)
    assert code == 0 and out == ""
    rows = out_file.read_text().splitlines()
    assert rows[0] == "r,count,certified_upper"
    assert [int(r.split(",")[1]) for r in rows[1:]] == [4, 8, 16, 32, 64]


def test_boxcount_json_slope(capsys):
    code, out, _ = run(capsys, "boxcount", config("cantor"), "--r-min", 3.0**-8,
                       "--r-max", 3.0**-2, "--points", 7, "--json")
    assert code == 0
    assert json.loads(out)["slope"] == pytest.approx(CANTOR_DIM, abs=1e-9)


def test_unwritable_output(capsys, tmp_path):
    code, _, err = run(capsys, "moran", config("cantor"), "--r", 0.4,
                       "--out", tmp_path / "missing" / "x.csv")
    assert code == 2 and "cannot write" in err


# ----------------------------------------------------------------------
# determinism


@pytest.mark.parametrize("argv", [
    ("dim", config("perturbed"), "--depth", 12, "--no-banner"),
    ("dim", config("perturbed"), "--depth", 12, "--json", "--no-banner"),
    ("pressure", config("perturbed"), "--depth", 14),
    ("moran", config("perturbed"), "--r", 0.01),
    ("measure", config("perturbed"), "--level", 3, "--stage", 8),
    ("boxcount", config("perturbed"), "--r-min", 1e-4),
])
def test_byte_identical_across_threads(capsys, argv):
    outputs = {run(capsys, *argv, "--threads", k)[1] for k in (1, 2, 8)}
    assert len(outputs) == 1


def test_thread_env_fallback(capsys, monkeypatch):
    argv = ("pressure", config("perturbed"), "--depth", 12)
    monkeypatch.setenv("CCDIM_THREADS", "3")
    a = run(capsys, *argv)[1]
    monkeypatch.delenv("CCDIM_THREADS")
    assert a == run(capsys, *argv, "--threads", 1)[1]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "ccdim", "moran", str(config("cantor")), "--r", "0.4"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert len(proc.stdout.splitlines()) == 3
