import json
import subprocess
import sys

import pytest

from geoobs.cli import run
from geoobs.geometry import Surface
from geoobs.io import save_surface
from geoobs.series import BivariateSeries

X = BivariateSeries.x(8)
Y = BivariateSeries.y(8)


@pytest.fixture()
def files(tmp_path):
    save_surface(Surface(Y * 0.5 + X * X), tmp_path / "g.json")
    save_surface(Surface(Y * -0.5 + X * X + X**3), tmp_path / "h.json")
    save_surface(Surface(X * X - Y * Y + X**3 * 0.2 + X * X * Y * 0.1 - Y**3 * 0.1), tmp_path / "saddle.json")
    return tmp_path


def test_classify_pair(files, capsys):
    assert run(["classify", "--surface", str(files / "g.json"), "--surface2", str(files / "h.json")]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["pair"]["case_label"] == "MainAlternating"
    assert doc["pair"]["M"] == 3 and doc["effective_config"]["command"] == "classify"


def test_classify_saddle_reports_a2_samples(files, capsys):
    assert run(["classify", "--surface", str(files / "saddle.json"), "--delta", "-0.05,0.05"]) == 0
    doc = json.loads(capsys.readouterr().out)
    s = doc["surfaces"][0]
    assert s["hessian"]["shape"] == "Saddle" and len(s["a2_samples"]) == 2 and "theta0" in s


def test_trace_validation_names_eps(files, capsys):
    assert run(["trace", "--surface", str(files / "g.json"), "--dir", "0.0", "--eps", "-1"]) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["parameter"] == "eps" and "eps" in err["message"]


def test_bad_flag_and_missing_file_exit_1(files, capsys):
    assert run(["trace", "--bogus"]) == 1
    assert run(["trace", "--surface", str(files / "missing.json")]) == 1


def test_computation_error_exit_2(files, capsys):
    # normals 143 degrees apart: no tilt can normalize the pair
    save_surface(Surface(Y * 3.0), files / "p.json")
    save_surface(Surface(Y * -3.0), files / "q.json")
    assert run(["classify", "--surface", str(files / "p.json"), "--surface2", str(files / "q.json")]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "NoValidTilt" and err["exit_code"] == 2


def test_sweep_writes_report(files, capsys):
    out = files / "report.json"
    code = run(["sweep", "--surface", str(files / "saddle.json"), "--n-dirs", "360", "--eps", "0.05", "--out", str(out)])
    assert code == 0
    line = capsys.readouterr().out.strip()
    assert line.startswith("max_intervals=")
    doc = json.loads(out.read_text())
    assert f"max_intervals={doc['max_interval_count']}" in line
    assert doc["config"]["effective"]["n_dirs"] == 360


def test_toml_config_and_flag_precedence(files, capsys):
    cfg = files / "exp.toml"
    cfg.write_text('surfaces = ["saddle.json"]\nn_dirs = 12\neps = 0.03\n[limits]\nds = 2e-4\n')
    out = files / "r.json"
    assert run(["sweep", "--config", str(cfg), "--eps", "0.04", "--out", str(out)]) == 0
    eff = json.loads(out.read_text())["config"]["effective"]
    assert eff["n_dirs"] == 12 and eff["eps"] == 0.04 and eff["ds"] == 2e-4


def test_trace_plot_and_determinism(files):
    t1, t2, csv = files / "t1.json", files / "t2.json", files / "t.csv"
    argv = ["trace", "--surface", str(files / "saddle.json"), "--dir", "0.3", "--eps", "0.05"]
    for out in (t1, t2):
        proc = subprocess.run([sys.executable, "-m", "geoobs", *argv, "--out", str(out)], capture_output=True)
        assert proc.returncode == 0
    assert t1.read_bytes() == t2.read_bytes()
    assert run(["plot", "--input", str(t1), "--out", str(csv)]) == 0
    lines = csv.read_text().splitlines()
    assert lines[0] == "s,x,y,z,kind" and lines[1].endswith(",boundary")


def test_cascade_and_shoot(files, capsys):
    assert run(["cascade", "--surface", str(files / "g.json"), "--surface2", str(files / "h.json"),
                "--eps-list", "0.1,0.05,0.02,0.01,0.005"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["stabilized"] is True
    save_surface(Surface(X * X + Y * Y), files / "bump.json")
    assert run(["shoot", "--surface", str(files / "bump.json"), "--from", "-0.3,0.05,0.03", "--to", "0.3,-0.02,0.05"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["length"] > 0.6 and doc["miss"] <= 1e-6
