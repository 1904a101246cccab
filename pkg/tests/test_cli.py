import json
import math
import subprocess
import sys

import numpy as np
import pytest

from curvguide import __version__
from curvguide.cli import main

FIG2 = ["--omega-hz", "1705", "--sdot0-mm-s", "20"]


def summary(text):
    out = {}
    for line in text.splitlines():
        k, _, v = line.partition(": ")
        out[k] = v
    return out


@pytest.fixture
def straight_csv(tmp_path):
    path = tmp_path / "straight.csv"
    np.savetxt(path, np.column_stack([np.linspace(0, 10e-6, 11), np.zeros(11)]), delimiter=",",
               header="s_m,kappa_per_m", comments="")
    return path


def test_design_circular(tmp_path, capsys):
    assert main(["design", "--kind", "circular", "--radius-um", "10", *FIG2, "--out-dir", str(tmp_path)]) == 0
    s = summary(capsys.readouterr().out)
    assert float(s["s_f_um"]) == pytest.approx(5 * math.pi, abs=1e-4)
    assert float(s["R_eq_um"]) == pytest.approx(10.0, rel=1e-6)


def test_design_fig2_and_manifest(tmp_path, capsys):
    args = ["design", "--kind", "sta2d", "--kappa-max-per-um", "0.22", *FIG2, "--out-dir", str(tmp_path)]
    assert main(args) == 0
    s = summary(capsys.readouterr().out)
    assert float(s["s_f_um"]) == pytest.approx(16.6, rel=0.03)
    assert float(s["2T_ms"]) == pytest.approx(0.88, rel=0.03)
    assert float(s["R_eq_um"]) == pytest.approx(10.0, rel=0.05)
    assert main(args) == 0
    records = [json.loads(x) for x in (tmp_path / "manifest.jsonl").read_text().splitlines()]
    assert len(records) == 2
    rec = records[0]
    assert rec["command"] == "design" and rec["version"] == __version__
    assert rec["artifacts"] == sorted(["profile.csv", "design.json", "path.csv", "adiabaticity.csv", "scenario.toml"])
    assert len(rec["scenario_hash"]) == 16 and rec["scenario_hash"] == records[1]["scenario_hash"]
    for name in rec["artifacts"]:
        assert (tmp_path / name).exists()


def test_design_deterministic(tmp_path):
    outs = []
    for tag in ("a", "b"):
        d = tmp_path / tag
        assert main(["design", "--kind", "sta2d", "--kappa-max-per-um", "0.22", *FIG2, "--out-dir", str(d)]) == 0
        outs.append(d)
    for name in ("profile.csv", "path.csv", "adiabaticity.csv", "design.json"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_scenario_file_input(tmp_path, capsys):
    sc = tmp_path / "s.toml"
    sc.write_text('omega_hz = 1705.0\nsdot0_mm_s = 20.0\n[design]\nkind = "circular"\nradius_um = 4.0\n')
    assert main(["design", "--scenario", str(sc), "--out-dir", str(tmp_path / "o")]) == 0
    assert float(summary(capsys.readouterr().out)["s_f_um"]) == pytest.approx(2 * math.pi, abs=1e-4)


def test_exit_codes(tmp_path, capsys, straight_csv):
    out = ["--out-dir", str(tmp_path)]
    assert main(["design", *FIG2, *out]) == 2  # no design flags
    assert main(["design", "--kind", "circular", *out]) == 2  # no physics
    assert main(["bogus"]) == 2
    assert main(["design", "--kind", "circular", "--radius-um", "-3", *FIG2, *out]) == 3
    assert main(["classical", "sweep", "--samples", "1", "--profile", str(straight_csv), *FIG2, *out]) == 3
    assert main(["path", "--profile", str(tmp_path / "missing.csv"), *out]) == 3
    # excursion too large for the available kinetic energy
    assert main(["design", "--kind", "adiabatic1d", "--delta-y-um", "-5", *FIG2, *out]) == 4
    err = capsys.readouterr().err.strip().splitlines()
    rec = json.loads(err[-1])
    assert rec["error"] == "numerical" and rec["type"] == "InfeasibleDesign"
    assert not (tmp_path / "manifest.jsonl").exists()


def test_classical_run_straight(tmp_path, straight_csv):
    assert main(["classical", "run", "--profile", str(straight_csv), *FIG2, "--out-dir", str(tmp_path)]) == 0
    data = np.loadtxt(tmp_path / "trajectory.csv", delimiter=",", skiprows=1)
    assert np.all(data[:, 3] == 0.0)


def test_classical_sweep_and_path(tmp_path, capsys):
    assert main(["design", "--kind", "sta2d", "--kappa-max-per-um", "0.22", *FIG2, "--out-dir", str(tmp_path)]) == 0
    capsys.readouterr()
    prof = str(tmp_path / "profile.csv")
    assert main(["classical", "sweep", "--profile", prof, "--samples", "21", *FIG2, "--out-dir", str(tmp_path)]) == 0
    alpha = float(summary(capsys.readouterr().out)["alpha_bar"])
    assert 0 < alpha < 0.05
    assert main(["path", "--profile", prof, "--out-dir", str(tmp_path / "p")]) == 0
    s = summary(capsys.readouterr().out)
    assert float(s["turn_angle_deg"]) == pytest.approx(90.0, abs=1e-6)


def test_quantum_straight_null(tmp_path, capsys, straight_csv):
    args = ["quantum", "run", "--profile", str(straight_csv), *FIG2, "--ns", "256", "--ny", "32",
            "--out-dir", str(tmp_path)]
    assert main(args) == 0
    m = json.loads((tmp_path / "quantum_metrics.json").read_text())
    assert abs(m["nbar"]) <= 1e-6
    assert m["norm_drift_max"] <= 1e-8


def test_reproduce_fig2(tmp_path, capsys):
    assert main(["reproduce", "fig2", "--out-dir", str(tmp_path)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[-1] == "fig2: PASS"
    assert json.loads((tmp_path / "fig2_summary.json").read_text())["passed"]


def test_console_script_version():
    r = subprocess.run([sys.executable, "-m", "curvguide.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and __version__ in r.stdout
