import json
import subprocess
import sys

import pytest

from obstacle_vmo.artifacts import sha256_of
from obstacle_vmo.cli import main

SMALL_EXACT = """
[grid]
n_cells = 32
[boundary]
scale = 0.5
beta = 0.3
[experiment]
name = exact
refine = false
"""


def _write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_solve_writes_artifacts(tmp_path, capsys):
    cfg = _write(tmp_path, SMALL_EXACT)
    out = tmp_path / "out"
    assert main(["solve", "--config", str(cfg), "--out", str(out)]) == 0
    assert "ok:" in capsys.readouterr().out
    for name in ("solve_diagnostics.csv", "solve_solution.field", "solve_solution.json",
                 "solve_report.json", "manifest.json"):
        assert (out / name).exists()


def test_manifest_checksums_match(tmp_path):
    cfg = _write(tmp_path, SMALL_EXACT)
    out = tmp_path / "out"
    main(["experiment", "--config", str(cfg), "--out", str(out)])
    man = json.loads((out / "manifest.json").read_text())
    assert man["config"] == cfg.read_text()
    assert man["files"]
    for f in man["files"]:
        assert sha256_of(out / f["path"]) == f["sha256"]
    assert all(man["assertions"].values())


def test_reruns_are_byte_identical(tmp_path):
    cfg = _write(tmp_path, SMALL_EXACT)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["experiment", "--config", str(cfg), "--out", str(a), "--seedless"]) == 0
    assert main(["experiment", "--config", str(cfg), "--out", str(b), "--threads", "4"]) == 0
    for p in a.glob("*.csv"):
        assert p.read_bytes() == (b / p.name).read_bytes()
    assert (a / "exact_n32.field").read_bytes() == (b / "exact_n32.field").read_bytes()


def test_missing_config_exits_2(tmp_path, capsys):
    assert main(["solve", "--config", str(tmp_path / "nope.cfg"), "--out", str(tmp_path)]) == 2
    assert "not found" in capsys.readouterr().err


def test_bad_field_exits_2_and_names_it(tmp_path, capsys):
    cfg = _write(tmp_path, "[analysis]\neps = 0.5\n")
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "analysis.eps" in capsys.readouterr().err


def test_experiment_without_name_exits_2(tmp_path, capsys):
    cfg = _write(tmp_path, "[grid]\nn_cells = 16\n")
    assert main(["experiment", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "experiment.name" in capsys.readouterr().err


def test_pinning_failure_exits_1_with_diagnostics(tmp_path):
    cfg = _write(tmp_path, """
[grid]
n_cells = 32
origin_cell = true
[coefficients]
kind = radial
profile = oscillation
phase_speed = 4
[boundary]
scale = 0.25
beta = 0.0
[experiment]
name = counterexample
beta_bracket = 0.5, 0.6
""")
    out = tmp_path / "o"
    assert main(["experiment", "--config", str(cfg), "--out", str(out)]) == 1
    diag = json.loads((out / "diagnostics.json").read_text())
    assert diag["error"] == "PinningError"
    assert diag["history"]
    assert json.loads((out / "manifest.json").read_text())["assertions"] == {"completed": False}


def test_failed_check_exits_1(tmp_path, capsys):
    cfg = _write(tmp_path, """
[grid]
n_cells = 32
extent = 4.0
center = 0.0, -1.0
[experiment]
name = stability
deltas = 0.2, 0.1
agreement = 0.0
""")
    assert main(["experiment", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "agrees_with_1d_offset" in capsys.readouterr().err


def test_vmo_subcommand(tmp_path):
    cfg = _write(tmp_path, """
[grid]
n_cells = 64
[coefficients]
kind = radial
profile = dyadic
[analysis]
r0 = 0.5
""")
    out = tmp_path / "o"
    assert main(["vmo", "--config", str(cfg), "--out", str(out)]) == 0
    rep = json.loads((out / "vmo_report.json").read_text())
    assert rep["summary"]["eta_verdict"] == "bounded-below"
    assert rep["summary"]["bramanti"]["x_fprime"]["verdict"] == "not-differentiable"


def test_blowup_subcommand(tmp_path):
    cfg = _write(tmp_path, """
[grid]
n_cells = 64
[boundary]
scale = 0.5
beta = 0.0
[analysis]
radii = 0.5, 0.3
[experiment]
pin = true
""")
    out = tmp_path / "o"
    assert main(["blowup", "--config", str(cfg), "--out", str(out)]) == 0
    assert (out / "blowup_blowups.csv").exists()


def test_analyze_subcommand(tmp_path):
    cfg = _write(tmp_path, "[grid]\nn_cells = 128\n[analysis]\nr0 = 0.25\n")
    assert main(["analyze", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0


def test_analyze_without_usable_radii_exits_2(tmp_path, capsys):
    # 16h = 0.5 exceeds r0, so no density radius survives
    cfg = _write(tmp_path, "[grid]\nn_cells = 64\n[analysis]\nr0 = 0.25\n")
    assert main(["analyze", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "analysis.r0" in capsys.readouterr().err


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert "0.1.0" in capsys.readouterr().out


def test_module_entry_point(tmp_path):
    cfg = _write(tmp_path, SMALL_EXACT)
    res = subprocess.run([sys.executable, "-m", "obstacle_vmo.cli", "solve", "--config", str(cfg),
                          "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
