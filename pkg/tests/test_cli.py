import csv
import json
import os
import subprocess
import sys

import pytest

from multibump.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, dispatch


def run(*args):
    return dispatch(list(args))


def test_ground_writes_outputs_and_manifest(tmp_path, capsys):
    assert run("ground", "--dim", "1", "--p", "3", "--out", str(tmp_path)) == EXIT_OK
    data = json.loads((tmp_path / "ground_dim1_p3.json").read_text())
    assert data["u0"] == pytest.approx(2**0.5, rel=1e-9)
    man = json.loads((tmp_path / "manifest_ground.json").read_text())
    assert man["status"] == "ok" and man["config"]["dim"] == 1
    assert all(os.path.exists(p) for p in man["outputs"])
    assert "PASS ground identities" in capsys.readouterr().out


def test_config_error_exit_code(tmp_path, capsys):
    assert run("radius", "--alpha", "1.5", "--out", str(tmp_path)) == EXIT_CONFIG
    assert "alpha:" in capsys.readouterr().err
    bad = tmp_path / "bad.json"
    bad.write_text('{"colour": 1}')
    assert run("radius", "--config", str(bad), "--out", str(tmp_path)) == EXIT_CONFIG


def test_radius_sweep_reports_window(tmp_path, capsys):
    code = run("radius", "--sweep", "8,16", "--jobs", "1", "--out", str(tmp_path))
    out = capsys.readouterr().out
    # the reduced-energy maximiser lies above the window at these k
    assert code == EXIT_FAIL
    assert "FAIL radius window" in out and "PASS radius balancing" in out
    rows = list(csv.DictReader(open(tmp_path / "radius.csv")))
    assert [int(r["k"]) for r in rows] == [8, 16]
    man = json.loads((tmp_path / "manifest_radius.json").read_text())
    assert man["assertions"] == {"window": False, "balancing": True}


def test_manifest_reproduces_run(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("two-ring", "--sweep", "48,64", "--jobs", "1", "--out", str(a)) == EXIT_OK
    man = a / "manifest_two-ring.json"
    assert run("two-ring", "--config", str(man), "--out", str(b)) == EXIT_OK
    assert (a / "two_ring_k8.csv").read_bytes() == (b / "two_ring_k8.csv").read_bytes()


def test_parallel_sweep_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run("radius", "--sweep", "8:16", "--jobs", "1", "--out", str(a))
    run("radius", "--sweep", "8:16", "--jobs", "2", "--out", str(b))
    assert (a / "radius.csv").read_bytes() == (b / "radius.csv").read_bytes()


def test_two_ring_failure_is_reported(tmp_path, capsys):
    assert run("two-ring", "--jobs", "1", "--out", str(tmp_path)) == EXIT_FAIL
    assert "FAIL two-ring interior" in capsys.readouterr().out


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "multibump.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("multibump ")
    proc = subprocess.run([sys.executable, "-m", "multibump.cli", "spectrum", "--num-eigs", "40",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == EXIT_CONFIG
    assert proc.stderr.startswith("error: num_eigs")
