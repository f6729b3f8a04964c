import csv

import numpy as np
import pytest

from chdyn.cli import main
from chdyn.diagnostics import CSV_COLUMNS


def _write(tmp_path, text):
    path = tmp_path / "c.cfg"
    path.write_text(text)
    return str(path)


def _rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_run_writes_deterministic_csv_and_vtk(tmp_path, capsys):
    cfg = _write(tmp_path, "mesh.n = 4\ntime.n_steps = 4\ntime.tau = 1e-2\n"
                           "initial.condition = random(0.3, 0)\noutput.dir = a\noutput.every = 2\n")
    assert main(["run", cfg]) == 0
    assert main(["run", cfg, "--set", "output.dir=b"]) == 0
    a = (tmp_path / "a" / "diagnostics.csv").read_text()
    assert a == (tmp_path / "b" / "diagnostics.csv").read_text()
    rows = _rows(tmp_path / "a" / "diagnostics.csv")
    assert tuple(rows[0]) == CSV_COLUMNS
    assert [r[0] for r in rows[1:]] == ["0", "1", "2", "3", "4"]
    total = np.array([float(r[CSV_COLUMNS.index("total")]) for r in rows[1:]])
    assert np.all(np.diff(total) <= 1e-12 * np.abs(total[:-1]))
    names = sorted(p.name for p in (tmp_path / "a").glob("*.vtk"))
    assert names == ["state_000002.vtk", "state_000002_boundary.vtk",
                     "state_000004.vtk", "state_000004_boundary.vtk"]


def test_verify_passes(tmp_path, capsys):
    cfg = _write(tmp_path, "mesh.n = 2\nmodel.m = 1.3\nmodel.kappa = 0.5\ntime.tau = 1e-2\n"
                           "initial.condition = random(0.5, 0.1)\n")
    assert main(["verify", cfg]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "checks passed" in out


def test_verify_ac_mode(tmp_path, capsys):
    cfg = _write(tmp_path, "mesh.n = 2\nmodel.bc_mode = AC\nmodel.m_gamma = 0.7\n")
    assert main(["verify", cfg]) == 0


def test_refine_reports_ladder(tmp_path, capsys):
    cfg = _write(tmp_path, "mesh.n = 2\ntime.tau = 1e-2\ntime.n_steps = 2\n"
                           "initial.condition = tanh_interface(1, 0, 0.5, 0.3)\n")
    assert main(["refine", cfg, "--levels", "2"]) == 0
    out = capsys.readouterr().out
    assert "0-1," in out and "decreasing:" in out


def test_config_errors_exit_2(tmp_path, capsys):
    cfg = _write(tmp_path, "model.m = -1\n")
    assert main(["run", cfg]) == 2
    assert "model.m" in capsys.readouterr().err
    assert main(["run", _write(tmp_path, "mesh.n = 2\n"), "--set", "nokey"]) == 2
    assert main(["run", str(tmp_path / "missing.cfg")]) == 2


def test_newton_failure_exit_1(tmp_path, capsys):
    cfg = _write(tmp_path, "mesh.n = 4\ntime.tau = 0.1\nnewton.max_iters = 1\n"
                           "newton.abs_tol = 1e-300\nnewton.rel_tol = 1e-300\n"
                           "initial.condition = random(0.5)\noutput.dir = o\n")
    assert main(["run", cfg]) == 1
    assert "solver failure" in capsys.readouterr().err


def test_thread_limit_env(tmp_path, monkeypatch):
    monkeypatch.setenv("CHDYN_THREADS", "1")
    cfg = _write(tmp_path, "mesh.n = 2\ntime.n_steps = 1\noutput.dir = o\n")
    assert main(["run", cfg]) == 0
