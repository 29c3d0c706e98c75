from __future__ import annotations

import csv
import json
import math

import numpy as np
import pytest

from hjreg.cli import run


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_exponents_raw(tmp_path, capsys):
    code = run(["exponents", "--M", "1", "--delta", "1", "--q", "2", "--T", "1", "--csv", "--out", str(tmp_path)])
    assert code == 0
    text = capsys.readouterr().out
    assert "K = 7" in text and "A = 4" in text
    [row] = _rows(tmp_path / "exponents.csv")
    assert list(row) == ["p", "q", "M", "delta", "T", "K", "A", "B", "gamma", "theta", "ex_space", "ex_time"]
    assert float(row["K"]) == 7.0 and float(row["A"]) == 4.0
    assert float(row["gamma"]) == pytest.approx(8 - 2 * math.sqrt(14), abs=1e-15)
    gamma_A = float(text.split("gamma_A =")[1].split()[0])
    assert gamma_A == pytest.approx(4 - 2 * math.sqrt(3), abs=1e-15)


def test_exponents_usage_errors(capsys):
    assert run(["exponents", "--M", "1"]) == 2
    assert run(["exponents", "--M", "1", "--delta", "1", "--q", "0.5", "--T", "1"]) == 2
    assert run(["nonsense"]) == 2


def test_solve_missing_problem():
    assert run(["solve", "--problem", "missing.json", "--nx", "11", "--nt", "2"]) == 2


def test_solve_outputs(tmp_path, cosine_json):
    out = tmp_path / "o"
    code = run(["solve", "--problem", str(cosine_json), "--nx", "121", "--nt", "10", "--vmax", "8",
                "--grid-box=-6:6", "--out", str(out), "--threads", "2"])
    assert code == 0
    rows = _rows(out / "cosine-grid.csv")
    assert list(rows[0]) == ["t", "x1", "u"]
    assert len(rows) == 121 * 11
    last = [r for r in rows if float(r["t"]) == 1.0]
    assert all(float(r["u"]) == math.cos(float(r["x1"])) for r in last)  # exact round trip
    meta = json.loads((out / "cosine-grid.json").read_text())
    assert meta["schema"] == "hjreg/1" and meta["cap_hits"] == 0
    assert meta["axes"][0] == {"lo": -6.0, "hi": 6.0, "nodes": 121}


def test_refuses_overwrite(tmp_path, cosine_json):
    argv = ["solve", "--problem", str(cosine_json), "--nx", "61", "--nt", "4", "--vmax", "8",
            "--grid-box=-6:6", "--out", str(tmp_path)]
    assert run(argv) == 0
    first = (tmp_path / "cosine-grid.csv").read_bytes()
    assert run(argv) == 2
    assert run(argv + ["--force"]) == 0
    assert (tmp_path / "cosine-grid.csv").read_bytes() == first


def test_extremal_example(tmp_path, capsys):
    code = run(["extremal", "--A", "2", "--p", "2", "--tau-grid", "0.01:0.3:10", "--out", str(tmp_path)])
    assert code == 0
    rows = _rows(tmp_path / "extremal.csv")
    assert len(rows) == 10
    assert list(rows[0]) == ["tau", "a_tau", "b_tau", "tau1", "xi", "xi_bruteforce", "ode_residual"]
    xi = [float(r["xi"]) for r in rows]
    assert all(b >= a for a, b in zip(xi, xi[1:]))
    summary = (tmp_path / "extremal-summary.txt").read_text()
    assert summary.startswith("# C_emp=")


def test_extremal_bad_grid():
    assert run(["extremal", "--A", "2", "--p", "2", "--tau-grid", "0.1:0.3"]) == 2
    assert run(["extremal", "--A", "2", "--p", "2", "--tau-grid", "0:0.3:4"]) == 2


def test_same_argv_same_bytes(tmp_path):
    argv = ["extremal", "--A", "4", "--p", "1.5", "--tau-grid", "0.05:0.2:3", "--seed", "7"]
    assert run(argv + ["--out", str(tmp_path / "a")]) == 0
    assert run(argv + ["--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "extremal.csv").read_bytes() == (tmp_path / "b" / "extremal.csv").read_bytes()


def test_lemmas_and_probe_on_battery(tmp_path, capsys):
    assert run(["lemmas", "--problem", "battery:2", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "lemmas-battery-2.json").read_text())
    assert doc["pass"] and doc["lemma1"]["pass"] and doc["lemma2"]["pass"]
    assert run(["probe", "--problem", "battery:2", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "probe-battery-2.json").read_text())
    assert doc["schema"] == "hjreg/1" and doc["pass"]
    assert "battery-2" in capsys.readouterr().out
    assert run(["probe", "--problem", "battery:99"]) == 2
    assert run(["probe", "--problem", "battery:1", "--resolution", "bad"]) == 2
