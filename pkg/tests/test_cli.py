import csv
import io
import json
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from painleve_spectra.cli import dump_json, fmt, main, minkowski_levels


def run(*argv):
    return subprocess.run([sys.executable, "-m", "painleve_spectra.cli", *argv],
                          capture_output=True, text=True)


def call(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def read_csv(text):
    meta = {}
    lines = []
    for line in text.splitlines():
        if line.startswith("#"):
            k, _, v = line[2:].partition(": ")
            meta[k] = v
        else:
            lines.append(line)
    return meta, list(csv.DictReader(io.StringIO("\n".join(lines))))


# --- formatting -------------------------------------------------------------

@given(st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_round_trips(v):
    assert float(fmt(v)) == v


def test_fmt_other_values():
    assert fmt(True) == "true" and fmt(None) == "" and fmt(float("nan")) == "nan"
    assert fmt(3) == "3" and fmt(1 / 3) == "0.33333333333333331"


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), max_size=5))
def test_json_round_trips(vals):
    back = json.loads(dump_json({"v": vals, "n": {"x": 1, "b": False, "s": "a,b"}}))
    assert back["v"] == vals and back["n"] == {"x": 1, "b": False, "s": "a,b"}


def test_minkowski_sums():
    two = minkowski_levels([-5 / 6, 13 / 6], 1.0, 3)
    assert [e for e, _, _ in two] == pytest.approx([-1 / 3, 2 / 3, 5 / 3])


# --- spectrum ---------------------------------------------------------------

def test_spectrum_case_a(capsys):
    code, out, _ = call(capsys, "spectrum", "--alpha", "5", "--beta", "-8", "--epsilon", "1",
                        "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert doc["schema_version"] == 1
    by_base = {round(s["base"], 9): s for s in doc["series"]}
    top = by_base[round(8 / 3, 9)]
    assert top["slope"] == 1 and top["infinite"]
    assert by_base[round(-1 / 3, 9)]["valid_p"] == [0]


def test_spectrum_decimal_beta(capsys):
    code, out, _ = call(capsys, "spectrum", "--alpha", "0", "--beta", "-0.2222222", "--epsilon", "1")
    assert code == 0
    meta, rows = read_csv(out)
    inf = sorted(float(r["base"]) for r in rows if r["infinite"] == "true")
    assert inf == pytest.approx([2 / 3, 1, 4 / 3], abs=1e-6)
    assert float(meta["beta"]) == -0.2222222


def test_spectrum_fraction_beta(capsys):
    code, out, _ = call(capsys, "spectrum", "--alpha", "0", "--beta", "-2/9", "--epsilon", "1")
    meta, rows = read_csv(out)
    assert code == 0 and float(meta["beta"]) == -2 / 9
    assert sorted(float(r["base"]) for r in rows) == pytest.approx([2 / 3, 1, 4 / 3])


def test_spectrum_positive_beta(capsys):
    code, out, _ = call(capsys, "spectrum", "--alpha", "0", "--beta", "4", "--epsilon", "1",
                        "--format", "json")
    assert code == 0
    series = json.loads(out)["series"]
    assert len(series) <= 2
    assert all(s["series"].startswith("Eps1BetaPos") for s in series)


def test_spectrum_coincident_flag(capsys):
    _, out, _ = call(capsys, "spectrum", "--case", "D", "--format", "json")
    hit = [s for s in json.loads(out)["series"] if abs(s["base"] - 4 / 3) < 1e-9]
    assert len(hit) == 1 and hit[0]["coincident"]


# --- eigensolve -------------------------------------------------------------

def test_eigensolve_case_a(capsys):
    code, out, _ = call(capsys, "eigensolve", "--case", "A", "-k", "4", "--with-y")
    assert code == 0
    meta, rows = read_csv(out)
    x = [float(r["energy"]) for r in rows if r["part"] == "x"]
    xy = [float(r["energy"]) for r in rows if r["part"] == "xy"]
    assert x == pytest.approx([-5 / 6, 13 / 6, 19 / 6, 25 / 6], abs=1e-4)
    assert xy[0] == pytest.approx(-1 / 3, abs=1e-4)
    assert meta["case"] == "A"


def test_eigensolve_case_b(capsys):
    code, out, _ = call(capsys, "eigensolve", "--case", "4.3", "-k", "3", "--L", "16")
    _, rows = read_csv(out)
    assert code == 0
    assert [float(r["energy"]) for r in rows] == pytest.approx([1 / 6, 1 / 2, 5 / 6], abs=1e-5)


def test_eigensolve_from_seed(capsys):
    # case B data integrated from a seed gives the same soft oscillator
    code, out, _ = call(capsys, "eigensolve", "--alpha", "0", "--beta", "-2/9", "--epsilon", "1",
                        "--z0", "1", "--f0", "-2/3", "--fp0", "-2/3", "-k", "3", "--L", "16")
    _, rows = read_csv(out)
    assert code == 0
    assert [float(r["energy"]) for r in rows] == pytest.approx([1 / 6, 1 / 2, 5 / 6], abs=1e-5)


# --- zero modes -------------------------------------------------------------

def test_zero_modes_case_a2(capsys, tmp_path):
    samples = tmp_path / "s.csv"
    code, out, _ = call(capsys, "zero-modes", "--case", "4.2", "--samples", str(samples))
    assert code == 0
    _, rows = read_csv(out)
    norm = sorted(float(r["physical_energy"]) for r in rows if r["normalizable"] == "true")
    for e in (-1.5, -0.5):
        assert np.any(np.isclose(norm, e, atol=1e-9))
    _, srows = read_csv(samples.read_text())
    assert len(srows) == 201 and "x" in srows[0]


def test_zero_modes_case_b(capsys):
    _, out, _ = call(capsys, "zero-modes", "--case", "B", "--format", "json")
    doc = json.loads(out)
    ann = [m for m in doc["modes"] if m["operator"] == "annihilation" and m["normalizable"]]
    assert sorted(m["physical_energy"] for m in ann) == pytest.approx([1 / 6, 1 / 2, 5 / 6])
    assert len(doc["samples"]["x"]) == 201


# --- potential --------------------------------------------------------------

def test_potential_table(capsys):
    code, out, _ = call(capsys, "potential", "--case", "B", "--L", "3", "--n", "7", "--y", "1")
    assert code == 0
    _, rows = read_csv(out)
    x = np.array([float(r["x"]) for r in rows])
    V = np.array([float(r["V"]) for r in rows])
    assert np.allclose(V, x ** 2 / 18 + 0.5)


def test_potential_closed_form(capsys):
    _, out, _ = call(capsys, "potential", "--case", "C", "--closed", "--L", "1", "--n", "3",
                     "--format", "json")
    doc = json.loads(out)
    assert doc["V"][1] == pytest.approx(-4 / 3)


# --- exit codes and determinism ---------------------------------------------

@pytest.mark.parametrize("argv", [
    ["spectrum", "--alpha", "5"],
    ["spectrum", "--case", "A", "--alpha", "1"],
    ["spectrum", "--alpha", "1", "--beta", "x", "--epsilon", "1"],
    ["spectrum", "--case", "Z"],
    ["spectrum", "--alpha", "1", "--beta", "-1", "--epsilon", "0"],
    ["eigensolve", "--case", "A", "--n", "10"],
    ["eigensolve", "--case", "A", "--tol", "1e-12"],
    ["eigensolve", "--alpha", "0", "--beta", "-1", "--epsilon", "1"],
    ["eigensolve", "--case", "A", "--z0", "1"],
    ["potential", "--case", "A", "--hbar", "0"],
    ["nonsense"],
])
def test_invalid_flags_exit_2(argv):
    assert run(*argv).returncode == 2


def test_bad_thread_env_exit_2():
    env = dict(os.environ, PAINLEVE_SPECTRA_THREADS="many")
    proc = subprocess.run([sys.executable, "-m", "painleve_spectra.cli", "spectrum", "--case", "A"],
                          capture_output=True, text=True, env=env)
    assert proc.returncode == 2


def test_computation_error_exit_3():
    # the seed escapes to a pole inside the requested window
    proc = run("potential", "--alpha", "0", "--beta", "-2/9", "--epsilon", "1", "--z0", "1",
               "--f0", "-2/3", "--fp0", "1", "--L", "6")
    assert proc.returncode == 3
    assert "PoleEscape" in proc.stderr


def test_byte_identical_output():
    a = run("eigensolve", "--case", "A", "-k", "3", "--format", "json")
    b = run("eigensolve", "--case", "A", "-k", "3", "--format", "json")
    assert a.returncode == 0 and a.stdout == b.stdout
    c = run("spectrum", "--case", "C")
    d = run("spectrum", "--case", "C")
    assert c.stdout == d.stdout


def test_verify_exit_0():
    proc = run("verify", "--suite", "painleve")
    assert proc.returncode == 0
    doc = json.loads(proc.stdout)
    assert doc["schema_version"] == 1 and doc["passed"]
    assert all(c["passed"] for c in doc["suites"]["painleve"]["checks"])


def test_output_file(tmp_path, capsys):
    path = tmp_path / "out.json"
    assert main(["spectrum", "--case", "A", "--format", "json", "-o", str(path)]) == 0
    assert capsys.readouterr().out == ""
    assert json.loads(path.read_text())["schema_version"] == 1
