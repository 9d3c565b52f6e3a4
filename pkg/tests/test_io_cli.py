import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from psdcomplete import io as fio
from psdcomplete.cli import main
from psdcomplete.completion import CompletionInstance, InstanceKind, generate_instance


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def run_cli(*argv):
    return main([str(a) for a in argv])


IDENTITY3 = "# psdcomplete-instance v1\n3 6\n1 1 1\n2 2 1\n3 3 1\n1 2 0\n1 3 0\n2 3 0\n"


# ---------------------------------------------------------------- formats


def test_instance_round_trip(tmp_path):
    inst = generate_instance(InstanceKind.FEASIBLE_FROM_SQUARE, 12, 36, 4)
    path = tmp_path / "a.txt"
    fio.write_instance(inst, path)
    back = fio.read_instance(path)
    assert back.same_entries(inst)
    np.testing.assert_array_equal(back.constraints.values, inst.constraints.values)
    assert fio.format_instance(back) == fio.format_instance(inst)


def test_factor_round_trip_bit_exact(tmp_path, rng):
    U, lam = rng.standard_normal((7, 3)), rng.uniform(0, 1, 3)
    fio.write_factor(U, lam, tmp_path / "f")
    U2, lam2 = fio.read_factor(tmp_path / "f")
    assert U2.tobytes() == U.tobytes() and lam2.tobytes() == lam.tobytes()


def test_comments_and_one_based_indices():
    inst = fio.parse_instance("# hi\n2 3\n1 1 4\n# mid\n1 2 -1\n2 2 5\n")
    assert sorted(inst.entries()) == [(0, 0, 4.0), (0, 1, -1.0), (1, 1, 5.0)]


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("", "empty"),
        ("2\n", ":1: expected header"),
        ("2 2\n1 1 1\n2 2\n", ":3: expected 'i j value'"),
        ("2 2\n1 1 1\n2 3 1\n", ":3: index out of range"),
        ("2 2\n1 1 1\n2 1 1\n", ":3: entries must satisfy"),
        ("2 2\n1 1 1\n2 2 nan\n", ":3: value must be finite"),
        ("2 3\n1 1 1\n2 2 1\n1 1 2\n", ":4: duplicate entry (1, 1), first given on line 2"),
        ("2 3\n1 1 1\n2 2 1\n", "announces m=3"),
        ("2 2\n1 1 1\n1 2 1\n", "diagonal entries missing for indices [2]"),
    ],
)
def test_parse_errors_name_the_line(text, fragment):
    with pytest.raises(fio.FormatError) as err:
        fio.parse_instance(text, "f.txt")
    assert fragment in str(err.value)


# ---------------------------------------------------------------- check / verify


def test_check_identity(tmp_path, capsys):
    path = write(tmp_path, "id3.txt", IDENTITY3)
    assert run_cli("check", path) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["status"] == "FeasibleToEps" and doc["format"] == fio.RESULT_FORMAT
    assert doc["descent_steps"] == 0 and doc["config"]["alpha"] == 7.0


def test_check_odd_cycle_and_verify(tmp_path):
    inst = generate_instance(InstanceKind.INFEASIBLE_CHAIN, 8, 13, 1)
    path = tmp_path / "cyc.txt"
    fio.write_instance(inst, path)
    res = tmp_path / "cyc.json"
    assert run_cli("check", path, "--out", res) == 2
    doc = fio.read_result(res)
    assert doc["status"] == "Infeasible" and len(doc["certificate"]) == inst.m
    assert run_cli("verify", res, path) == 0

    # tampering: the negated certificate is refuted by recomputation
    doc["certificate"] = [-v for v in doc["certificate"]]
    bad = tmp_path / "bad.json"
    fio.write_result(doc, bad)
    assert run_cli("verify", bad, path) != 0


def test_duplicate_entry_exit_1(tmp_path, capsys):
    path = write(tmp_path, "dup.txt", "2 3\n1 1 1\n2 2 1\n1 1 1\n")
    assert run_cli("check", path) == 1
    assert "dup.txt:4: duplicate entry (1, 1), first given on line 2" in capsys.readouterr().err


def test_usage_errors_exit_1(tmp_path):
    assert run_cli("check") == 1
    assert run_cli("frobnicate") == 1
    assert run_cli("check", tmp_path / "missing.txt") == 1
    assert run_cli("check", write(tmp_path, "a.txt", IDENTITY3), "--eps", "-1") == 1


def test_check_with_factor_verifies_gap(tmp_path):
    inst = generate_instance(InstanceKind.FEASIBLE_FROM_SQUARE, 15, 45, 2)
    path = tmp_path / "sq.txt"
    fio.write_instance(inst, path)
    res, fac = tmp_path / "r.json", tmp_path / "r.factor"
    assert run_cli("check", path, "--out", res, "--factor-out", fac) == 0
    assert run_cli("verify", res, path) == 0


def test_verify_mismatched_instance(tmp_path):
    a = write(tmp_path, "id3.txt", IDENTITY3)
    res = tmp_path / "r.json"
    run_cli("check", a, "--out", res)
    b = tmp_path / "other.txt"
    fio.write_instance(generate_instance(InstanceKind.DIAGONAL_ONLY, 4), b)
    assert run_cli("verify", res, b) == 1


# ---------------------------------------------------------------- square


def test_square_diagonal(tmp_path):
    inst = generate_instance(InstanceKind.DIAGONAL_ONLY, 6, seed=2)
    path = tmp_path / "d.txt"
    fio.write_instance(inst, path)
    res = tmp_path / "d.json"
    assert run_cli("square", path, "--eps", "1e-3", "--out", res) == 0
    doc = fio.read_result(res)
    U, lam = fio.read_factor(doc["factor_file"])
    X = (U * lam) @ U.T
    assert np.max(np.abs(np.diag(X) - inst.values)) <= 1e-3
    assert run_cli("verify", res, path) == 0


def test_square_n50_and_verify(tmp_path):
    inst = generate_instance(InstanceKind.FEASIBLE_FROM_SQUARE, 50, 150, 0)
    path = tmp_path / "s50.txt"
    fio.write_instance(inst, path)
    res, fac = tmp_path / "s50.json", tmp_path / "s50.factor"
    assert run_cli("square", path, "--out", res, "--factor-out", fac) == 0
    assert run_cli("verify", res, path) == 0
    # a perturbed factor is refuted
    U, lam = fio.read_factor(fac)
    fio.write_factor(U, lam * 1.01, fac)
    assert run_cli("verify", res, path) == 2


def test_square_infeasible_exit_3(tmp_path):
    inst = generate_instance(InstanceKind.INFEASIBLE_CHAIN, 8, 11, 0)
    path = tmp_path / "c.txt"
    fio.write_instance(inst, path)
    res = tmp_path / "c.json"
    assert run_cli("square", path, "--max-iters", "150", "--out", res) == 3
    assert fio.read_result(res)["reason"] == "iteration budget exhausted"
    assert run_cli("verify", res, path) == 3


# ---------------------------------------------------------------- bench


def read_csv(path):
    with open(path, newline="") as fh:
        assert fh.readline().rstrip("\n") == fio.BENCH_TAG
        return list(csv.DictReader(fh))


def test_bench_smoke(tmp_path):
    out = tmp_path / "b.csv"
    assert run_cli("bench", "--sizes", "20", "--eps-grid", "0.1", "--out", out) == 0
    rows = read_csv(out)
    assert len(rows) == 1 and rows[0]["status"] == "ok" and rows[0]["n"] == "20"


def test_bench_repeatable(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["bench", "--sizes", "15", "--eps-grid", "0.1,0.05", "--seeds", "0,1", "--no-timing"]
    run_cli(*args, "--out", a)
    run_cli(*args, "--out", b)
    assert a.read_bytes() == b.read_bytes()
    assert len(read_csv(a)) == 4


def test_bench_bad_size_recorded(tmp_path):
    out = tmp_path / "b.csv"
    run_cli("bench", "--sizes", "2", "--kind", "chain", "--eps-grid", "0.1", "--out", out)
    assert read_csv(out)[0]["status"].startswith("error")


def test_console_entry_point(tmp_path):
    path = write(tmp_path, "id3.txt", IDENTITY3)
    proc = subprocess.run([sys.executable, "-m", "psdcomplete", "check", path], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["status"] == "FeasibleToEps"
