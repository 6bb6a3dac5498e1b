import csv
import os

import pytest

from perspcut.bench import FIELDS
from perspcut.cli import main


def _result(out):
    lines = [l for l in out.splitlines() if l.startswith("RESULT: ")]
    rows = [next(csv.reader([l[len("RESULT: "):]])) for l in lines]
    return [dict(zip(FIELDS, r)) for r in rows]


def test_solve_example(corpus_dir, capsys):
    assert main(["solve", os.path.join(corpus_dir, "example1.txt"), "--mode", "full"]) == 0
    (row,) = _result(capsys.readouterr().out)
    assert row["status"] == "optimal" and row["setting"] == "full"
    assert float(row["primal"]) == pytest.approx(-0.5, abs=1e-6)
    assert len(row) == len(FIELDS)


def test_solve_no_bt_and_seed(corpus_dir, capsys):
    path = os.path.join(corpus_dir, "cubic_2.txt")
    assert main(["solve", path, "--no-bound-tightening", "--seed", "3", "--gap", "1e-5"]) == 0
    (row,) = _result(capsys.readouterr().out)
    assert row["setting"] == "full-nobt" and row["seed"] == "3" and row["status"] == "optimal"


def test_time_limit(corpus_dir, capsys):
    path = os.path.join(corpus_dir, "facility_3.txt")
    assert main(["solve", path, "--time-limit", "0.001"]) == 0
    (row,) = _result(capsys.readouterr().out)
    assert row["status"] == "time-limit"


def test_missing_file(capsys):
    assert main(["solve", "/nonexistent/model.txt"]) == 2
    assert "cannot read" in capsys.readouterr().err


def test_parse_error_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.txt"
    p.write_text("VARS\ny continuous 0 1\nOBJ\ny\nNONLIN\ny ^ 1.5 <= 1\n")
    assert main(["solve", str(p)]) == 2
    assert "line 6" in capsys.readouterr().err
    assert main(["detect", str(p)]) == 2


def test_unsupported_exit_code(tmp_path):
    p = tmp_path / "tri.txt"
    p.write_text("VARS\na continuous -1 1\nb continuous -1 1\nc continuous -1 1\nOBJ\na\n"
                 "NONLIN\na*b*c - a^3*b <= 1\n")
    assert main(["solve", str(p)]) == 3


def test_detect_listing(corpus_dir, capsys):
    assert main(["detect", os.path.join(corpus_dir, "example1.txt")]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[-1] == "1 structures" and "class=nonconvex" in out[0] and "indicator=z" in out[0]
    assert main(["detect", os.path.join(corpus_dir, "planted_convex.txt")]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[-1] == "1 structures" and "class=convex" in out[0]
    assert main(["detect", os.path.join(corpus_dir, "milp.txt")]) == 0
    assert capsys.readouterr().out.strip() == "0 structures"


def test_compare_writes_report(corpus_dir, tmp_path, capsys):
    files = [os.path.join(corpus_dir, f"facility_{s}.txt") for s in range(2)]
    out = tmp_path / "report.csv"
    code = main(["compare", *files, "--modes", "off,convex", "--permutations", "2",
                 "--out", str(out)])
    assert code == 0
    text = capsys.readouterr().out
    assert len(_result(text)) == 8
    assert "rel.nodes" in text
    rows = list(csv.reader(open(out, newline="")))
    assert tuple(rows[0]) == FIELDS and len(rows) == 9
    assert {r[2] for r in rows[1:]} == {"0", "1"}


def test_compare_rejects_bad_input(corpus_dir):
    path = os.path.join(corpus_dir, "example1.txt")
    assert main(["compare", path, "--modes", "off,turbo"]) == 2
    assert main(["compare", path, "--permutations", "0"]) == 2
    assert main(["compare", "/nonexistent.txt"]) == 2


def test_module_entry_point(corpus_dir):
    import subprocess
    import sys

    r = subprocess.run([sys.executable, "-m", "perspcut", "detect",
                        os.path.join(corpus_dir, "example1.txt")], capture_output=True, text=True)
    assert r.returncode == 0 and "1 structures" in r.stdout
