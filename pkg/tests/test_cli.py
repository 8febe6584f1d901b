import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest
from openpyxl import load_workbook

from config import BASE_DIR, settings
from fdode.main import (
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_PROBLEM_FILE,
    EXIT_USAGE,
    run_cli,
)

UNKNOWN_FUNCTION = """\
dim = 1
u0 = [1.0]
phi = ["tan(t)"]

[[term]]
powers = [1]
matrix = [["-1"]]
"""

EXPLOSIVE = """\
dim = 1
u0 = [1.0]
phi = ["0"]

[[term]]
powers = [0]
matrix = [["1000"]]
"""


def read_rows(path):
    with path.open(encoding="utf-8", newline="") as handle:
        return list(csv.DictReader(handle))


def read_pairs(path):
    pairs = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        if " = " in line and not line.startswith("#"):
            key, value = line.split(" = ", 1)
            pairs[key] = value
    return pairs


def test_solve_quadratic_example(tmp_path, capsys):
    out = tmp_path / "solve"
    code = run_cli(
        [
            "solve",
            "--problem",
            "paper_example",
            "--rank",
            "3",
            "--h",
            "0.2",
            "--t-end",
            "2",
            "--inner",
            "8",
            "--out",
            str(out),
        ]
    )
    assert code == EXIT_OK
    printed = capsys.readouterr().out.split()
    assert str(out / "summary.csv") in printed
    assert str(out / "manifest.json") in printed

    summary = read_rows(out / "summary.csv")
    assert [row["rank"] for row in summary] == ["0", "1", "2", "3"]
    errors = [float(row["sup_error"]) for row in summary]
    assert all(b < a for a, b in zip(errors, errors[1:]))

    solution = read_rows(out / "solution.csv")
    assert len(solution) == 10 * 16 + 1
    assert float(solution[0]["t"]) == 0.0
    assert float(solution[-1]["t"]) == 2.0
    assert float(solution[0]["p3_u2"]) == 1.0

    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "solve"
    assert manifest["parameters"]["rank"] == 3
    assert manifest["parameters"]["seed"] == settings.seed
    assert manifest["tool_version"] == settings.app_version
    assert "errors.csv" in manifest["files"]
    assert printed == [str(out / name) for name in manifest["files"]]
    assert manifest["results"]["sup_error_0"] == pytest.approx(errors[0])


def test_solve_writes_workbook(tmp_path):
    out = tmp_path / "xlsx"
    code = run_cli(
        [
            "solve",
            "--problem",
            "cubic_1d",
            "--rank",
            "1",
            "--h",
            "0.5",
            "--t-end",
            "1",
            "--inner",
            "2",
            "--out",
            str(out),
            "--xlsx",
        ]
    )
    assert code == EXIT_OK
    wb = load_workbook(out / "solve.xlsx")
    assert wb.sheetnames == ["solution", "errors", "summary"]


def test_missing_problem_is_usage_error(tmp_path, capsys):
    code = run_cli(["solve", "--rank", "1", "--h", "0.1", "--t-end", "1"])
    assert code == EXIT_USAGE
    assert "--problem" in capsys.readouterr().err


@pytest.mark.parametrize("h", ["0", "-0.1", "nan", "abc"])
def test_bad_step_is_usage_error(h):
    code = run_cli(
        [
            "solve",
            "--problem",
            "paper_example",
            "--rank",
            "1",
            "--h",
            h,
            "--t-end",
            "1",
        ]
    )
    assert code == EXIT_USAGE


def test_unknown_problem(tmp_path, capsys):
    code = run_cli(
        [
            "solve",
            "--problem",
            "no_such_problem",
            "--rank",
            "1",
            "--h",
            "0.5",
            "--t-end",
            "1",
            "--out",
            str(tmp_path),
        ]
    )
    assert code == EXIT_PROBLEM_FILE
    assert "no_such_problem" in capsys.readouterr().err


def test_unknown_function_in_problem_file(tmp_path, capsys):
    problem = tmp_path / "bad.toml"
    problem.write_text(UNKNOWN_FUNCTION, encoding="utf-8")
    code = run_cli(
        [
            "solve",
            "--problem",
            str(problem),
            "--rank",
            "1",
            "--h",
            "0.5",
            "--t-end",
            "1",
            "--out",
            str(tmp_path / "out"),
        ]
    )
    assert code == EXIT_PROBLEM_FILE
    assert "unknown-function" in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


def test_overflow_is_numerical_failure(tmp_path, capsys):
    problem = tmp_path / "explosive.toml"
    problem.write_text(EXPLOSIVE, encoding="utf-8")
    code = run_cli(
        [
            "solve",
            "--problem",
            str(problem),
            "--rank",
            "0",
            "--h",
            "0.5",
            "--t-end",
            "3",
            "--out",
            str(tmp_path / "out"),
        ]
    )
    assert code == EXIT_NUMERICAL
    assert "numerical failure in linode" in capsys.readouterr().err


def test_unwritable_output_is_usage_error(tmp_path, capsys):
    blocker = tmp_path / "taken"
    blocker.write_text("", encoding="utf-8")
    code = run_cli(
        [
            "solve",
            "--problem",
            "linear_decay",
            "--rank",
            "0",
            "--h",
            "1",
            "--t-end",
            "2",
            "--out",
            str(blocker),
        ]
    )
    assert code == EXIT_USAGE
    assert "cannot write results" in capsys.readouterr().err


def test_linear_algebra_failure_is_numerical(tmp_path, monkeypatch, capsys):
    def singular(*args, **kwargs):
        raise np.linalg.LinAlgError("Singular matrix")

    monkeypatch.setattr("fdode.commands.solve.fd_solve", singular)
    code = run_cli(
        [
            "solve",
            "--problem",
            "linear_decay",
            "--rank",
            "0",
            "--h",
            "1",
            "--t-end",
            "2",
            "--out",
            str(tmp_path / "out"),
        ]
    )
    assert code == EXIT_NUMERICAL
    assert "numerical failure in linalg" in capsys.readouterr().err


def test_check_quadratic_example(tmp_path):
    out = tmp_path / "check"
    code = run_cli(
        [
            "check",
            "--problem",
            "paper_example",
            "--samples",
            "2000",
            "--seed",
            "3",
            "--out",
            str(out),
        ]
    )
    assert code == EXIT_OK
    pairs = read_pairs(out / "hypotheses.txt")
    assert pairs["t_range"] == "0 6"
    assert pairs["seed"] == "3"
    assert pairs["condition3_ok"] == "true"
    assert 2.2 < float(pairs["kappa"]) <= 2.9
    assert float(pairs["kappa_bound"]) > float(pairs["kappa"])
    assert float(pairs["alpha"]) > 0
    assert float(pairs["h_bar"]) > 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["parameters"]["seed"] == 3
    assert manifest["files"] == ["hypotheses.txt", "manifest.json"]


def test_adm_quadratic_example_diverges(tmp_path):
    out = tmp_path / "adm"
    code = run_cli(
        [
            "adm",
            "--problem",
            "paper_example",
            "--rank",
            "4",
            "--t-end",
            "2",
            "--out",
            str(out),
        ]
    )
    assert code == EXIT_OK
    pairs = read_pairs(out / "adm_report.txt")
    assert pairs["verdict"] == "diverging"
    assert pairs["linear_split"] == "-1 0; 0 -1"
    rows = read_rows(out / "adm_terms.csv")
    assert len(rows) == 2 * settings.adm.inner_steps + 1
    assert "delta_4" in rows[0]


def test_adm_needs_rank_two(tmp_path):
    code = run_cli(
        [
            "adm",
            "--problem",
            "paper_example",
            "--rank",
            "1",
            "--t-end",
            "2",
            "--out",
            str(tmp_path),
        ]
    )
    assert code == EXIT_USAGE


def test_adm_split_size_is_checked(tmp_path):
    code = run_cli(
        [
            "adm",
            "--problem",
            "paper_example",
            "--rank",
            "2",
            "--t-end",
            "1",
            "--split",
            "-1",
            "--out",
            str(tmp_path),
        ]
    )
    assert code == EXIT_USAGE


def convergence_run(out):
    return run_cli(
        [
            "convergence",
            "--problem",
            "paper_example",
            "--ranks",
            "0..3",
            "--h",
            "0.5",
            "--t-end",
            "2",
            "--inner",
            "4",
            "--out",
            str(out),
        ]
    )


def test_convergence_is_deterministic(tmp_path):
    assert convergence_run(tmp_path / "a") == EXIT_OK
    assert convergence_run(tmp_path / "b") == EXIT_OK
    first = (tmp_path / "a" / "convergence.csv").read_bytes()
    assert first == (tmp_path / "b" / "convergence.csv").read_bytes()
    rows = read_rows(tmp_path / "a" / "convergence.csv")
    assert [row["rank"] for row in rows] == ["0", "1", "2", "3"]
    assert rows[0]["ratio_to_previous"] == ""


def test_convergence_ratios_below_one(tmp_path):
    out = tmp_path / "ratios"
    code = run_cli(
        [
            "convergence",
            "--problem",
            "paper_example",
            "--ranks",
            "0..4",
            "--h",
            "0.2",
            "--t-end",
            "6",
            "--out",
            str(out),
        ]
    )
    assert code == EXIT_OK
    rows = read_rows(out / "convergence.csv")
    ratios = [float(row["ratio_to_previous"]) for row in rows[1:]]
    assert len(ratios) == 4
    assert all(0 < r < 1 for r in ratios)


def test_convergence_rank_range_syntax(tmp_path):
    code = run_cli(
        [
            "convergence",
            "--problem",
            "paper_example",
            "--ranks",
            "3..1",
            "--h",
            "0.5",
            "--t-end",
            "2",
        ]
    )
    assert code == EXIT_USAGE


def test_compare_linear_decay(tmp_path):
    out = tmp_path / "compare"
    code = run_cli(
        [
            "compare",
            "--problem",
            "linear_decay",
            "--rank",
            "2",
            "--h",
            "0.5",
            "--t-end",
            "3",
            "--adm-inner",
            "64",
            "--out",
            str(out),
        ]
    )
    assert code == EXIT_OK
    lines = (out / "compare.csv").read_text().splitlines()
    assert len(lines) == 122
    rows = read_rows(out / "compare.csv")
    assert float(rows[-1]["t"]) == 3.0
    assert float(rows[-1]["fd_error"]) < 1e-6
    assert float(rows[-1]["ref_error"]) < 1e-6
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["parameters"]["comparator"] == "exact"


@pytest.mark.parametrize("argv", [["--version"], ["--help"]])
def test_version_and_help(argv, capsys):
    assert run_cli(argv) == EXIT_OK
    assert settings.app_name in capsys.readouterr().out


def test_missing_command_is_usage_error():
    assert run_cli([]) == EXIT_USAGE


def test_default_output_directory(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    code = run_cli(
        [
            "solve",
            "--problem",
            "linear_decay",
            "--rank",
            "0",
            "--h",
            "1",
            "--t-end",
            "2",
        ]
    )
    assert code == EXIT_OK
    results = tmp_path / settings.output.dir
    assert (results / "summary.csv").is_file()
    assert (results / "manifest.json").is_file()


def test_seed_from_environment(tmp_path):
    out = tmp_path / "seeded"
    env = {**os.environ, "FDODE_SEED": "11"}
    completed = subprocess.run(
        [
            sys.executable,
            "-m",
            "fdode.main",
            "check",
            "--problem",
            "paper_example",
            "--samples",
            "200",
            "--out",
            str(out),
        ],
        cwd=BASE_DIR,
        env=env,
        capture_output=True,
        text=True,
    )
    assert completed.returncode == EXIT_OK, completed.stderr
    assert completed.stdout.split()[-1] == str(out / "manifest.json")
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["parameters"]["seed"] == 11
    assert read_pairs(out / "hypotheses.txt")["seed"] == "11"
