import json

import polars as pl
import pytest

from tgspec.cli import EXIT_INPUT, EXIT_OK, main


@pytest.mark.parametrize(
    "family, regime, n, expected",
    [
        ("rg", "stretching", 50, "alpha=0.5 L_min=15 L_max=25"),
        ("eg", "stretching", 50, "alpha=0.5 L_min=10 L_max=20"),
        ("eg", "contracting", 120, "alpha=0 L_min=0 L_max=1"),
    ],
)
def test_advise(capsys, family, regime, n, expected):
    code = main(["advise", "--family", family, "--regime", regime, "--n", str(n)])
    assert code == EXIT_OK
    assert capsys.readouterr().out.strip() == expected


def test_solve_writes_outputs(tmp_path):
    out = tmp_path / "run"
    code = main(
        ["solve", "--problem", "f16", "--family", "eg", "--alpha", "0.5", "--L", "15",
         "--n", "10", "--samples", "25", "--out", str(out)]
    )
    assert code == EXIT_OK
    trajectory = pl.read_csv(out / "trajectory.csv")
    assert trajectory.columns[:2] == ["t", "x1"]
    assert trajectory.columns[-1] == "y4"
    assert trajectory.height == 25
    assert pl.read_csv(out / "constraint.csv").columns == ["t", "d1"]
    report = (out / "report.txt").read_text()
    assert "J_n:" in report and "kkt_residual:" in report
    assert not (out / "schedule.csv").exists()


def test_solve_zero_initial_state_reports_zero_cost(tmp_path):
    code = main(
        ["solve", "--problem", "dcs", "--L", "0.025", "--alpha", "-0.3", "--n", "10",
         "--x0", "0,0,0,0,0", "--out", str(tmp_path)]
    )
    assert code == EXIT_OK
    assert "J_n: 0.000000" in (tmp_path / "report.txt").read_text()


def test_solve_with_schedule_writes_schedule_table(tmp_path):
    code = main(
        ["solve", "--problem", "dcs", "--L", "0.025", "--alpha-schedule", "6:-0.4,8..12/2:-0.3",
         "--out", str(tmp_path)]
    )
    assert code == EXIT_OK
    table = pl.read_csv(tmp_path / "schedule.csv")
    assert table["n"].to_list() == [6, 8, 10, 12]


def test_solve_missing_problem_file(tmp_path):
    out = tmp_path / "never"
    code = main(["solve", "--problem", str(tmp_path / "nope.json"), "--out", str(out)])
    assert code == EXIT_INPUT
    assert not out.exists()


def test_solve_bad_arguments(tmp_path):
    assert main(["solve", "--alpha", "-0.7", "--n", "5", "--out", str(tmp_path)]) == EXIT_INPUT
    assert main(["solve", "--method", "dense"]) == EXIT_INPUT
    assert main(["solve", "--n", "10,5", "--out", str(tmp_path)]) == EXIT_INPUT


def test_solve_ips_sizing_is_solver_error(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("TGSPEC_IPS_MAX_N", "4")
    code = main(
        ["solve", "--problem", "dcs", "--L", "0.025", "--alpha", "-0.4", "--n", "6",
         "--method", "ips", "--out", str(tmp_path)]
    )
    assert code == 3
    assert "assemble" in capsys.readouterr().err


def test_export_round_trip(tmp_path):
    path = tmp_path / "f16.json"
    assert main(["export", "--problem", "f16", "--out", str(path)]) == EXIT_OK
    data = json.loads(path.read_text())
    assert set(data) == {"A", "B", "C", "D", "Q", "R", "x0"}
    out = tmp_path / "from_file"
    code = main(["solve", "--problem", str(path), "--n", "8", "--out", str(out)])
    assert code == EXIT_OK
    builtin = tmp_path / "builtin"
    assert main(["solve", "--problem", "f16", "--n", "8", "--out", str(builtin)]) == EXIT_OK
    assert (out / "trajectory.csv").read_bytes() == (builtin / "trajectory.csv").read_bytes()


def test_sweep_row_count(tmp_path):
    code = main(
        ["sweep", "--integrals", "I1,I2,I3", "--family", "rg,eg", "--alphas", "0,0.5,1,2",
         "--Ls", "1", "--ns", "2..6", "--out", str(tmp_path)]
    )
    assert code == EXIT_OK
    df = pl.read_csv(tmp_path / "sweep.csv")
    assert df.height == 120
    assert df.columns == [
        "integral", "family", "alpha", "L", "n", "max_abs_error", "max_log_error"
    ]


def test_sweep_convergence_and_determinism(tmp_path):
    args = ["sweep", "--integrals", "I1", "--family", "eg", "--alphas", "0.5", "--Ls", "1",
            "--ns", "2..20"]
    assert main(args + ["--workers", "1", "--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(args + ["--workers", "3", "--out", str(tmp_path / "b")]) == EXIT_OK
    first = (tmp_path / "a" / "sweep.csv").read_bytes()
    assert first == (tmp_path / "b" / "sweep.csv").read_bytes()
    df = pl.read_csv(tmp_path / "a" / "sweep.csv")
    assert df.height == 19
    assert df["max_log_error"][-1] <= df["max_log_error"][0] - 6


def test_sweep_tiny_scaling_is_finite(tmp_path):
    code = main(
        ["sweep", "--integrals", "I2", "--family", "eg", "--alphas", "0.5", "--Ls", "1e-10,0.2",
         "--ns", "4", "--out", str(tmp_path)]
    )
    assert code == EXIT_OK
    df = pl.read_csv(tmp_path / "sweep.csv")
    assert df["max_log_error"].min() >= -17


def test_sweep_empty_grid(tmp_path):
    assert main(["sweep", "--alphas", "", "--out", str(tmp_path)]) == EXIT_INPUT


def test_solve_ips_rejects_explicit_initial_rows(tmp_path, capsys):
    out = tmp_path / "never"
    code = main(
        ["solve", "--problem", "dcs", "--L", "0.025", "--alpha", "-0.4", "--n", "6",
         "--method", "ips", "--initial-condition", "explicit", "--out", str(out)]
    )
    assert code == EXIT_INPUT
    assert "input error" in capsys.readouterr().err
    assert not out.exists()
