"""Command-line front end: parsing, precedence, exit codes, emission."""

import subprocess
import sys

import pytest

from phasetrack.cli import load_config, main
from phasetrack.sweep import CSV_HEADER


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# ------------------------------------------------------------------- parsing


def test_help_exits_zero(capsys):
    code, out, _ = run_cli(capsys, "--help")
    assert code == 0
    assert "usage:" in out


def test_theory_line_for_one_regime(capsys):
    code, out, _ = run_cli(
        capsys, "theory", "--regime", "adaptive-coherent", "--n", "10000"
    )
    assert code == 0
    (line,) = out.splitlines()
    assert line.startswith("adaptive-coherent N=10000:")
    assert "X*=0.02" in line
    assert line.endswith("variance=0.005")


def test_theory_all_regimes_and_point_evaluation(capsys):
    code, out, _ = run_cli(capsys, "theory", "--n", "10000", "--x", "0.04")
    assert code == 0
    lines = out.splitlines()
    assert len(lines) == 5
    adaptive = next(l for l in lines if l.startswith("adaptive-coherent"))
    assert "at X=0.04 r=0: variance=0.00625" in adaptive
    mzi_line = next(l for l in lines if l.startswith("mzi"))
    assert mzi_line.endswith("variance=0.01")


def test_n_log_range_expansion(capsys):
    code, out, _ = run_cli(
        capsys, "theory", "--regime", "mzi", "--n", "100:10000:3"
    )
    assert code == 0
    ns = [line.split()[1] for line in out.splitlines()]
    assert ns == ["N=100:", "N=1000:", "N=10000:"]


@pytest.mark.parametrize(
    "argv",
    [
        (),  # missing subcommand
        ("bogus",),
        ("theory", "--bogus"),
        ("theory",),  # needs --n
        ("dyne", "--n", "100"),  # needs --regime
        ("mzi",),  # needs --n
        ("optimum", "--n", "100"),  # needs --regime
        ("theory", "--regime", "mzi", "--n", "1:10"),
        ("theory", "--regime", "mzi", "--n", "a:b:3"),
        ("theory", "--regime", "mzi", "--n", "0:10:3"),
        ("theory", "--regime", "mzi", "--n", "10:100:0"),
        ("theory", "--regime", "mzi", "--n", "ten"),
        ("dyne", "--regime", "heterodyne-coherent", "--n", "100", "--r", "0.5"),
    ],
)
def test_validation_errors_exit_one(capsys, argv):
    code, _, err = run_cli(capsys, *argv)
    assert code == 1
    assert "error" in err


# ------------------------------------------------------- config file handling


def test_config_parsing(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "# comment line\n"
        "regime = adaptive-coherent\n"
        "budget-secs = 0   # inline comment\n"
        "\n"
        "n = 100 200\n",
        encoding="utf-8",
    )
    assert load_config(cfg) == {
        "regime": "adaptive-coherent",
        "budget_secs": "0",
        "n": "100 200",
    }


def test_config_supplies_defaults_cli_overrides(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "regime = adaptive-coherent\nbudget-secs = 0\nn = 100 200\n",
        encoding="utf-8",
    )
    # file alone: two grid points
    code, out, err = run_cli(capsys, "sweep", "--config", str(cfg))
    assert code == 3
    assert "0/2 grid points" in err
    assert out == CSV_HEADER + "\n"
    # command line wins over the file
    code, _, err = run_cli(capsys, "sweep", "--config", str(cfg), "--n", "100")
    assert code == 3
    assert "0/1 grid points" in err


def test_config_rejects_unknown_key(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("bogus = 1\n", encoding="utf-8")
    code, _, err = run_cli(capsys, "theory", "--config", str(cfg), "--n", "10")
    assert code == 1
    assert "unknown config key" in err


def test_config_syntax_error(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("just a line without equals\n", encoding="utf-8")
    code, _, err = run_cli(capsys, "theory", "--config", str(cfg), "--n", "10")
    assert code == 1
    assert "expected key = value" in err


def test_missing_config_exits_two(capsys, tmp_path):
    code, _, err = run_cli(
        capsys, "theory", "--config", str(tmp_path / "nope.cfg"), "--n", "10"
    )
    assert code == 2
    assert "cannot read config" in err


# ---------------------------------------------------------- runs and emission


def test_budget_exceeded_emits_partial_and_exits_three(capsys):
    code, out, err = run_cli(
        capsys,
        "sweep",
        "--regime",
        "adaptive-coherent",
        "--n",
        "100",
        "--x-factors",
        "0.5,1,2",
        "--budget-secs",
        "0",
    )
    assert code == 3
    assert "0/3 grid points" in err
    assert out == CSV_HEADER + "\n"


def test_unwritable_output_exits_two(capsys, tmp_path):
    code, _, err = run_cli(
        capsys,
        "sweep",
        "--regime",
        "adaptive-coherent",
        "--n",
        "100",
        "--budget-secs",
        "0",
        "--out",
        str(tmp_path / "no_such_dir" / "x.csv"),
    )
    assert code == 2
    assert "cannot write results" in err


def test_optimum_budget_zero_reports_unconverged(capsys):
    code, out, _ = run_cli(
        capsys,
        "optimum",
        "--regime",
        "adaptive-coherent",
        "--n",
        "100",
        "--trajectories",
        "8",
        "--budget-secs",
        "0",
    )
    assert code == 3
    assert "converged=False" in out
    assert "X*=0.2" in out


@pytest.mark.slow
def test_dyne_run_writes_csv(capsys, tmp_path):
    out_path = tmp_path / "row.csv"
    code, out, _ = run_cli(
        capsys,
        "dyne",
        "--regime",
        "adaptive-coherent",
        "--n",
        "100",
        "--trajectories",
        "4",
        "--seed",
        "5",
        "--out",
        str(out_path),
    )
    assert code == 0
    assert out == ""
    lines = out_path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == CSV_HEADER
    fields = lines[1].split(",")
    assert fields[0] == "adaptive-coherent"
    assert fields[1] == "100"
    assert fields[2] == "0.2"
    assert fields[12] == "364"  # 4 trajectories x 91 scheduled samples


@pytest.mark.slow
def test_module_entry_point_smoke():
    proc = subprocess.run(
        [sys.executable, "-m", "phasetrack", "theory", "--regime", "mzi", "--n", "100"],
        capture_output=True,
        text=True,
        timeout=120,
    )
    assert proc.returncode == 0
    assert proc.stdout.strip() == "mzi N=100: optimal variance=0.1"
