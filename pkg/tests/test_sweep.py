"""Sweep grids, optimum search, and result serialization."""

import json
import math

import pytest

from phasetrack import theory
from phasetrack.sweep import (
    BudgetExceeded,
    CSV_HEADER,
    SweepConfig,
    SweepRow,
    default_epsilon,
    emit_results,
    find_optimum,
    grid_points,
    render_csv,
    render_json,
    run_sweep,
)

FAST = dict(trajectories=8, burn_in=1.0, sample_window=5.0)


def tiny_config(**kw):
    base = dict(regime="adaptive-coherent", n_values=(100.0,), seed=3, **FAST)
    base.update(kw)
    return SweepConfig(**base)


# ------------------------------------------------------------- config checks


@pytest.mark.parametrize(
    "kw",
    [
        dict(regime="adaptive-cohrent"),
        dict(n_values=()),
        dict(n_values=(100.0, -1.0)),
        dict(x_values=(0.1,), x_factors=(1.0,)),
        dict(x_values=()),
        dict(regime="mzi", x_values=(0.1,)),
        dict(regime="mzi", x_factors=(1.0,)),
        dict(regime="mzi", r_values=(0.1,)),
        dict(regime="mzi", epsilon_values=(0.5,)),
        dict(regime="mzi", mode="heterodyne"),
        dict(mode="adaptive"),
        dict(r_values=(0.1,)),
        dict(regime="heterodyne-coherent", epsilon_values=(0.5,)),
    ],
)
def test_config_rejects_bad_grids(kw):
    base = dict(regime="adaptive-coherent", n_values=(100.0,))
    base.update(kw)
    with pytest.raises(ValueError):
        SweepConfig(**base)


def test_default_epsilon_curve():
    assert default_epsilon(1.0) == 1.0
    assert default_epsilon(2.0) == 1.0  # clipped
    assert default_epsilon(10.0) == pytest.approx(0.670026, rel=1e-5)
    assert default_epsilon(1000.0) == pytest.approx(0.1336876, rel=1e-5)


def test_grid_defaults_adaptive_coherent():
    pts = grid_points(tiny_config(n_values=(10000.0,)))
    assert len(pts) == 1
    p = pts[0]
    assert p.x == pytest.approx(0.02)
    assert p.r == 0.0
    assert p.epsilon == 1.0
    assert p.mode == "adaptive"
    assert p.trajectories == 8
    assert p.burn_in == 1.0 and p.sample_window == 5.0


def test_grid_defaults_squeezed_and_heterodyne():
    pts = grid_points(tiny_config(regime="adaptive-squeezed", n_values=(1000.0,)))
    opt = theory.optimal_parameters("adaptive-squeezed", 1000.0)
    assert pts[0].r == pytest.approx(opt.optimal_r)
    assert pts[0].epsilon == pytest.approx(default_epsilon(1000.0))
    pts = grid_points(tiny_config(regime="heterodyne-squeezed", n_values=(1000.0,)))
    assert pts[0].r == pytest.approx(math.log(3.0) / 4.0)
    assert pts[0].mode == "heterodyne"
    assert pts[0].epsilon == 1.0


def test_grid_defaults_mzi():
    pts = grid_points(tiny_config(regime="mzi", n_values=(10.0,), trajectories=None))
    assert pts[0].mode == "adaptive"
    assert pts[0].trajectories == 100
    assert pts[0].x is None


def test_grid_sorted_by_point():
    cfg = tiny_config(n_values=(100.0, 1.0), x_factors=(2.0, 0.5))
    pts = grid_points(cfg)
    keys = [(p.n, p.x) for p in pts]
    assert keys == sorted(keys)
    assert keys[0] == (1.0, pytest.approx(1.0))
    assert keys[3] == (100.0, pytest.approx(0.4))


# ------------------------------------------------------------ running points


def test_sweep_rows_recompute_theory_exactly():
    rows = run_sweep(tiny_config(x_factors=(0.5, 1.0)))
    assert len(rows) == 2
    for row in rows:
        want = theory.predicted_variance(row.regime, row.n, row.x, row.r)
        assert row.theory_var == want
        assert row.ratio == row.holevo_var / want
        assert row.samples > 0


def test_sweep_ratio_nan_when_theory_undefined():
    # bandwidth far beyond the squeezed stability region has no prediction
    cfg = tiny_config(
        regime="adaptive-squeezed",
        n_values=(10.0,),
        x_values=(9.0,),
        r_values=(0.5,),
        trajectories=4,
        burn_in=1.0,
        sample_window=2.0,
    )
    row = run_sweep(cfg)[0]
    assert math.isnan(row.theory_var)
    assert math.isnan(row.ratio)


def test_mzi_row_zeroes_dyne_columns():
    cfg = tiny_config(
        regime="mzi",
        n_values=(5.0,),
        trajectories=3,
        burn_in=5.0,
        sample_window=40.0,
    )
    row = run_sweep(cfg)[0]
    assert (row.x, row.r, row.epsilon) == (0.0, 0.0, 0.0)
    assert row.mode == "adaptive"
    assert row.theory_var == pytest.approx(1.0 / math.sqrt(5.0))


def strip_wall(text):
    return [line.rsplit(",", 1)[0] for line in text.splitlines()]


def test_sweep_deterministic_and_jobs_invariant():
    cfg = tiny_config(x_factors=(0.5, 1.0, 2.0))
    a = render_csv(run_sweep(cfg))
    b = render_csv(run_sweep(cfg))
    c = render_csv(run_sweep(tiny_config(x_factors=(0.5, 1.0, 2.0), jobs=3)))
    assert strip_wall(a) == strip_wall(b)
    assert strip_wall(a) == strip_wall(c)


def test_budget_zero_trips_before_first_point():
    cfg = tiny_config(x_factors=(0.5, 1.0), budget_secs=0.0)
    with pytest.raises(BudgetExceeded, match="0/2") as err:
        run_sweep(cfg)
    assert err.value.rows == []


# -------------------------------------------------------------- serialization


def demo_row(**kw):
    base = dict(
        regime="adaptive-coherent",
        n=10000.0,
        x=0.02,
        r=0.0,
        epsilon=1.0,
        mode="adaptive",
        holevo_var=0.0051234567891,
        holevo_se=1.25e-05,
        std_var=0.005,
        std_se=1e-05,
        theory_var=0.005,
        ratio=1.02469135782,
        samples=93184,
        wall_s=1.5,
    )
    base.update(kw)
    return SweepRow(**base)


def test_csv_header_and_formatting():
    text = render_csv([demo_row()])
    lines = text.splitlines()
    assert lines[0] == CSV_HEADER
    assert lines[1] == (
        "adaptive-coherent,10000,0.02,0,1,adaptive,0.00512345679,1.25e-05,"
        "0.005,1e-05,0.005,1.02469136,93184,1.5"
    )
    assert text.endswith("\n")


def test_json_round_trip_with_non_finite():
    rows = [demo_row(), demo_row(theory_var=math.nan, ratio=math.inf)]
    payload = json.loads(render_json(rows))
    assert payload[0] == {
        **rows[0].as_dict(),
        "N": 10000.0,
    }
    assert payload[1]["theory_var"] is None
    assert payload[1]["ratio"] is None


def test_emit_results_validation_and_io(tmp_path):
    with pytest.raises(ValueError):
        emit_results([demo_row()], tmp_path / "x.csv", fmt="tsv")
    with pytest.raises(ValueError):
        emit_results([], tmp_path / "x.csv")
    out = tmp_path / "empty.csv"
    emit_results([], out, allow_empty=True)
    assert out.read_text(encoding="utf-8") == CSV_HEADER + "\n"
    missing = tmp_path / "no_such_dir" / "x.csv"
    with pytest.raises(OSError, match="no_such_dir"):
        emit_results([demo_row()], missing)


# ------------------------------------------------------------ optimum search


def test_find_optimum_rejects_bad_regimes():
    with pytest.raises(ValueError):
        find_optimum("mzi", 10.0)
    with pytest.raises(ValueError):
        find_optimum("adaptive-coherant", 10.0)


def test_find_optimum_budget_zero_returns_seed_point():
    out = find_optimum("adaptive-coherent", 100.0, trajectories=8, budget_secs=0.0)
    assert out.converged is False
    assert out.evaluations == 0
    assert out.x == pytest.approx(0.2)  # the theory seed, untouched
    assert math.isfinite(out.variance)


@pytest.mark.slow
def test_find_optimum_adaptive_coherent_example(optimum_cache):
    out = optimum_cache("adaptive-coherent", 10000.0)
    want_x = 2.0 / math.sqrt(10000.0)
    want_v = 1.0 / (2.0 * math.sqrt(10000.0))
    assert out.converged
    assert abs(out.x - want_x) / want_x < 0.25
    assert abs(out.variance - want_v) / want_v < 0.10
    assert out.epsilon == 1.0
    assert out.r == 0.0


@pytest.mark.slow
def test_find_optimum_heterodyne_squeezed_example(optimum_cache):
    out = optimum_cache("heterodyne-squeezed", 10000.0)
    # sim-vs-theory agreement is percent-level in this regime
    assert out.converged
    assert abs(out.variance - out.theory_variance) / out.theory_variance < 0.02
    assert out.theory_variance == pytest.approx(
        3.0 ** 0.25 / (2.0 * math.sqrt(10000.0)), rel=1e-12
    )


@pytest.mark.slow
def test_find_optimum_adaptive_squeezed_example(optimum_cache):
    out = optimum_cache("adaptive-squeezed", 1000.0)
    em2r_theory = (2.0 * 1000.0) ** (-1.0 / 3.0)
    factor = math.exp(-2.0 * out.r) / em2r_theory
    assert out.converged
    assert 1.0 / 8.5 < factor < 8.5
    assert 1.5 < out.ratio < 3.5


@pytest.mark.slow
def test_sweep_example_rows_match_paper_levels(optimum_cache):
    # equilibrium coherent points sit within 10% of the closed forms
    rows = run_sweep(
        SweepConfig(
            regime="heterodyne-coherent", n_values=(100.0, 10000.0), seed=11
        )
    )
    for row in rows:
        assert abs(row.ratio - 1.0) < 0.10
    row = run_sweep(
        SweepConfig(regime="adaptive-coherent", n_values=(10000.0,), seed=11)
    )[0]
    assert row.holevo_var == pytest.approx(5e-3, rel=0.10)
