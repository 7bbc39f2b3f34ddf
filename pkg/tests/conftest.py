"""Shared fixtures: memoized heavy runs and the acceptance summary."""

import pytest

from phasetrack import sweep

_OPTIMA = {}
_ROWS = {}
_ACCEPTANCE = []


@pytest.fixture(scope="session")
def optimum_cache():
    """Memoized find_optimum so sweep examples and the acceptance suite
    share one search per (regime, N)."""

    def get(regime, n, **kw):
        key = (regime, n, tuple(sorted(kw.items())))
        if key not in _OPTIMA:
            _OPTIMA[key] = sweep.find_optimum(regime, n, **kw)
        return _OPTIMA[key]

    return get


@pytest.fixture(scope="session")
def dyne_row():
    """Memoized single-point equilibrium runs at full fidelity."""

    def get(regime, n, x_factor=1.0, trajectories=1024, seed=0):
        key = (regime, n, x_factor, trajectories, seed)
        if key not in _ROWS:
            cfg = sweep.SweepConfig(
                regime=regime,
                n_values=(n,),
                x_factors=(x_factor,),
                trajectories=trajectories,
                seed=seed,
            )
            _ROWS[key] = sweep.run_sweep(cfg)[0]
        return _ROWS[key]

    return get


@pytest.fixture(scope="session")
def acceptance_report():
    def record(criterion, passed, detail):
        _ACCEPTANCE.append((criterion, passed, detail))

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in _ACCEPTANCE:
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{status} {criterion}: {detail}")
