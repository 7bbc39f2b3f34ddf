"""Parameter sweeps, optimum search, and result serialization.

A sweep runs a grid of (N, X, r, epsilon) points for one regime and
returns one row per point with measured and predicted variances. The
optimum search refines bandwidth (and squeezing and feedback weight,
where they apply) by coordinate descent around the theoretical seeds.
"""

from __future__ import annotations

import dataclasses
import json
import math
import time

from . import core, dyne, mzi, stats, theory

CSV_HEADER = (
    "regime,N,X,r,epsilon,mode,holevo_var,holevo_se,std_var,std_se,"
    "theory_var,ratio,samples,wall_s"
)

DYNE_REGIMES = (
    "adaptive-coherent",
    "heterodyne-coherent",
    "adaptive-squeezed",
    "heterodyne-squeezed",
)


class BudgetExceeded(RuntimeError):
    """Raised when the wall-clock budget truncates a sweep; carries the
    rows finished so far."""

    def __init__(self, rows, message):
        super().__init__(message)
        self.rows = rows


@dataclasses.dataclass(frozen=True)
class SweepConfig:
    regime: str
    n_values: tuple
    x_values: tuple | None = None
    x_factors: tuple | None = None  # factors of the theory-optimal X
    r_values: tuple | None = None
    epsilon_values: tuple | None = None
    mode: str | None = None  # mzi only: adaptive or nonadaptive
    trajectories: int | None = None
    seed: int = 0
    jobs: int = 1
    budget_secs: float | None = None
    # fidelity overrides, mostly for quick looks; None -> schedule defaults
    burn_in: float | None = None
    sample_window: float | None = None

    def __post_init__(self):
        if self.regime not in theory.REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}")
        if not self.n_values:
            raise ValueError("empty N grid")
        for n in self.n_values:
            if n <= 0.0:
                raise ValueError(f"N must be positive, got {n}")
        if self.x_values is not None and self.x_factors is not None:
            raise ValueError("give x values or x factors, not both")
        if self.regime == "mzi":
            for name, grid in (
                ("x", self.x_values),
                ("x factors", self.x_factors),
                ("r", self.r_values),
                ("epsilon", self.epsilon_values),
            ):
                if grid is not None:
                    raise ValueError(f"mzi sweeps take no {name} grid")
            if self.mode is not None and self.mode not in ("adaptive", "nonadaptive"):
                raise ValueError(f"mzi mode must be adaptive or nonadaptive")
        else:
            if self.mode is not None:
                raise ValueError("mode is only configurable for mzi sweeps")
            if self.r_values is not None and self.regime.endswith("coherent"):
                raise ValueError(f"{self.regime} runs at r = 0; drop the r grid")
            if self.epsilon_values is not None and self.regime.startswith("heterodyne"):
                raise ValueError("heterodyne feedback has no epsilon")
        for grid in (self.x_values, self.x_factors, self.r_values, self.epsilon_values):
            if grid is not None and len(grid) == 0:
                raise ValueError("empty parameter grid")


@dataclasses.dataclass
class SweepRow:
    regime: str
    n: float
    x: float
    r: float
    epsilon: float
    mode: str
    holevo_var: float
    holevo_se: float
    std_var: float
    std_se: float
    theory_var: float
    ratio: float
    samples: int
    wall_s: float

    def as_dict(self):
        return {
            "regime": self.regime,
            "N": self.n,
            "X": self.x,
            "r": self.r,
            "epsilon": self.epsilon,
            "mode": self.mode,
            "holevo_var": self.holevo_var,
            "holevo_se": self.holevo_se,
            "std_var": self.std_var,
            "std_se": self.std_se,
            "theory_var": self.theory_var,
            "ratio": self.ratio,
            "samples": self.samples,
            "wall_s": self.wall_s,
        }


def default_epsilon(n):
    """Search seed for the feedback interpolation weight."""
    return min(1.0, 1.5 * n ** -0.35)


def grid_points(config):
    """Expand a config into the sorted list of SimParams to run."""
    points = []
    for n in config.n_values:
        if config.regime == "mzi":
            points.append(
                core.SimParams(
                    n=n,
                    mode=config.mode or "adaptive",
                    trajectories=config.trajectories or 100,
                    seed=config.seed,
                    burn_in=config.burn_in,
                    sample_window=config.sample_window,
                )
            )
            continue
        opt = theory.optimal_parameters(config.regime, n)
        if config.x_values is not None:
            xs = list(config.x_values)
        elif config.x_factors is not None:
            xs = [f * opt.optimal_x for f in config.x_factors]
        else:
            xs = [opt.optimal_x]
        if config.regime.endswith("squeezed"):
            rs = list(config.r_values) if config.r_values is not None else [opt.optimal_r]
        else:
            rs = [0.0]
        if config.regime == "adaptive-squeezed":
            eps_grid = (
                list(config.epsilon_values)
                if config.epsilon_values is not None
                else [default_epsilon(n)]
            )
        elif config.regime == "adaptive-coherent":
            eps_grid = (
                list(config.epsilon_values)
                if config.epsilon_values is not None
                else [1.0]
            )
        else:
            eps_grid = [1.0]  # unused by heterodyne feedback
        mode = "heterodyne" if config.regime.startswith("heterodyne") else "adaptive"
        for x in sorted(xs):
            for r in sorted(rs):
                for eps in sorted(eps_grid):
                    points.append(
                        core.SimParams(
                            n=n,
                            x=x,
                            r=r,
                            epsilon=eps,
                            mode=mode,
                            trajectories=config.trajectories or 1024,
                            seed=config.seed,
                            burn_in=config.burn_in,
                            sample_window=config.sample_window,
                        )
                    )
    points.sort(key=lambda p: (p.n, p.x or 0.0, p.r, p.epsilon))
    return points


def _theory_at(regime, n, x, r):
    try:
        return theory.predicted_variance(regime, n, x, r)
    except ValueError:
        return math.nan


def run_point(regime, params, jobs=1):
    """Run one grid point and package it as a SweepRow."""
    if regime == "mzi":
        result = mzi.run_mzi(params, jobs=jobs)
        x_col = 0.0
        eps_col = 0.0
        mode = params.mode
    else:
        result = dyne.run_dyne(params, jobs=jobs)
        x_col = params.x
        eps_col = params.epsilon if params.mode == "adaptive" else 0.0
        mode = params.mode
    hol, hol_se = result.holevo()
    std, std_se = result.standard()
    pooled = stats.pooled(result.accumulators)
    tvar = _theory_at(regime, params.n, params.x, params.r)
    ratio = hol / tvar if math.isfinite(tvar) and tvar > 0.0 else math.nan
    return SweepRow(
        regime=regime,
        n=params.n,
        x=x_col,
        r=params.r if regime != "mzi" else 0.0,
        epsilon=eps_col,
        mode=mode,
        holevo_var=hol,
        holevo_se=hol_se,
        std_var=std,
        std_se=std_se,
        theory_var=tvar,
        ratio=ratio,
        samples=pooled.count,
        wall_s=result.wall_s,
    )


def run_sweep(config):
    """Run every grid point; rows come back sorted by (N, X, r, epsilon).

    Raises BudgetExceeded (carrying the finished rows) if the wall-clock
    budget runs out before the grid is done.
    """
    points = grid_points(config)
    rows = []
    t0 = time.perf_counter()
    for params in points:
        if (
            config.budget_secs is not None
            and time.perf_counter() - t0 > config.budget_secs
        ):
            raise BudgetExceeded(
                rows,
                f"budget {config.budget_secs:.0f}s exhausted after "
                f"{len(rows)}/{len(points)} grid points",
            )
        rows.append(run_point(config.regime, params, jobs=config.jobs))
    return rows


@dataclasses.dataclass
class OptimumResult:
    regime: str
    n: float
    x: float
    r: float
    epsilon: float
    variance: float
    se: float
    theory_variance: float  # predicted minimum for the regime
    ratio: float
    converged: bool
    evaluations: int
    wall_s: float


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def find_optimum(
    regime,
    n,
    trajectories=None,
    seed=0,
    jobs=1,
    budget_secs=None,
    rel_tol=0.02,
    search_trajectories=256,
    line_iters=7,
    max_cycles=5,
):
    """Search the free parameters for the lowest equilibrium variance.

    Coordinate descent: golden-section line searches in log space over
    each free parameter in turn, seeded at the theory-optimal values,
    cycling until a full cycle improves the variance by less than
    rel_tol. Search evaluations run at reduced fidelity with a shared
    seed (common random numbers); the returned variance comes from a
    full-fidelity re-measurement at the best point with a fresh seed.
    """
    if regime == "mzi":
        raise ValueError("mzi has no free parameters to optimize")
    if regime not in DYNE_REGIMES:
        raise ValueError(f"unknown regime {regime!r}")
    t0 = time.perf_counter()
    squeezed = regime.endswith("squeezed")
    adaptive = regime.startswith("adaptive")
    mode = "adaptive" if adaptive else "heterodyne"
    opt = theory.optimal_parameters(regime, n)
    x0 = opt.optimal_x
    state = {"x": x0}
    brackets = {}
    if regime == "adaptive-squeezed":
        em2r0 = math.exp(-2.0 * opt.optimal_r)
        state["em2r"] = em2r0
        state["eps"] = default_epsilon(n)
        # the simulated optimum sits well off the linearized prediction,
        # so the brackets are deliberately lopsided
        brackets["x"] = (x0 / 8.0, 2.0 * x0)
        brackets["em2r"] = (em2r0 / 2.0, min(16.0 * em2r0, 0.98))
        brackets["eps"] = (state["eps"] / 4.0, min(1.0, 4.0 * state["eps"]))
        coords = ("x", "em2r", "eps")
    elif regime == "heterodyne-squeezed":
        em2r0 = math.exp(-2.0 * opt.optimal_r)
        state["em2r"] = em2r0
        brackets["x"] = (x0 / 2.0, 2.0 * x0)
        brackets["em2r"] = (em2r0 / 3.0, min(3.0 * em2r0, 0.98))
        coords = ("x", "em2r")
    else:
        brackets["x"] = (x0 / 2.0, 2.0 * x0)
        coords = ("x",)
    if squeezed:
        search_burn, search_window = 30.0, 20.0
    else:
        search_burn, search_window = 10.0, 30.0

    cache = {}
    evaluations = 0
    out_of_budget = False

    def measure(st):
        nonlocal evaluations, out_of_budget
        key = tuple(round(math.log(st[c]), 9) for c in coords)
        if key in cache:
            return cache[key]
        if budget_secs is not None and time.perf_counter() - t0 > budget_secs:
            out_of_budget = True
            return math.inf
        r = -0.5 * math.log(st["em2r"]) if squeezed else 0.0
        params = core.SimParams(
            n=n,
            x=st["x"],
            r=r,
            epsilon=st.get("eps", 1.0),
            mode=mode,
            trajectories=search_trajectories,
            seed=seed,
            burn_in=search_burn,
            sample_window=search_window,
        )
        value, _ = dyne.run_dyne(params, jobs=jobs).holevo()
        evaluations += 1
        cache[key] = value
        return value

    best_state = dict(state)
    best_value = measure(best_state)
    for _ in range(max_cycles):
        cycle_start = best_value
        for coord in coords:
            if out_of_budget:
                break
            lo, hi = (math.log(v) for v in brackets[coord])
            x1 = hi - _INV_PHI * (hi - lo)
            x2 = lo + _INV_PHI * (hi - lo)

            def at(logv, _c=coord):
                st = dict(best_state)
                st[_c] = math.exp(logv)
                return st

            s1, s2 = at(x1), at(x2)
            f1, f2 = measure(s1), measure(s2)
            for _ in range(line_iters):
                if out_of_budget:
                    break
                if f1 <= f2:
                    hi, x2, f2, s2 = x2, x1, f1, s1
                    x1 = hi - _INV_PHI * (hi - lo)
                    s1 = at(x1)
                    f1 = measure(s1)
                else:
                    lo, x1, f1, s1 = x1, x2, f2, s2
                    x2 = lo + _INV_PHI * (hi - lo)
                    s2 = at(x2)
                    f2 = measure(s2)
            for st, fv in ((s1, f1), (s2, f2)):
                if fv < best_value:
                    best_value = fv
                    best_state = st
        if out_of_budget:
            break
        if cycle_start - best_value < rel_tol * cycle_start:
            break

    r_best = -0.5 * math.log(best_state["em2r"]) if squeezed else 0.0
    eps_best = best_state.get("eps", 1.0 if adaptive else 0.0)
    final_params = core.SimParams(
        n=n,
        x=best_state["x"],
        r=r_best,
        epsilon=eps_best if adaptive else 1.0,
        mode=mode,
        trajectories=trajectories or 1024,
        seed=seed + 9973,
    )
    variance, se = dyne.run_dyne(final_params, jobs=jobs).holevo()
    theory_min = opt.variance
    return OptimumResult(
        regime=regime,
        n=n,
        x=best_state["x"],
        r=r_best,
        epsilon=eps_best if adaptive else 0.0,
        variance=variance,
        se=se,
        theory_variance=theory_min,
        ratio=variance / theory_min,
        converged=not out_of_budget,
        evaluations=evaluations,
        wall_s=time.perf_counter() - t0,
    )


def _fmt(value):
    if isinstance(value, float):
        return f"{value:.9g}"
    return str(value)


def render_csv(rows):
    lines = [CSV_HEADER]
    for row in rows:
        d = row.as_dict()
        lines.append(
            ",".join(
                _fmt(d[key])
                for key in (
                    "regime",
                    "N",
                    "X",
                    "r",
                    "epsilon",
                    "mode",
                    "holevo_var",
                    "holevo_se",
                    "std_var",
                    "std_se",
                    "theory_var",
                    "ratio",
                    "samples",
                    "wall_s",
                )
            )
        )
    return "\n".join(lines) + "\n"


def render_json(rows):
    payload = []
    for row in rows:
        d = row.as_dict()
        for key, value in d.items():
            if isinstance(value, float) and not math.isfinite(value):
                d[key] = None
        payload.append(d)
    return json.dumps(payload, indent=2) + "\n"


def emit_results(rows, path, fmt="csv", allow_empty=False):
    """Write rows to path as CSV or JSON. I/O failures carry the path."""
    if fmt not in ("csv", "json"):
        raise ValueError(f"format must be csv or json, got {fmt!r}")
    if not rows and not allow_empty:
        raise ValueError("no rows to emit")
    text = render_csv(rows) if fmt == "csv" else render_json(rows)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc
