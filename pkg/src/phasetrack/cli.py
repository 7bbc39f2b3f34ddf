"""Command-line front end.

Subcommands: dyne and mzi run single configurations, sweep runs grids,
optimum searches the free parameters, theory prints predictions without
simulating. Options may also come from a key-value config file; the
precedence is command line > file > defaults.

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 budget
exhausted with partial results emitted.
"""

from __future__ import annotations

import argparse
import math
import sys

from . import core, sweep, theory


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on bad flags; the contract wants 1
    def error(self, message):
        raise _UsageError(message)


def _parse_n_values(tokens):
    """Expand --n tokens: plain numbers, or a:b:k for k log-spaced points."""
    values = []
    for tok in tokens:
        tok = str(tok).strip()
        if ":" in tok:
            parts = tok.split(":")
            if len(parts) != 3:
                raise _UsageError(f"bad N range {tok!r}, expected a:b:steps")
            try:
                a, b, k = float(parts[0]), float(parts[1]), int(parts[2])
            except ValueError:
                raise _UsageError(f"bad N range {tok!r}") from None
            if a <= 0 or b <= 0 or k < 1:
                raise _UsageError(f"bad N range {tok!r}")
            if k == 1:
                values.append(a)
            else:
                la, lb = math.log10(a), math.log10(b)
                values.extend(10.0 ** (la + (lb - la) * i / (k - 1)) for i in range(k))
        else:
            try:
                values.append(float(tok))
            except ValueError:
                raise _UsageError(f"bad N value {tok!r}") from None
    return tuple(values)


def _parse_float_list(tokens):
    out = []
    for tok in tokens:
        for piece in str(tok).replace(",", " ").split():
            try:
                out.append(float(piece))
            except ValueError:
                raise _UsageError(f"bad numeric value {piece!r}") from None
    return tuple(out)


def _opt(values, key, conv, fallback=None):
    """Convert an option if the user set it; 0 is a real value here."""
    v = values.get(key)
    return fallback if v is None else conv(v)


def load_config(path):
    """Read a key = value config file; '#' starts a comment."""
    options = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise _UsageError(f"{path}:{lineno}: expected key = value")
                key, _, value = line.partition("=")
                options[key.strip().replace("-", "_")] = value.strip()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc
    return options


def _merged(args, multi=("n", "x", "r", "epsilon")):
    """Apply config-file values under CLI ones; returns a plain dict."""
    values = vars(args).copy()
    if values.get("config"):
        file_opts = load_config(values["config"])
        for key, raw in file_opts.items():
            if key not in values:
                raise _UsageError(f"unknown config key {key!r}")
            if values[key] is None:
                values[key] = raw.split() if key in multi else raw
    return values


def _common_flags(parser, *, trajectories=True):
    parser.add_argument("--config", help="key = value options file")
    parser.add_argument("--seed", type=int, default=None, help="master seed")
    parser.add_argument("--jobs", type=int, default=None, help="worker threads")
    parser.add_argument("--out", default=None, help="output path (default stdout)")
    parser.add_argument("--format", choices=("csv", "json"), default=None)
    parser.add_argument("--budget-secs", type=float, default=None, dest="budget_secs")
    if trajectories:
        parser.add_argument("--trajectories", type=int, default=None)


def _build_parser():
    parser = _Parser(prog="phasetrack", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dyne", help="run one dyne configuration")
    p.add_argument("--regime", choices=sweep.DYNE_REGIMES, default=None)
    p.add_argument("--n", action="append", default=None)
    p.add_argument("--x", type=float, default=None)
    p.add_argument("--r", type=float, default=None)
    p.add_argument("--epsilon", type=float, default=None)
    _common_flags(p)

    p = sub.add_parser("mzi", help="run one interferometer configuration")
    p.add_argument("--n", action="append", default=None)
    p.add_argument("--mode", choices=("adaptive", "nonadaptive"), default=None)
    _common_flags(p)

    p = sub.add_parser("sweep", help="run a parameter grid")
    p.add_argument("--regime", choices=theory.REGIMES, default=None)
    p.add_argument("--n", action="append", default=None)
    p.add_argument("--x", action="append", default=None)
    p.add_argument(
        "--x-factors",
        dest="x_factors",
        default=None,
        help="comma list of factors of the theory-optimal X",
    )
    p.add_argument("--r", action="append", default=None)
    p.add_argument("--epsilon", action="append", default=None)
    p.add_argument("--mode", choices=("adaptive", "nonadaptive"), default=None)
    _common_flags(p)

    p = sub.add_parser("optimum", help="search the free parameters")
    p.add_argument("--regime", choices=sweep.DYNE_REGIMES, default=None)
    p.add_argument("--n", action="append", default=None)
    p.add_argument(
        "--search-trajectories", type=int, default=None, dest="search_trajectories"
    )
    _common_flags(p)

    p = sub.add_parser("theory", help="print predictions without simulating")
    p.add_argument("--regime", choices=theory.REGIMES, default=None)
    p.add_argument("--n", action="append", default=None)
    p.add_argument("--x", type=float, default=None)
    p.add_argument("--r", type=float, default=None)
    p.add_argument("--config", help="key = value options file")

    return parser


def _emit(rows, values, allow_empty=False):
    fmt = values.get("format") or "csv"
    out = values.get("out")
    if out:
        sweep.emit_results(rows, out, fmt, allow_empty=allow_empty)
    else:
        text = sweep.render_csv(rows) if fmt == "csv" else sweep.render_json(rows)
        sys.stdout.write(text)


def _derive_regime_defaults(regime, n, values):
    """Fill x, r, epsilon with theory seeds where the user gave none."""
    opt = theory.optimal_parameters(regime, n)
    x = values.get("x")
    x = float(x) if x is not None else opt.optimal_x
    if regime.endswith("squeezed"):
        r = values.get("r")
        r = float(r) if r is not None else opt.optimal_r
    else:
        r = float(values.get("r") or 0.0)
        if r != 0.0:
            raise _UsageError(f"{regime} runs at r = 0")
    if regime == "adaptive-squeezed":
        eps = values.get("epsilon")
        eps = float(eps) if eps is not None else sweep.default_epsilon(n)
    else:
        eps = values.get("epsilon")
        eps = float(eps) if eps is not None else 1.0
    return x, r, eps


def _cmd_dyne(values):
    regime = values.get("regime")
    if regime is None:
        raise _UsageError("dyne needs --regime")
    n_values = _parse_n_values(values.get("n") or ())
    if not n_values:
        raise _UsageError("dyne needs --n")
    mode = "heterodyne" if regime.startswith("heterodyne") else "adaptive"
    rows = []
    for n in n_values:
        x, r, eps = _derive_regime_defaults(regime, n, values)
        params = core.SimParams(
            n=n,
            x=x,
            r=r,
            epsilon=eps,
            mode=mode,
            trajectories=_opt(values, "trajectories", int, 1024),
            seed=int(values.get("seed") or 0),
        )
        rows.append(sweep.run_point(regime, params, jobs=int(values.get("jobs") or 1)))
    _emit(rows, values)
    return 0


def _cmd_mzi(values):
    n_values = _parse_n_values(values.get("n") or ())
    if not n_values:
        raise _UsageError("mzi needs --n")
    rows = []
    for n in n_values:
        params = core.SimParams(
            n=n,
            mode=values.get("mode") or "adaptive",
            trajectories=_opt(values, "trajectories", int, 100),
            seed=int(values.get("seed") or 0),
        )
        rows.append(sweep.run_point("mzi", params, jobs=int(values.get("jobs") or 1)))
    _emit(rows, values)
    return 0


def _cmd_sweep(values):
    regime = values.get("regime")
    if regime is None:
        raise _UsageError("sweep needs --regime")
    n_tokens = values.get("n")
    if n_tokens is None:
        n_values = (1.0, 10.0, 100.0, 1000.0, 10000.0)
    else:
        n_values = _parse_n_values(n_tokens)
    x_factors = values.get("x_factors")
    config = sweep.SweepConfig(
        regime=regime,
        n_values=n_values,
        x_values=_parse_float_list(values["x"]) if values.get("x") else None,
        x_factors=_parse_float_list([x_factors]) if x_factors else None,
        r_values=_parse_float_list(values["r"]) if values.get("r") else None,
        epsilon_values=(
            _parse_float_list(values["epsilon"]) if values.get("epsilon") else None
        ),
        mode=values.get("mode"),
        trajectories=_opt(values, "trajectories", int),
        seed=int(values.get("seed") or 0),
        jobs=int(values.get("jobs") or 1),
        budget_secs=_opt(values, "budget_secs", float),
    )
    try:
        rows = sweep.run_sweep(config)
    except sweep.BudgetExceeded as exc:
        print(f"phasetrack: {exc}", file=sys.stderr)
        _emit(exc.rows, values, allow_empty=True)
        return 3
    _emit(rows, values)
    return 0


def _cmd_optimum(values):
    regime = values.get("regime")
    if regime is None:
        raise _UsageError("optimum needs --regime")
    n_values = _parse_n_values(values.get("n") or ())
    if not n_values:
        raise _UsageError("optimum needs --n")
    code = 0
    for n in n_values:
        kwargs = dict(
            trajectories=_opt(values, "trajectories", int),
            seed=int(values.get("seed") or 0),
            jobs=int(values.get("jobs") or 1),
            budget_secs=_opt(values, "budget_secs", float),
        )
        if values.get("search_trajectories") is not None:
            kwargs["search_trajectories"] = int(values["search_trajectories"])
        result = sweep.find_optimum(regime, n, **kwargs)
        print(
            f"{regime} N={n:g}: X*={result.x:.6g} r*={result.r:.6g} "
            f"epsilon*={result.epsilon:.6g} variance={result.variance:.6g} "
            f"(s.e. {result.se:.2g}) theory={result.theory_variance:.6g} "
            f"ratio={result.ratio:.4g} evals={result.evaluations} "
            f"converged={result.converged}"
        )
        if not result.converged:
            code = 3
    return code


def _cmd_theory(values):
    regimes = [values["regime"]] if values.get("regime") else list(theory.REGIMES)
    n_values = _parse_n_values(values.get("n") or ())
    if not n_values:
        raise _UsageError("theory needs --n")
    for regime in regimes:
        for n in n_values:
            opt = theory.optimal_parameters(regime, n)
            line = f"{regime} N={n:g}: optimal"
            if opt.optimal_x is not None:
                line += f" X*={opt.optimal_x:.6g}"
            if opt.optimal_r is not None:
                line += f" r*={opt.optimal_r:.6g}"
            line += f" variance={opt.variance:.6g}"
            x = values.get("x")
            if x is not None and regime != "mzi":
                r = float(values.get("r") or 0.0)
                at = theory.predicted_variance(regime, n, float(x), r)
                line += f"; at X={float(x):g} r={r:g}: variance={at:.6g}"
            print(line)
    return 0


def main(argv=None):
    parser = _build_parser()
    try:
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:  # --help
            return int(exc.code or 0)
        values = _merged(args)
        command = values.pop("command")
        handler = {
            "dyne": _cmd_dyne,
            "mzi": _cmd_mzi,
            "sweep": _cmd_sweep,
            "optimum": _cmd_optimum,
            "theory": _cmd_theory,
        }[command]
        return handler(values)
    except (_UsageError, ValueError) as exc:
        print(f"phasetrack: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"phasetrack: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
