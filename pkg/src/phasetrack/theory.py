"""Closed-form equilibrium phase variances and optimal parameters.

These are the small-error linearized predictions the simulations are
judged against. All variances are Holevo variances of the equilibrium
tracking error for a beam of unit photon flux, with N photons per
coherence time and filter bandwidth X in flux units.
"""

from __future__ import annotations

import dataclasses
import math

REGIMES = (
    "adaptive-coherent",
    "heterodyne-coherent",
    "adaptive-squeezed",
    "heterodyne-squeezed",
    "mzi",
)


def adaptive_coherent_variance(n, x):
    """X/8 + 1/(2 N X): measurement noise plus lag."""
    _check(n, x)
    return x / 8.0 + 1.0 / (2.0 * n * x)


def heterodyne_coherent_variance(n, x):
    """X/4 + 1/(2 N X): the measurement term is doubled by image noise."""
    _check(n, x)
    return x / 4.0 + 1.0 / (2.0 * n * x)


def adaptive_squeezed_variance(n, x, r):
    """Self-consistent equilibrium for a broadband squeezed beam.

    V = (X e^{-2r}/8 + 1/(2NX)) / (1 - X e^{2r}/8). Valid only while the
    anti-squeezed backaction term keeps the denominator positive; raises
    otherwise since the linearized steady state does not exist there.
    """
    _check(n, x)
    if r < 0.0:
        raise ValueError(f"r must be nonnegative, got {r}")
    denom = 1.0 - x * math.exp(2.0 * r) / 8.0
    if denom <= 0.0:
        raise ValueError(
            f"no linearized steady state: X e^(2r)/8 = {x * math.exp(2.0 * r) / 8.0:.3g} >= 1"
        )
    return (x * math.exp(-2.0 * r) / 8.0 + 1.0 / (2.0 * n * x)) / denom


def heterodyne_squeezed_variance(n, x, r):
    """1/(2NX) + X (cosh 2r - sinh 2r / 2)/4 for squeezed-beam heterodyne."""
    _check(n, x)
    if r < 0.0:
        raise ValueError(f"r must be nonnegative, got {r}")
    return 1.0 / (2.0 * n * x) + x * (math.cosh(2.0 * r) - 0.5 * math.sinh(2.0 * r)) / 4.0


def mzi_variance(n):
    """1/sqrt(N) tracking floor for photon-counting interferometry."""
    if n <= 0.0:
        raise ValueError(f"n must be positive, got {n}")
    return 1.0 / math.sqrt(n)


@dataclasses.dataclass(frozen=True)
class TheoryPrediction:
    regime: str
    n: float
    variance: float
    optimal_x: float | None = None
    optimal_r: float | None = None


def optimal_parameters(regime, n):
    """Bandwidth (and squeezing) minimizing the predicted variance.

    adaptive-coherent: X* = 2/sqrt(N), V* = 1/(2 sqrt(N)).
    heterodyne-coherent: X* = sqrt(2/N), V* = 1/sqrt(2N).
    adaptive-squeezed: X* = (N/4)^(-1/3), e^{-2r*} = (2N)^(-1/3),
        V* = (2N)^(-2/3) exactly at that point.
    heterodyne-squeezed: r* = ln(3)/4, X* = 2/(sqrt(N) 3^(1/4)),
        V* = 3^(1/4)/(2 sqrt(N)).
    mzi: no free parameters, V = 1/sqrt(N).
    """
    if n <= 0.0:
        raise ValueError(f"n must be positive, got {n}")
    if regime == "adaptive-coherent":
        x = 2.0 / math.sqrt(n)
        return TheoryPrediction(regime, n, adaptive_coherent_variance(n, x), x)
    if regime == "heterodyne-coherent":
        x = math.sqrt(2.0 / n)
        return TheoryPrediction(regime, n, heterodyne_coherent_variance(n, x), x)
    if regime == "adaptive-squeezed":
        x = (n / 4.0) ** (-1.0 / 3.0)
        r = math.log(2.0 * n) / 6.0
        return TheoryPrediction(
            regime, n, adaptive_squeezed_variance(n, x, r), x, r
        )
    if regime == "heterodyne-squeezed":
        r = math.log(3.0) / 4.0
        x = 2.0 / (math.sqrt(n) * 3.0 ** 0.25)
        return TheoryPrediction(
            regime, n, heterodyne_squeezed_variance(n, x, r), x, r
        )
    if regime == "mzi":
        return TheoryPrediction(regime, n, mzi_variance(n))
    raise ValueError(f"unknown regime {regime!r}")


def predicted_variance(regime, n, x=None, r=0.0):
    """Dispatch to the regime's closed form. x is ignored for mzi."""
    if regime == "adaptive-coherent":
        return adaptive_coherent_variance(n, _need_x(x))
    if regime == "heterodyne-coherent":
        return heterodyne_coherent_variance(n, _need_x(x))
    if regime == "adaptive-squeezed":
        return adaptive_squeezed_variance(n, _need_x(x), r)
    if regime == "heterodyne-squeezed":
        return heterodyne_squeezed_variance(n, _need_x(x), r)
    if regime == "mzi":
        return mzi_variance(n)
    raise ValueError(f"unknown regime {regime!r}")


def _need_x(x):
    if x is None:
        raise ValueError("this regime needs x")
    return x


def _check(n, x):
    if n <= 0.0:
        raise ValueError(f"n must be positive, got {n}")
    if x <= 0.0:
        raise ValueError(f"x must be positive, got {x}")
