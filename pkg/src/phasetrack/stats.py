"""Circular error statistics and sampling schedules.

Mergeable accumulators collect wrapped estimate errors delta; the headline
figure of merit is the Holevo phase variance |<e^{i delta}>|^-2 - 1, which
agrees with the ordinary variance for tightly peaked errors but stays
meaningful (it diverges) when the estimate decorrelates from the phase.
"""

from __future__ import annotations

import dataclasses
import functools
import math

import numpy as np


@dataclasses.dataclass
class VarianceAccumulator:
    """Streaming sums for Holevo and standard variance of wrapped errors.

    Merging two accumulators is field-wise addition, so trajectory results
    can be combined in any grouping without changing the pooled answer.
    """

    count: int = 0
    phasor_sum: complex = 0j
    delta_sum: float = 0.0
    delta_sq_sum: float = 0.0
    skipped: int = 0

    def add_sample(self, delta):
        """Add one wrapped error. Raises on unwrapped input (|delta| > pi)."""
        if abs(delta) > math.pi:
            raise ValueError(f"delta must be wrapped into [-pi, pi], got {delta}")
        self.count += 1
        self.phasor_sum += complex(math.cos(delta), math.sin(delta))
        self.delta_sum += delta
        self.delta_sq_sum += delta * delta

    def add_skipped(self, k=1):
        self.skipped += k

    def merge(self, other):
        return VarianceAccumulator(
            count=self.count + other.count,
            phasor_sum=self.phasor_sum + other.phasor_sum,
            delta_sum=self.delta_sum + other.delta_sum,
            delta_sq_sum=self.delta_sq_sum + other.delta_sq_sum,
            skipped=self.skipped + other.skipped,
        )

    def holevo_variance(self):
        """|mean phasor|^-2 - 1. inf when the mean phasor is zero."""
        if self.count < 1:
            raise ValueError("no samples")
        resultant = abs(self.phasor_sum) / self.count
        if resultant == 0.0:
            return math.inf
        return resultant ** -2 - 1.0

    def standard_variance(self):
        """Plain variance of the wrapped errors (population convention)."""
        if self.count < 2:
            raise ValueError("need at least two samples")
        mean = self.delta_sum / self.count
        var = self.delta_sq_sum / self.count - mean * mean
        return max(var, 0.0)


def pooled(accumulators):
    """Merge a sequence of accumulators into one."""
    accs = list(accumulators)
    if not accs:
        raise ValueError("no accumulators to pool")
    return functools.reduce(VarianceAccumulator.merge, accs)


def variance_with_se(accumulators, kind="holevo", batches=32):
    """Pooled variance plus a batch-means standard error.

    Accumulators (one per trajectory, in canonical order) are grouped into
    contiguous batches; the spread of per-batch estimates gives the
    standard error of the pooled point estimate. Samples within one
    trajectory are correlated, so batching across trajectories is the
    honest granularity.
    """
    if kind not in ("holevo", "standard"):
        raise ValueError(f"kind must be 'holevo' or 'standard', got {kind!r}")
    accs = list(accumulators)
    point_acc = pooled(accs)
    point = (
        point_acc.holevo_variance()
        if kind == "holevo"
        else point_acc.standard_variance()
    )
    n = len(accs)
    b = min(batches, n)
    if b < 2:
        return point, math.inf
    edges = np.linspace(0, n, b + 1).astype(int)
    estimates = []
    for i in range(b):
        group = pooled(accs[edges[i] : edges[i + 1]])
        est = (
            group.holevo_variance()
            if kind == "holevo"
            else group.standard_variance()
        )
        estimates.append(est)
    estimates = np.asarray(estimates, dtype=float)
    if not np.all(np.isfinite(estimates)):
        return point, math.inf
    se = float(np.std(estimates, ddof=1) / math.sqrt(b))
    return point, se


@dataclasses.dataclass(frozen=True)
class SamplingPlan:
    """When to start sampling, how often, and when to stop.

    For dyne regimes all three are times in flux units; `every == 0`
    means every integration step. For the interferometer they count
    detections. repetitions is the default ensemble size.
    """

    burn_in: float
    every: float
    horizon: float
    repetitions: int


def schedule(regime, n=None, x=None):
    """Default sampling plan for a regime.

    dyne-coherent and dyne-squeezed need x; mzi needs n.
    """
    if regime == "dyne-coherent":
        if x is None or x <= 0.0:
            raise ValueError("dyne-coherent schedule needs x > 0")
        return SamplingPlan(10.0 / x, 1.0 / x, 100.0 / x, 1024)
    if regime == "dyne-squeezed":
        if x is None or x <= 0.0:
            raise ValueError("dyne-squeezed schedule needs x > 0")
        return SamplingPlan(30.0 / x, 0.0, 130.0 / x, 1024)
    if regime == "mzi":
        if n is None or n <= 0.0:
            raise ValueError("mzi schedule needs n > 0")
        burn = max(10, math.ceil(10.0 * math.sqrt(n)))
        return SamplingPlan(float(burn), 1.0, 1.0e5, 100)
    raise ValueError(f"unknown schedule regime {regime!r}")
