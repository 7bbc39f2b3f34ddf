"""Unit conventions, reproducible noise streams, and circular arithmetic.

Everything downstream works in dimensionless units with the carrier
amplitude scaled to 1: time is measured in units of the inverse photon
flux, so a run is fully described by N (photons detected per coherence
time) and X (filter bandwidth over photon flux). The phase diffusion
rate is then kappa = 1/N and the filter decay rate chi = X.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

TWO_PI = 2.0 * math.pi

MODES = ("adaptive", "heterodyne", "nonadaptive")

# Work is always split into fixed-size blocks of trajectories so that the
# assignment of random streams to results never depends on worker count.
TRAJ_BLOCK = 256


def wrap_to_pi(delta):
    """Wrap an angle difference into (-pi, pi].

    Accepts scalars or arrays. The right-closed convention keeps the
    wrap of exactly pi at pi instead of -pi.
    """
    return np.pi - np.mod(np.pi - delta, TWO_PI)


def step_phase(phi, kappa, dt, xi):
    """Advance a diffusing phase by one step: phi + sqrt(kappa*dt)*xi.

    xi is a unit normal draw. kappa is the diffusion rate (inverse
    coherence time in flux units).
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if kappa < 0.0:
        raise ValueError(f"kappa must be nonnegative, got {kappa}")
    return phi + math.sqrt(kappa * dt) * xi


def sample_interval(flux, u):
    """Draw a waiting time between detections from a unit uniform.

    Inverse-CDF of the exponential: -ln(u)/flux. u must lie strictly
    inside (0, 1).
    """
    if flux <= 0.0:
        raise ValueError(f"flux must be positive, got {flux}")
    if not 0.0 < u < 1.0:
        raise ValueError(f"u must be in (0, 1), got {u}")
    return -math.log(u) / flux


@dataclasses.dataclass(frozen=True)
class SimParams:
    """Run configuration shared by the dyne and interferometer engines.

    n is the photon number per coherence time, x the filter bandwidth in
    flux units (unused by the interferometer), r the squeezing parameter,
    epsilon the estimator interpolation weight, mode one of MODES.
    burn_in and sample_window are in units of 1/chi for dyne runs and in
    detections for interferometer runs; None means the regime default.
    sample_window is the length of the sampled span after burn-in for
    dyne, and the total detection horizon for the interferometer.
    """

    n: float
    x: float | None = None
    r: float = 0.0
    epsilon: float = 1.0
    mode: str = "adaptive"
    trajectories: int = 1024
    seed: int = 0
    burn_in: float | None = None
    sample_window: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.n) and self.n > 0.0):
            raise ValueError(f"n must be positive and finite, got {self.n}")
        if self.x is not None and not (math.isfinite(self.x) and self.x > 0.0):
            raise ValueError(f"x must be positive and finite, got {self.x}")
        if not (math.isfinite(self.r) and self.r >= 0.0):
            raise ValueError(f"r must be nonnegative, got {self.r}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must be in [0, 1], got {self.epsilon}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.trajectories < 1:
            raise ValueError("trajectories must be >= 1")
        if self.burn_in is not None and self.burn_in < 0.0:
            raise ValueError("burn_in must be nonnegative")
        if self.sample_window is not None and self.sample_window <= 0.0:
            raise ValueError("sample_window must be positive")

    @property
    def kappa(self):
        return 1.0 / self.n

    @property
    def chi(self):
        if self.x is None:
            raise ValueError("x is not set for this run")
        return self.x


class NoiseStream:
    """Reproducible per-trajectory random stream.

    Draws are a deterministic function of (seed, index) alone: trajectory
    i of a run sees the same sequence no matter how many trajectories run
    beside it or how the work is split across workers.
    """

    def __init__(self, seed, index=0):
        if index < 0:
            raise ValueError("index must be nonnegative")
        seq = np.random.SeedSequence(
            entropy=int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(int(index),)
        )
        self.seed = int(seed)
        self.index = int(index)
        self.generator = np.random.Generator(np.random.PCG64(seq))

    def normals(self, shape=None):
        if shape is None:
            return self.generator.standard_normal()
        return self.generator.standard_normal(shape)

    def uniforms(self, shape=None):
        if shape is None:
            return self.generator.random()
        return self.generator.random(shape)

    def exponentials(self, shape=None):
        if shape is None:
            return self.generator.standard_exponential()
        return self.generator.standard_exponential(shape)
