"""Photon-counting interferometer tracking of a diffusing phase.

Single photons arrive at Poisson times through a Mach-Zehnder
interferometer whose measured phase difference includes a controllable
offset Phi. The posterior over the unknown phase stays a finite Fourier
series under Bayes updates and diffusion, so tracking is exact: the
running estimate is the direction of the posterior's first moment, and
the adaptive mode points Phi at the offset that maximizes the expected
sharpness of the next posterior.
"""

from __future__ import annotations

import dataclasses
import math
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import core, stats
from .core import TWO_PI

TRUNCATION_THRESHOLD = 1e-20

# Detections per pre-drawn randomness chunk; layout per chunk is
# [wait uniforms, diffusion normals, outcome uniforms] for each stream.
MZI_CHUNK = 1024

# Repetitions per work block (fixed so results are independent of jobs).
REP_BLOCK = 128


@dataclasses.dataclass(frozen=True)
class FourierPosterior:
    """Phase posterior as Fourier coefficients P_k for k = 0..k_max.

    The represented density is sum_k P_k e^{ik phi} with P_{-k} implied
    by conjugation; P_0 stays exactly 1 after every update. kappa is the
    diffusion rate the posterior is subject to between detections.
    """

    coeffs: np.ndarray
    kappa: float
    threshold: float = TRUNCATION_THRESHOLD

    def __post_init__(self):
        if len(self.coeffs) < 1 or self.coeffs[0] != 1.0:
            raise ValueError("coefficient 0 must be exactly 1")
        if self.kappa < 0.0:
            raise ValueError("kappa must be nonnegative")

    @property
    def k_max(self):
        return len(self.coeffs) - 1


@dataclasses.dataclass(frozen=True)
class MziRecord:
    """One detection: index, outcome, feedback phase, true phase, clock."""

    m: int
    u: int
    lo: float
    phi: float
    t: float

    def __post_init__(self):
        if self.u not in (0, 1):
            raise ValueError("outcome must be 0 or 1")


def uniform_posterior(kappa, threshold=TRUNCATION_THRESHOLD):
    return FourierPosterior(np.array([1.0 + 0.0j]), kappa, threshold)


def detection_probability(phi, lo, u):
    """Probability of detector u firing: sin^2((phi - lo + u pi)/2).

    The two outcomes sum to 1 exactly: u=1 is computed as the complement.
    """
    if u not in (0, 1):
        raise ValueError(f"u must be 0 or 1, got {u}")
    p0 = math.sin(0.5 * (phi - lo)) ** 2
    return p0 if u == 0 else 1.0 - p0


def bayes_update(post, lo, u):
    """Condition the posterior on outcome u at feedback phase lo.

    Shifts each coefficient by its neighbors, then renormalizes so
    P_0 = 1 and drops trailing coefficients below the threshold.
    """
    if u not in (0, 1):
        raise ValueError(f"u must be 0 or 1, got {u}")
    old = post.coeffs
    k_max = len(old) - 1
    ext = np.zeros(k_max + 3, dtype=complex)
    ext[: k_max + 1] = old
    left = np.empty(k_max + 2, dtype=complex)
    left[0] = np.conj(ext[1])
    left[1:] = ext[: k_max + 1]
    right = ext[1 : k_max + 3]
    em = complex(math.cos(lo), -math.sin(lo))
    if u == 1:
        em = -em
    new = ext[: k_max + 2] - (0.5 * em) * left - (0.5 * em.conjugate()) * right
    norm = new[0].real
    if not norm > 0.0:
        raise ValueError(
            f"zero-probability outcome u={u} at lo={lo}: normalization {norm}"
        )
    new = new / norm
    new[0] = 1.0
    return FourierPosterior(_truncate(new, post.threshold), post.kappa, post.threshold)


def diffuse_posterior(post, dt):
    """Damp coefficient k by e^{-k^2 kappa dt / 2}; dt = 0 is the identity."""
    if dt < 0.0:
        raise ValueError(f"dt must be nonnegative, got {dt}")
    if dt == 0.0 or post.kappa == 0.0:
        return FourierPosterior(post.coeffs.copy(), post.kappa, post.threshold)
    k = np.arange(len(post.coeffs), dtype=float)
    damped = post.coeffs * np.exp((-0.5 * post.kappa * dt) * (k * k))
    return FourierPosterior(
        _truncate(damped, post.threshold), post.kappa, post.threshold
    )


def _truncate(coeffs, threshold):
    keep = np.abs(coeffs) >= threshold
    keep[0] = True
    last = int(np.nonzero(keep)[0][-1])
    return coeffs[: last + 1]


def phase_estimate(post):
    """Direction of the posterior mean of e^{i phi}: arg(conj(P_1)).

    Returns None when P_1 = 0 (phase completely unknown); callers record
    the worst-case error pi for such samples.
    """
    if post.k_max < 1:
        return None
    p1 = post.coeffs[1]
    if p1 == 0:
        return None
    return float(np.angle(np.conj(p1)))


def extract_abc(post):
    """The three coefficients the feedback objective depends on."""
    c = post.coeffs
    a = complex(np.conj(c[1])) if len(c) > 1 else 0j
    b = 0.5 * complex(np.conj(c[2])) if len(c) > 2 else 0j
    return a, b, 0.5 + 0j


def expected_sharpness(a, b, c, lo):
    """M(lo) = |a - b e^{-i lo} - c e^{i lo}| + |a + b e^{-i lo} + c e^{i lo}|.

    Twice the expected post-detection sharpness of the posterior when the
    feedback phase is lo; the adaptive rule maximizes this.
    """
    e = complex(math.cos(lo), math.sin(lo))
    g = b * e.conjugate() + c * e
    return abs(a - g) + abs(a + g)


# M(lo) has period pi exactly: lo + pi swaps the detector labels
# (u <-> 1-u), so one half turn covers every distinct measurement and
# searching it keeps the scalar and vectorized engines in lockstep
# (the full-turn argmax is degenerate and ulp noise picks the twin).
_GRID_SIZE = 128
_GRID = np.linspace(0.0, math.pi, _GRID_SIZE, endpoint=False)
_EXP_GRID = np.exp(1j * _GRID)
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
# (pi / 128) * invphi^23 < 1e-6 radians
_GOLDEN_ITERS = 23


def _sharpness_vec(a, b, c, lo):
    e = np.exp(1j * lo)
    g = b * np.conj(e) + c * e
    return np.abs(a - g) + np.abs(a + g)


def _sharpness_argmax(a, b, c):
    """Elementwise argmax of expected_sharpness over one period [0, pi).

    Coarse 128-point grid then golden-section refinement. Rows where the
    objective is flat return 0.0 by convention.
    """
    a = np.asarray(a, dtype=complex)
    ge = _EXP_GRID[None, :]
    g = np.asarray(b, dtype=complex)[..., None] * np.conj(ge) + c * ge
    av = a[..., None]
    s = np.abs(av - g) + np.abs(av + g)
    smax = s.max(axis=-1)
    flat = (smax - s.min(axis=-1)) <= 1e-12 * np.maximum(smax, 1.0)
    j = s.argmax(axis=-1)
    h = math.pi / _GRID_SIZE
    lo = _GRID[j] - h
    hi = _GRID[j] + h
    x1 = hi - _INV_PHI * (hi - lo)
    x2 = lo + _INV_PHI * (hi - lo)
    f1 = _sharpness_vec(a, b, c, x1)
    f2 = _sharpness_vec(a, b, c, x2)
    for _ in range(_GOLDEN_ITERS):
        m = f1 < f2
        lo = np.where(m, x1, lo)
        hi = np.where(m, hi, x2)
        keep_x = np.where(m, x2, x1)
        keep_f = np.where(m, f2, f1)
        new_x = np.where(m, lo + _INV_PHI * (hi - lo), hi - _INV_PHI * (hi - lo))
        new_f = _sharpness_vec(a, b, c, new_x)
        x1 = np.where(m, keep_x, new_x)
        f1 = np.where(m, keep_f, new_f)
        x2 = np.where(m, new_x, keep_x)
        f2 = np.where(m, new_f, keep_f)
    best = np.mod(0.5 * (lo + hi), TWO_PI)
    return np.where(flat, 0.0, best)


def adaptive_phi(post):
    """Feedback phase maximizing the expected post-detection sharpness."""
    a, b, c = extract_abc(post)
    out = _sharpness_argmax(
        np.array([a]), np.array([b]), c
    )
    return float(out[0])


def nonadaptive_phi(m, phi0, n):
    """Deterministic feedback ramp from a random offset.

    Steps of pi/sqrt(N) walk the fringe across the diffusion scale; for
    N <= 1 the step is pi/2 (the ramp would outrun diffusion otherwise).
    """
    if m < 1:
        raise ValueError(f"detection index must be >= 1, got {m}")
    if n <= 0.0:
        raise ValueError(f"n must be positive, got {n}")
    step = math.pi / math.sqrt(n) if n > 1.0 else 0.5 * math.pi
    return phi0 + m * step


def posterior_density(post, phis):
    """Reconstruct the density sum_k P_k e^{ik phi} on the given grid."""
    phis = np.asarray(phis, dtype=float)
    k = np.arange(1, len(post.coeffs))
    if len(k) == 0:
        return np.ones_like(phis)
    terms = post.coeffs[1:][None, :] * np.exp(1j * np.outer(phis, k))
    return 1.0 + 2.0 * terms.real.sum(axis=1)


def _mzi_plan(params):
    n = params.n
    if params.burn_in is not None:
        burn = int(round(params.burn_in))
    else:
        burn = max(10, math.ceil(10.0 * math.sqrt(n)))
    horizon = (
        int(round(params.sample_window))
        if params.sample_window is not None
        else 100_000
    )
    if horizon <= burn:
        raise ValueError(f"horizon {horizon} must exceed burn-in {burn}")
    return burn, horizon


def run_mzi_trajectory(params, index=0, records=None):
    """Scalar reference run of one repetition; returns its accumulator.

    Pass a list as records to capture per-detection MziRecord entries
    (memory heavy for full-length runs).
    """
    if params.mode not in ("adaptive", "nonadaptive"):
        raise ValueError("mzi supports 'adaptive' and 'nonadaptive' modes")
    burn, horizon = _mzi_plan(params)
    kappa = params.kappa
    adaptive = params.mode == "adaptive"
    stream = core.NoiseStream(params.seed, index)
    phi0 = stream.uniforms() * TWO_PI
    post = uniform_posterior(kappa)
    acc = stats.VarianceAccumulator()
    phi = 0.0
    t = 0.0
    det = 0
    while det < horizon:
        take = min(MZI_CHUNK, horizon - det)
        uw = stream.uniforms(MZI_CHUNK)
        xs = stream.normals(MZI_CHUNK)
        uo = stream.uniforms(MZI_CHUNK)
        for j in range(take):
            dt = -math.log1p(-uw[j])
            phi = core.step_phase(phi, kappa, dt, xs[j])
            post = diffuse_posterior(post, dt)
            det += 1
            lo = adaptive_phi(post) if adaptive else nonadaptive_phi(det, phi0, params.n)
            p1 = 0.5 + 0.5 * math.cos(phi - lo)
            u = 1 if uo[j] < p1 else 0
            post = bayes_update(post, lo, u)
            t += dt
            if records is not None:
                records.append(MziRecord(det, u, lo, phi, t))
            if det > burn:
                theta = phase_estimate(post)
                if theta is None:
                    acc.add_sample(math.pi)
                    acc.add_skipped()
                else:
                    acc.add_sample(float(core.wrap_to_pi(theta - phi)))
    return acc


@dataclasses.dataclass
class MziResult:
    """Ensemble outcome: one accumulator per repetition, canonical order."""

    params: core.SimParams
    accumulators: list
    max_order: int  # largest posterior order seen anywhere in the ensemble
    wall_s: float

    def holevo(self):
        return stats.variance_with_se(self.accumulators, kind="holevo")

    def standard(self):
        return stats.variance_with_se(self.accumulators, kind="standard")


def run_mzi(params, jobs=1):
    """Run an ensemble of repetitions (params.trajectories of them).

    Stream assignment and work blocking are fixed, so results are
    identical for any jobs value.
    """
    if params.mode not in ("adaptive", "nonadaptive"):
        raise ValueError("mzi supports 'adaptive' and 'nonadaptive' modes")
    _mzi_plan(params)  # validate early
    t0 = time.perf_counter()
    blocks = [
        (lo, min(lo + REP_BLOCK, params.trajectories))
        for lo in range(0, params.trajectories, REP_BLOCK)
    ]
    if jobs > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(lambda b: _run_mzi_block(params, *b), blocks))
    else:
        parts = [_run_mzi_block(params, *b) for b in blocks]
    accumulators = []
    max_order = 0
    for accs, order in parts:
        accumulators.extend(accs)
        max_order = max(max_order, order)
    return MziResult(
        params=params,
        accumulators=accumulators,
        max_order=max_order,
        wall_s=time.perf_counter() - t0,
    )


def _hard_cap(n):
    # runaway-memory guard, far above the observed equilibrium order
    return max(64, math.ceil(80.0 * math.sqrt(n)))


def _run_mzi_block(params, lo_idx, hi_idx):
    """Vectorized run of repetitions [lo_idx, hi_idx)."""
    width = hi_idx - lo_idx
    n = params.n
    kappa = params.kappa
    adaptive = params.mode == "adaptive"
    burn, horizon = _mzi_plan(params)
    step_const = math.pi / math.sqrt(n) if n > 1.0 else 0.5 * math.pi
    hard_cap = _hard_cap(n)
    threshold = TRUNCATION_THRESHOLD

    streams = [core.NoiseStream(params.seed, i) for i in range(lo_idx, hi_idx)]
    phi0 = np.array([s.uniforms() for s in streams]) * TWO_PI

    cap = 8
    P = np.zeros((width, cap), dtype=complex)
    P[:, 0] = 1.0
    k_act = 0
    phi = np.zeros(width)
    kk2 = np.arange(hard_cap + 2, dtype=float) ** 2

    s_cos = np.zeros(width)
    s_sin = np.zeros(width)
    s_d = np.zeros(width)
    s_d2 = np.zeros(width)
    skipped = np.zeros(width, dtype=np.int64)
    n_samples = 0
    max_order = 0

    det = 0
    while det < horizon:
        take = min(MZI_CHUNK, horizon - det)
        uw = np.empty((width, MZI_CHUNK))
        xs = np.empty((width, MZI_CHUNK))
        uo = np.empty((width, MZI_CHUNK))
        for i, s in enumerate(streams):
            uw[i] = s.uniforms(MZI_CHUNK)
            xs[i] = s.normals(MZI_CHUNK)
            uo[i] = s.uniforms(MZI_CHUNK)
        uw = np.ascontiguousarray(uw.T)
        xs = np.ascontiguousarray(xs.T)
        uo = np.ascontiguousarray(uo.T)
        for j in range(take):
            dtv = -np.log1p(-uw[j])
            phi += np.sqrt(kappa * dtv) * xs[j]
            if k_act >= 1:
                P[:, 1 : k_act + 1] *= np.exp(
                    np.outer(-0.5 * kappa * dtv, kk2[1 : k_act + 1])
                )
            det += 1
            if adaptive:
                a = np.conj(P[:, 1])
                b = 0.5 * np.conj(P[:, 2])
                lo_ph = _sharpness_argmax(a, b, 0.5 + 0j)
            else:
                lo_ph = phi0 + det * step_const
            p_one = 0.5 + 0.5 * np.cos(phi - lo_ph)
            u = uo[j] < p_one
            su = 1.0 - 2.0 * u
            em = (np.cos(lo_ph) - 1j * np.sin(lo_ph)) * su

            if k_act + 3 > cap:
                new_cap = min(hard_cap + 2, max(2 * cap, k_act + 8))
                if k_act + 3 > new_cap:
                    raise RuntimeError(
                        f"posterior order {k_act} blew past the cap {hard_cap}"
                    )
                grown = np.zeros((width, new_cap), dtype=complex)
                grown[:, :cap] = P
                P = grown
                cap = new_cap

            k2 = k_act + 2
            view = P[:, :k2]
            left = np.empty((width, k2), dtype=complex)
            left[:, 0] = np.conj(P[:, 1])
            left[:, 1:] = P[:, : k2 - 1]
            right = P[:, 1 : k2 + 1]
            new = view - (0.5 * em)[:, None] * left - (0.5 * np.conj(em))[:, None] * right
            norm = np.maximum(new[:, 0].real, 1e-300)
            view[:] = new / norm[:, None]
            P[:, 0] = 1.0
            k_act += 1

            mag = np.abs(P[:, : k_act + 1]) >= threshold
            mag[:, 0] = True
            last = k_act - np.argmax(mag[:, ::-1], axis=1)
            cols = np.arange(k_act + 1)
            P[:, : k_act + 1] = np.where(
                cols[None, :] > last[:, None], 0.0, P[:, : k_act + 1]
            )
            k_act = int(last.max())
            max_order = max(max_order, k_act)

            if det > burn:
                p1c = P[:, 1]
                theta = np.angle(np.conj(p1c))
                raw = theta - phi
                wrapped = core.wrap_to_pi(raw)
                degenerate = (p1c.real == 0.0) & (p1c.imag == 0.0)
                n_samples += 1
                if degenerate.any():
                    raw = np.where(degenerate, np.pi, raw)
                    wrapped = np.where(degenerate, np.pi, wrapped)
                    skipped += degenerate
                s_cos += np.cos(raw)
                s_sin += np.sin(raw)
                s_d += wrapped
                s_d2 += wrapped * wrapped

    accs = []
    for i in range(width):
        accs.append(
            stats.VarianceAccumulator(
                count=n_samples,
                phasor_sum=complex(s_cos[i], s_sin[i]),
                delta_sum=float(s_d[i]),
                delta_sq_sum=float(s_d2[i]),
                skipped=int(skipped[i]),
            )
        )
    return accs, max_order
