"""Dyne tracking of a diffusing optical phase.

Simulates quadrature detection of a unit-amplitude beam whose phase
performs a random walk, with the local oscillator either locked to the
running estimate (adaptive) or ramped linearly (heterodyne), for
coherent and broadband-squeezed input. Two exponential-memory filters

    A <- A + e^{i Phi} I dt - chi A dt
    B <- B - e^{2 i Phi} dt - chi B dt

carry everything the estimators need: the best running estimate is
arg C with C = A + chi B conj(A), and the adaptive feedback points the
local oscillator at the running estimate plus pi/2.
"""

from __future__ import annotations

import cmath
import dataclasses
import math
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import core, stats
from .core import TRAJ_BLOCK, TWO_PI

# Euler steps per filter memory time 1/chi.
STEPS_PER_FILTER_TIME = 1000

# Randomness is pre-drawn in fixed blocks of this many steps, so the
# values a trajectory sees never depend on the run horizon.
STEP_CHUNK = 2048


@dataclasses.dataclass(frozen=True)
class DyneState:
    """One trajectory's live state at time t."""

    t: float = 0.0
    phi: float = 0.0
    a: complex = 0j
    b: complex = 0j
    lo: float = 0.0


def coherent_increment(phi, lo, dt, dw):
    """Photocurrent increment I dt = 2 cos(phi - lo) dt + dw.

    dw is the Wiener increment (already carries the sqrt(dt) scale).
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    return 2.0 * math.cos(phi - lo) * dt + dw


def squeezed_increment(phi, lo, r, dt, dw):
    """Photocurrent increment for a broadband squeezed beam.

    The squeezing ellipse rides along with the true phase, so the noise
    the detector sees depends on the tracking error d = phi - lo:
    quiet (factor e^-r) when the oscillator sits in quadrature, loud
    (e^+r) when it slips in phase. At r = 0 this reproduces
    coherent_increment bit for bit.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if r < 0.0:
        raise ValueError(f"r must be nonnegative, got {r}")
    d = phi - lo
    if r == 0.0:
        return 2.0 * math.cos(d) * dt + dw
    sind = math.sin(d)
    cosd = math.cos(d)
    factor = math.sqrt(
        math.exp(-2.0 * r) * sind * sind + math.exp(2.0 * r) * cosd * cosd
    )
    return 2.0 * cosd * dt + factor * dw


def update_filter(state, i_dt, chi, dt):
    """One Euler step of both filters, driven by the current increment."""
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if chi <= 0.0:
        raise ValueError(f"chi must be positive, got {chi}")
    e = cmath.exp(1j * state.lo)
    a = state.a + e * i_dt - chi * state.a * dt
    b = state.b - e * e * dt - chi * state.b * dt
    return dataclasses.replace(state, t=state.t + dt, a=a, b=b)


def mark2_feedback(a, previous=0.0):
    """Feedback phase arg(A) + pi/2; holds the previous phase while A = 0."""
    if a == 0:
        return previous
    return cmath.phase(a) + 0.5 * math.pi


def epsilon_feedback(a, b, chi, epsilon, previous=0.0):
    """Feedback interpolating between the accurate and the robust estimate.

    Computes C = A + chi B conj(A) and returns phi_hat + pi/2 with
    phi_hat = arg C + epsilon * wrap(arg A - arg C), the geodesic
    interpolation between arg C (epsilon = 0) and arg A (epsilon = 1).
    The endpoints short-circuit so they are bit-stable.
    """
    if chi <= 0.0:
        raise ValueError(f"chi must be positive, got {chi}")
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
    c = a + chi * b * a.conjugate()
    if a == 0 and c == 0:
        return previous
    if epsilon == 1.0:
        base = cmath.phase(a) if a != 0 else cmath.phase(c)
    elif epsilon == 0.0 or c == 0:
        base = cmath.phase(c) if c != 0 else cmath.phase(a)
    else:
        arg_c = cmath.phase(c)
        base = arg_c + epsilon * float(core.wrap_to_pi(cmath.phase(a) - arg_c))
    return base + 0.5 * math.pi


def heterodyne_feedback(t, delta):
    """Ramped local oscillator phase (delta * t) mod 2 pi."""
    if delta <= 0.0:
        raise ValueError(f"delta must be positive, got {delta}")
    return (delta * t) % TWO_PI


def heterodyne_detuning(chi):
    """Ramp rate used for heterodyne runs: 100 pi chi.

    Gives 50 local-oscillator rotations per filter memory time, and
    exactly 20 integration steps per rotation at the standard step
    dt = 1/(1000 chi), so the ramp is both fast compared to the filter
    and resolved by the integrator at every chi.
    """
    if chi <= 0.0:
        raise ValueError(f"chi must be positive, got {chi}")
    return 100.0 * math.pi * chi


def best_estimate(a, b, chi, mode="adaptive"):
    """Running phase estimate arg(A + chi B conj(A)); arg A for heterodyne.

    Returns None when the estimator phasor is exactly zero (no estimate
    available this sample; callers skip and count it).
    """
    if chi <= 0.0:
        raise ValueError(f"chi must be positive, got {chi}")
    if mode == "heterodyne":
        if a == 0:
            return None
        return cmath.phase(a)
    c = a + chi * b * a.conjugate()
    if c == 0:
        return None
    return cmath.phase(c)


def _plan(params):
    """Concrete step counts for a run: (dt, burn_steps, horizon_steps, stride)."""
    x = params.chi
    dt = 1.0 / (STEPS_PER_FILTER_TIME * x)
    squeezed = params.r > 0.0
    default_burn, default_window = (30.0, 100.0) if squeezed else (10.0, 90.0)
    burn_units = params.burn_in if params.burn_in is not None else default_burn
    window_units = (
        params.sample_window if params.sample_window is not None else default_window
    )
    burn_steps = int(round(burn_units * STEPS_PER_FILTER_TIME))
    horizon_steps = burn_steps + int(round(window_units * STEPS_PER_FILTER_TIME))
    stride = 1 if squeezed else STEPS_PER_FILTER_TIME
    return dt, burn_steps, horizon_steps, stride


def run_dyne_trajectory(params, index=0):
    """Scalar reference integration of one trajectory.

    Slow (pure Python); exists as the plainly-readable mirror of
    run_dyne for cross-checking. Returns the trajectory's accumulator.
    """
    if params.x is None:
        raise ValueError("dyne runs need x")
    if params.mode == "nonadaptive":
        raise ValueError("dyne supports 'adaptive' and 'heterodyne' modes")
    dt, burn_steps, horizon_steps, stride = _plan(params)
    chi = params.chi
    kappa = params.kappa
    squeezed = params.r > 0.0
    heterodyne = params.mode == "heterodyne"
    delta = heterodyne_detuning(chi) if heterodyne else 0.0
    stream = core.NoiseStream(params.seed, index)
    sq_dt = math.sqrt(dt)
    acc = stats.VarianceAccumulator()
    state = DyneState()
    first_sample = max(burn_steps, 1)

    step = 0
    while step < horizon_steps:
        draws = stream.normals((STEP_CHUNK, 2))
        for row in range(min(STEP_CHUNK, horizon_steps - step)):
            xi = draws[row, 0]
            dw = sq_dt * draws[row, 1]
            if squeezed:
                i_dt = squeezed_increment(state.phi, state.lo, params.r, dt, dw)
            else:
                i_dt = coherent_increment(state.phi, state.lo, dt, dw)
            state = update_filter(state, i_dt, chi, dt)
            state = dataclasses.replace(
                state, phi=core.step_phase(state.phi, kappa, dt, xi)
            )
            step += 1
            if heterodyne:
                lo = heterodyne_feedback(step * dt, delta)
            elif params.epsilon == 1.0:
                lo = mark2_feedback(state.a, previous=state.lo)
            else:
                lo = epsilon_feedback(
                    state.a, state.b, chi, params.epsilon, previous=state.lo
                )
            state = dataclasses.replace(state, lo=lo)
            if step >= first_sample and (step - burn_steps) % stride == 0:
                theta = best_estimate(state.a, state.b, chi, params.mode)
                if theta is None:
                    acc.add_skipped()
                else:
                    acc.add_sample(float(core.wrap_to_pi(theta - state.phi)))
    return acc


@dataclasses.dataclass
class DyneResult:
    """Ensemble outcome: one accumulator per trajectory, canonical order."""

    params: core.SimParams
    accumulators: list
    abs_a_sq: np.ndarray  # per-trajectory mean |A|^2 over sampled instants
    wall_s: float

    def holevo(self):
        return stats.variance_with_se(self.accumulators, kind="holevo")

    def standard(self):
        return stats.variance_with_se(self.accumulators, kind="standard")


def run_dyne(params, jobs=1):
    """Integrate an ensemble of trajectories and collect error statistics.

    Trajectory i always consumes stream (seed, i), and work is split into
    fixed blocks of TRAJ_BLOCK trajectories, so the result is identical
    for any jobs value and any ensemble size containing i.
    """
    if params.x is None:
        raise ValueError("dyne runs need x")
    if params.mode == "nonadaptive":
        raise ValueError("dyne supports 'adaptive' and 'heterodyne' modes")
    t0 = time.perf_counter()
    blocks = [
        (lo, min(lo + TRAJ_BLOCK, params.trajectories))
        for lo in range(0, params.trajectories, TRAJ_BLOCK)
    ]
    if jobs > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(lambda b: _run_dyne_block(params, *b), blocks))
    else:
        parts = [_run_dyne_block(params, *b) for b in blocks]
    accumulators = []
    abs_a_sq = []
    for accs, asq in parts:
        accumulators.extend(accs)
        abs_a_sq.append(asq)
    return DyneResult(
        params=params,
        accumulators=accumulators,
        abs_a_sq=np.concatenate(abs_a_sq),
        wall_s=time.perf_counter() - t0,
    )


def _run_dyne_block(params, lo_idx, hi_idx):
    """Vectorized integration of trajectories [lo_idx, hi_idx)."""
    n_traj = hi_idx - lo_idx
    dt, burn_steps, horizon_steps, stride = _plan(params)
    chi = params.chi
    sq_kdt = math.sqrt(params.kappa * dt)
    sq_dt = math.sqrt(dt)
    decay = 1.0 - chi * dt
    half_pi = 0.5 * math.pi
    squeezed = params.r > 0.0
    em2r = math.exp(-2.0 * params.r)
    ep2r = math.exp(2.0 * params.r)
    eps = params.epsilon
    heterodyne = params.mode == "heterodyne"
    delta = heterodyne_detuning(chi) if heterodyne else 0.0
    first_sample = max(burn_steps, 1)

    streams = [core.NoiseStream(params.seed, i) for i in range(lo_idx, hi_idx)]
    phi = np.zeros(n_traj)
    ar = np.zeros(n_traj)
    ai = np.zeros(n_traj)
    br = np.zeros(n_traj)
    bi = np.zeros(n_traj)
    if heterodyne:
        lo_phase = 0.0  # shared scalar; the ramp ignores the trajectories
    else:
        lo_phase = np.zeros(n_traj)

    s_cos = np.zeros(n_traj)
    s_sin = np.zeros(n_traj)
    s_d = np.zeros(n_traj)
    s_d2 = np.zeros(n_traj)
    s_asq = np.zeros(n_traj)
    skipped = np.zeros(n_traj, dtype=np.int64)
    n_samples = 0

    step = 0
    while step < horizon_steps:
        take = min(STEP_CHUNK, horizon_steps - step)
        draws = np.stack(
            [s.normals((STEP_CHUNK, 2)) for s in streams]
        )  # (n_traj, STEP_CHUNK, 2)
        xis = np.ascontiguousarray(draws[:, :, 0].T)
        dws = np.ascontiguousarray(draws[:, :, 1].T)
        for row in range(take):
            d = phi - lo_phase
            cosd = np.cos(d)
            if squeezed:
                sind = np.sin(d)
                noise = np.sqrt(em2r * sind * sind + ep2r * cosd * cosd)
                noise *= dws[row]
                i_dt = 2.0 * dt * cosd + sq_dt * noise
            else:
                i_dt = 2.0 * dt * cosd + sq_dt * dws[row]
            if heterodyne:
                cp = math.cos(lo_phase)
                sp = math.sin(lo_phase)
            else:
                cp = np.cos(lo_phase)
                sp = np.sin(lo_phase)
            ar *= decay
            ar += i_dt * cp
            ai *= decay
            ai += i_dt * sp
            br *= decay
            br -= dt * (cp * cp - sp * sp)
            bi *= decay
            bi -= dt * (2.0 * cp * sp)
            phi += sq_kdt * xis[row]
            step += 1
            sampling = step >= first_sample and (step - burn_steps) % stride == 0

            if heterodyne:
                lo_phase = (delta * (step * dt)) % TWO_PI
                if not sampling:
                    continue
                theta = np.arctan2(ai, ar)
                degenerate = (ar == 0.0) & (ai == 0.0)
            else:
                if eps == 1.0 and not sampling:
                    # mark II fast path: feedback needs arg A only
                    lo_phase = np.arctan2(ai, ar) + half_pi
                    continue
                cr = ar + chi * (br * ar + bi * ai)
                ci = ai + chi * (bi * ar - br * ai)
                theta = np.arctan2(ci, cr)
                if eps == 1.0:
                    base = np.arctan2(ai, ar)
                elif eps == 0.0:
                    base = theta
                else:
                    base = theta + eps * core.wrap_to_pi(np.arctan2(ai, ar) - theta)
                lo_phase = base + half_pi
                if not sampling:
                    continue
                degenerate = (cr == 0.0) & (ci == 0.0)

            raw = theta - phi
            wrapped = core.wrap_to_pi(raw)
            n_samples += 1
            if degenerate.any():
                keep = ~degenerate
                skipped[degenerate] += 1
                s_cos[keep] += np.cos(raw[keep])
                s_sin[keep] += np.sin(raw[keep])
                s_d[keep] += wrapped[keep]
                s_d2[keep] += wrapped[keep] ** 2
                s_asq[keep] += ar[keep] ** 2 + ai[keep] ** 2
            else:
                s_cos += np.cos(raw)
                s_sin += np.sin(raw)
                s_d += wrapped
                s_d2 += wrapped * wrapped
                s_asq += ar * ar + ai * ai

    accs = []
    for i in range(n_traj):
        accs.append(
            stats.VarianceAccumulator(
                count=n_samples - int(skipped[i]),
                phasor_sum=complex(s_cos[i], s_sin[i]),
                delta_sum=float(s_d[i]),
                delta_sq_sum=float(s_d2[i]),
                skipped=int(skipped[i]),
            )
        )
    counted = np.maximum(n_samples - skipped, 1)
    return accs, s_asq / counted
