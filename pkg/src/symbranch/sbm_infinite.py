"""Infinite-rate symbiotic branching on a site graph.

The state lives on boundary configurations: at every site at most one of
(U, V) is positive. Two simulators, cross-validated against each other:

* Trotter scheme: alternate exact heat flow exp(eps*A) on both coordinates
  with an exact per-site exit-law resample. For fixed eps this is an exact
  scheme for the split dynamics; refining eps gives the continuous process.
* Jump process (PDMP): between jumps the state follows a deterministic flow,
  and each site k jumps at intensity I(k) * |nu|, replacing the local pair by
  a rescaled mark of the truncated jump measure. I(k) is AV(k)/U(k) on a
  U-site, AU(k)/V(k) on a V-site, 0 at an empty site. The flow subtracts the
  jump compensator I*(V*m2 + U*b) from AU (and symmetrically from AV), where
  m2 and b are the sampler-implied swap moment and keep balance, so that the
  mean drift of each coordinate is the heat flow. Jumps are realized by
  thinning with a 1.5x majorant inside substeps; majorant violations are
  accepted capped, counted, and halve the next substep.
"""

import math
from dataclasses import dataclass

import numpy as np

from symbranch import rng as rngmod
from symbranch.duals import duality_pairing
from symbranch.exitlaw import (ExitLawParams, V_AXIS, sample_exit_batch,
                               sample_nu_trunc, truncate_nu)
from symbranch.lattice import as_field, heat_semigroup


class NegativeIntensity(ValueError):
    """Raised when a jump intensity comes out negative (state off the boundary set)."""


@dataclass
class BoundaryField:
    """Pair field with per-site product exactly zero."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if self.u.shape != self.v.shape:
            raise ValueError("u and v must have matching shapes")
        if np.any(self.u < 0) or np.any(self.v < 0):
            raise ValueError("boundary fields are nonnegative")
        if np.any((self.u != 0) & (self.v != 0)):
            raise ValueError("at most one of (u, v) may be positive per site")

    @property
    def magnitude(self):
        return self.u + self.v


@dataclass(frozen=True)
class JumpEvent:
    time: float
    site: int
    swapped: bool
    factor: float       # sampled mark magnitude y
    magnitude: float    # local magnitude before the jump


def project_to_boundary(u, v):
    """Zero the smaller coordinate per site; returns (u, v, zeroed mass)."""
    off = (u > 0) & (v > 0)
    if not np.any(off):
        return u, v, 0.0
    lo = np.minimum(u, v)
    zeroed = float(lo[off].sum())
    keep_u = u >= v
    u = np.where(off & ~keep_u, 0.0, u)
    v = np.where(off & keep_u, 0.0, v)
    return u, v, zeroed


def intensity(g, state, k=None):
    """Jump intensity of the boundary process, validated.

    AV(k)/U(k) on a U-site, AU(k)/V(k) on a V-site, 0 where both vanish.
    Returns the full per-site array, or the single rate at site k if given.
    Raises NegativeIntensity if any rate is negative, which on a valid
    boundary state cannot happen (the generator rows have nonnegative
    off-diagonal entries and the diagonal multiplies an exact zero).
    """
    u = as_field(g, state.u)
    v = as_field(g, state.v)
    au = u @ g.rates.T
    av = v @ g.rates.T
    rate = _intensity_arrays(u, v, au, av)
    if np.any(rate < 0):
        raise NegativeIntensity("negative jump intensity: state off the boundary set")
    if k is None:
        return rate
    return float(rate[..., k])


def _intensity_arrays(u, v, au, av):
    on_u = u > 0
    on_v = v > 0
    denom = np.where(on_u, u, np.where(on_v, v, 1.0))
    num = np.where(on_u, av, np.where(on_v, au, 0.0))
    return num / denom


def apply_jump(state, site, swapped, factor):
    """Replace the pair at one site by the rescaled jump mark.

    The local magnitude m = U(k)+V(k) becomes m*factor, on the same axis for
    a keep mark or on the opposite axis for a swap mark. Returns a new
    BoundaryField.
    """
    u = state.u.copy()
    v = state.v.copy()
    m = u[site] + v[site]
    on_u = u[site] > 0
    u[site] = 0.0
    v[site] = 0.0
    if swapped == on_u:
        v[site] = m * factor
    else:
        u[site] = m * factor
    return BoundaryField(u, v)


def trotter_step(g, params, u, v, eps, rng):
    """Heat flow exp(eps*A) on both coordinates, then exact per-site exit."""
    P = heat_semigroup(g, eps)
    return sample_exit_batch(params, u @ P.T, v @ P.T, rng)


def trotter_simulate(g, rho, initial, horizon, eps, replicas=1, seed=0,
                     times=None, rng_tag="trotter"):
    """Trotter trajectories; returns terminal (R, n) fields and snapshots.

    Runs ceil(horizon/eps) alternating steps, so the effective horizon is the
    smallest multiple of eps at or above the requested one (reported in the
    result). times are snapped to the step grid.
    """
    params = ExitLawParams(rho)
    n = g.n_sites
    u0 = as_field(g, np.asarray(initial.u, dtype=float))
    v0 = as_field(g, np.asarray(initial.v, dtype=float))
    steps = max(int(math.ceil(horizon / eps - 1e-12)), 0)
    times = np.asarray(times if times is not None else [], dtype=float)
    rec_steps = np.unique(np.clip(np.round(times / eps).astype(int), 0, steps))
    out_u = np.empty((replicas, n))
    out_v = np.empty((replicas, n))
    snaps_u = np.full((replicas, rec_steps.size, n), np.nan)
    snaps_v = np.full((replicas, rec_steps.size, n), np.nan)
    rec_pos = {int(s): i for i, s in enumerate(rec_steps)}
    for lo, hi, rng in rngmod.chunk_streams(seed, rng_tag, replicas):
        m = hi - lo
        u = np.tile(u0, (m, 1))
        v = np.tile(v0, (m, 1))
        if 0 in rec_pos:
            snaps_u[lo:hi, rec_pos[0]] = u
            snaps_v[lo:hi, rec_pos[0]] = v
        for step in range(1, steps + 1):
            u, v = trotter_step(g, params, u, v, eps, rng)
            if step in rec_pos:
                snaps_u[lo:hi, rec_pos[step]] = u
                snaps_v[lo:hi, rec_pos[step]] = v
        out_u[lo:hi] = u
        out_v[lo:hi] = v
    return {
        "u": out_u,
        "v": out_v,
        "effective_horizon": steps * eps,
        "times": rec_steps * eps,
        "snapshots_u": snaps_u,
        "snapshots_v": snaps_v,
    }


def _flow_substep(u, v, A, m2, bal, dt):
    """One explicit flow step of the compensated ODE; projects back to the
    boundary set and returns (u, v, zeroed mass)."""
    au = u @ A.T
    av = v @ A.T
    rate = _intensity_arrays(u, v, au, av)
    du = au - rate * (v * m2 + u * bal)
    dv = av - rate * (u * m2 + v * bal)
    u = u + dt * du
    v = v + dt * dv
    np.maximum(u, 0.0, out=u)
    np.maximum(v, 0.0, out=v)
    return project_to_boundary(u, v)


def _pdmp_one(g, measure, u, v, horizon, rng, flow_substep=1e-2,
              record_events=False):
    """Single-replica jump-process trajectory via thinning."""
    A = g.rates
    M = measure.total_mass
    m2 = measure.m2
    bal = measure.balance
    t = 0.0
    dt_max = flow_substep
    dt_cap = dt_max
    n_jumps = n_swaps = violations = 0
    zeroed = 0.0
    events = [] if record_events else None
    while t < horizon - 1e-12:
        au = u @ A.T
        av = v @ A.T
        rate = _intensity_arrays(u, v, au, av)
        if np.any(rate < 0):
            raise NegativeIntensity("negative jump intensity during flow")
        lam = rate * M
        total = lam.sum()
        dt = min(dt_cap, horizon - t, 0.1 / total if total > 0 else math.inf)
        lam_bar = 1.5 * lam
        counts = rng.poisson(lam_bar * dt)
        n_cand = int(counts.sum())
        if n_cand == 0:
            u, v, z = _flow_substep(u, v, A, m2, bal, dt)
            zeroed += z
            t += dt
            continue
        sites = np.repeat(np.arange(u.size), counts)
        taus = rng.random(n_cand) * dt
        order = np.argsort(taus)
        sites = sites[order]
        taus = taus[order]
        s_prev = 0.0
        violated = False
        for tau, k in zip(taus, sites):
            if tau > s_prev:
                u, v, z = _flow_substep(u, v, A, m2, bal, tau - s_prev)
                zeroed += z
                s_prev = tau
            mag = u[k] + v[k]
            if mag <= 0:
                continue
            row = A[k]
            cur = (row @ v) / u[k] if u[k] > 0 else (row @ u) / v[k]
            lam_k = cur * M
            accept = lam_k / lam_bar[k] if lam_bar[k] > 0 else (1.0 if lam_k > 0 else 0.0)
            if accept > 1.0:
                violations += 1
                violated = True
                accept = 1.0
            if rng.random() < accept:
                mark = sample_nu_trunc(measure, rng)
                swapped = mark.axis == V_AXIS
                on_u = u[k] > 0
                if record_events:
                    events.append(JumpEvent(t + tau, int(k), bool(swapped),
                                            float(mark.magnitude), float(mag)))
                u[k] = 0.0
                v[k] = 0.0
                if swapped == on_u:
                    v[k] = mag * mark.magnitude
                else:
                    u[k] = mag * mark.magnitude
                n_jumps += 1
                n_swaps += int(swapped)
        if dt > s_prev:
            u, v, z = _flow_substep(u, v, A, m2, bal, dt - s_prev)
            zeroed += z
        t += dt
        dt_cap = max(dt_cap / 2, 1e-5) if violated else min(dt_cap * 1.1, dt_max)
    return u, v, n_jumps, n_swaps, violations, zeroed, events


def pdmp_simulate(g, rho, initial, horizon, eps, replicas=1, seed=0,
                  measure=None, flow_substep=1e-2, record_events=False,
                  rng_tag="pdmp"):
    """Jump-process trajectories with truncation eps; returns fields and
    diagnostics (jump/swap counts, majorant violations, projected mass).

    A prebuilt TruncatedJumpMeasure can be passed to skip the truncation
    solve; record_events collects the JumpEvent list of replica 0 only.
    """
    if measure is None:
        measure = truncate_nu(rho, eps)
    n = g.n_sites
    u0 = as_field(g, np.asarray(initial.u, dtype=float)).copy()
    v0 = as_field(g, np.asarray(initial.v, dtype=float)).copy()
    BoundaryField(u0, v0)  # validate the start state
    out_u = np.empty((replicas, n))
    out_v = np.empty((replicas, n))
    n_jumps = np.zeros(replicas, dtype=int)
    n_swaps = np.zeros(replicas, dtype=int)
    violations = np.zeros(replicas, dtype=int)
    zeroed = np.zeros(replicas)
    events = None
    for r in range(replicas):
        rng = rngmod.stream(seed, rng_tag, r)
        u, v, nj, ns, viol, z, ev = _pdmp_one(
            g, measure, u0.copy(), v0.copy(), horizon, rng,
            flow_substep=flow_substep,
            record_events=(record_events and r == 0))
        out_u[r] = u
        out_v[r] = v
        n_jumps[r] = nj
        n_swaps[r] = ns
        violations[r] = viol
        zeroed[r] = z
        if ev is not None:
            events = ev
    return {
        "u": out_u,
        "v": out_v,
        "n_jumps": n_jumps,
        "n_swaps": n_swaps,
        "violations": violations,
        "zeroed_mass": zeroed,
        "measure": measure,
        "events": events,
    }


def martingale_functional_check(g, rho, initial, y1, y2, horizon, eps,
                                replicas=1000, seed=0, rng_tag="mart"):
    """Mean of the compensated self-duality functional along Trotter paths.

    For a frozen test pair (y1, y2) with y1*y2 = 0 per site,
    M = F(end) - F(start) - int <<A u_s, A v_s, y>> F(u_s, v_s, y) ds
    should have zero mean. The integral uses the trapezoid rule on the two
    flow endpoints inside each Trotter interval (the exit resample at the
    interval boundary preserves the conditional mean of F). Returns the
    complex mean of M, its componentwise standard errors, and the replica
    count.
    """
    y1 = as_field(g, np.asarray(y1, dtype=float))
    y2 = as_field(g, np.asarray(y2, dtype=float))
    if np.any((y1 != 0) & (y2 != 0)):
        raise ValueError("test pair must satisfy y1*y2 = 0 per site")
    params = ExitLawParams(rho)
    P = heat_semigroup(g, eps)
    u0 = as_field(g, np.asarray(initial.u, dtype=float))
    v0 = as_field(g, np.asarray(initial.v, dtype=float))
    steps = max(int(math.ceil(horizon / eps - 1e-12)), 1 if horizon > 0 else 0)

    def F(u, v):
        return np.exp(duality_pairing(u, v, y1, y2, rho))

    def G(u, v):
        au = u @ g.rates.T
        av = v @ g.rates.T
        return duality_pairing(au, av, y1, y2, rho) * F(u, v)

    mart = np.empty(0, dtype=complex)
    for lo, hi, rng in rngmod.chunk_streams(seed, rng_tag, replicas):
        m = hi - lo
        u = np.tile(u0, (m, 1))
        v = np.tile(v0, (m, 1))
        f0 = F(u, v)
        integral = np.zeros(m, dtype=complex)
        for _ in range(steps):
            left = G(u, v)
            uh = u @ P.T
            vh = v @ P.T
            integral += 0.5 * eps * (left + G(uh, vh))
            u, v = sample_exit_batch(params, uh, vh, rng)
        mart = np.concatenate([mart, F(u, v) - f0 - integral])
    mean = complex(mart.mean())
    se_re = float(mart.real.std(ddof=1) / math.sqrt(mart.size))
    se_im = float(mart.imag.std(ddof=1) / math.sqrt(mart.size))
    return {"mean": mean, "se": (se_re, se_im), "replicas": int(mart.size),
            "effective_horizon": steps * eps}
