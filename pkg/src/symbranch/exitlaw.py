"""Exit law of a correlated planar Brownian pair and the induced jump measure.

A pair of standard Brownian motions with instantaneous correlation rho, started
in the open first quadrant, is stopped when the product of coordinates first
hits zero. The stopped pair lives on the boundary set

    E = {(y1, 0): y1 >= 0} union {(0, y2): y2 >= 0}.

Everything here derives from one geometric fact: the linear map
(u, v) -> (u, (v - rho*u)/sqrt(1-rho^2)) turns the correlated pair into a
standard planar Brownian motion and the quadrant into a wedge of opening
theta = pi/2 + arcsin(rho); rotating by arcsin(rho) and raising to the power
p = pi/theta (as a complex number) maps the wedge onto the upper half-plane,
where the exit law through the real axis is Cauchy. Positive Cauchy values pull
back to the {v=0} edge of the quadrant, negative values to the {u=0} edge, with
magnitude sqrt(1-rho^2)*|x|^(1/p). The same p is the critical moment exponent:
exit-point and exit-time moments of order a are finite iff a < p (resp. a < p/2).

The jump measure nu (the small-mass limit of exit laws from (1, eps), scaled by
1/eps) has densities

    keep branch (y1-axis): p^2 sqrt(1-rho^2) y1^(p-1) / (pi (y1^p - 1)^2)
    swap branch (y2-axis): p^2 sqrt(1-rho^2) y2^(p-1) / (pi (y2^p + 1)^2)

with a non-integrable second-order pole at y1 = 1. In the variable s = y^p both
branches are proportional to ds/(s -+ 1)^2, which is what the closed-form masses
and sampling tables below exploit.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.optimize import brentq

U_AXIS = "U"
V_AXIS = "V"


class AtomicExitLaw(Exception):
    """Exit law degenerates to an atom (start already absorbed, or |rho|=1)."""


class PoleValue(Exception):
    """Density evaluated exactly at its non-integrable pole."""


def critical_exponent(rho):
    """Critical moment exponent p(rho) = pi / (pi/2 + arcsin(rho)).

    Returns +inf at rho = -1. p(0) = 2, p(1) = 1, strictly decreasing.
    """
    if abs(rho) > 1:
        raise ValueError(f"correlation must lie in [-1, 1], got {rho}")
    if rho == -1:
        return math.inf
    return math.pi / (math.pi / 2 + math.asin(rho))


@dataclass(frozen=True)
class ExitLawParams:
    """Correlation rho with the derived wedge geometry."""

    rho: float
    theta: float = field(init=False)  # wedge opening angle
    p: float = field(init=False)      # critical exponent pi/theta
    phi: float = field(init=False)    # rotation aligning the wedge with [0, theta]

    def __post_init__(self):
        if abs(self.rho) > 1:
            raise ValueError(f"correlation must lie in [-1, 1], got {self.rho}")
        phi = math.asin(self.rho)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "theta", math.pi / 2 + phi)
        object.__setattr__(self, "p", critical_exponent(self.rho))

    @property
    def root1m2(self):
        """sqrt(1 - rho^2)."""
        return math.cos(self.phi)


@dataclass(frozen=True)
class BoundaryPoint:
    """Point of E: an axis label and a nonnegative magnitude.

    The origin is representable on either axis; it is normalized to the U-axis.
    """

    axis: str
    magnitude: float

    def __post_init__(self):
        if self.axis not in (U_AXIS, V_AXIS):
            raise ValueError(f"axis must be '{U_AXIS}' or '{V_AXIS}'")
        if not self.magnitude >= 0:
            raise ValueError("magnitude must be nonnegative")
        if self.magnitude == 0 and self.axis != U_AXIS:
            object.__setattr__(self, "axis", U_AXIS)

    def as_pair(self):
        return (self.magnitude, 0.0) if self.axis == U_AXIS else (0.0, self.magnitude)


def halfplane_image(params, u, v):
    """Upper-half-plane image (z1, z2) of a quadrant point under the exit map."""
    q = params.root1m2
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    vt = (v - params.rho * u) / q
    R = np.hypot(u, vt)
    ang = params.p * (np.arctan2(vt, u) + params.phi)
    Rp = R**params.p
    return Rp * np.cos(ang), Rp * np.sin(ang)


def exit_density_on_axis(params, start, axis, r):
    """Exit-law density on one axis of E, vectorized over the magnitude r."""
    u, v = start
    if not (u > 0 and v > 0):
        raise AtomicExitLaw(f"start {start!r} is already absorbed: the law is atomic")
    if abs(params.rho) == 1:
        raise AtomicExitLaw("|rho| = 1: the exit law is atomic")
    q = params.root1m2
    p = params.p
    z1, z2 = halfplane_image(params, u, v)
    r = np.asarray(r, dtype=float)
    s = (r / q) ** p
    jac = (p / q) * (r / q) ** (p - 1.0)
    shift = s - z1 if axis == U_AXIS else s + z1
    return (z2 / (np.pi * (z2**2 + shift**2))) * jac


def exit_density(params, start, pt):
    """Density of the exit law at a boundary point (scalar contract)."""
    if pt.magnitude <= 0:
        raise ValueError("density is defined for positive magnitudes")
    return float(exit_density_on_axis(params, start, pt.axis, pt.magnitude))


def exit_axis_prob(params, start, axis=U_AXIS):
    """Probability that the pair exits through the given axis."""
    u, v = start
    if u > 0 and v > 0 and abs(params.rho) < 1:
        z1, z2 = halfplane_image(params, u, v)
        pU = 0.5 + math.atan2(z1, z2) / math.pi  # Cauchy(z1, z2) mass on (0, inf)
        return pU if axis == U_AXIS else 1.0 - pU
    raise AtomicExitLaw("axis probability via density requires an interior start")


def exit_axis_mass_quadrature(params, start, axis):
    """Total mass of the implemented density on one axis, by adaptive
    quadrature over the magnitude. Summed over both axes this probes the
    normalization of the density-plus-Jacobian chain end to end."""
    from scipy.integrate import quad
    val, _ = quad(lambda r: float(exit_density_on_axis(params, start, axis, r)),
                  0.0, np.inf, epsabs=1e-11, epsrel=1e-11, limit=400)
    return val


def exit_magnitude_cdf(params, start, axis, r_eval):
    """Cumulative quadrature of exit_density_on_axis, normalized per axis.

    Returns the conditional CDF of the exit magnitude given the axis, evaluated
    at r_eval, by trapezoidal integration of the implemented density on a dense
    grid in the substituted variable s = (r/q)^p (where the integrand is a
    bounded rational function). Grid refinement is added around the integrand's
    peak so narrow Cauchy ridges are resolved.
    """
    u, v = start
    q = params.root1m2
    p = params.p
    z1, z2 = halfplane_image(params, u, v)
    r_eval = np.atleast_1d(np.asarray(r_eval, dtype=float))
    s_eval = (r_eval / q) ** p
    s_max = max(s_eval.max() * 1.0001, (abs(z1) + 50 * z2) * 1.01, 1e-6)
    base = np.geomspace(s_max * 1e-14, s_max, 300_001)
    lo, hi = z1 - 40 * z2, z1 + 40 * z2
    if hi > 0:  # refine around the peak when it sits in the domain
        peak = np.linspace(max(lo, s_max * 1e-14), min(hi, s_max), 120_001)
        base = np.union1d(base, peak)
    grid = np.concatenate(([0.0], base))
    shift = grid - z1 if axis == U_AXIS else grid + z1
    f = z2 / (np.pi * (z2**2 + shift**2))
    cum = np.concatenate(([0.0], np.cumsum(np.diff(grid) * 0.5 * (f[1:] + f[:-1]))))
    total = cum[-1] + _cauchy_tail(z1 if axis == U_AXIS else -z1, z2, grid[-1])
    vals = np.interp(s_eval, grid, cum) / total
    return vals if vals.size > 1 else float(vals[0])


def _cauchy_tail(loc, scale, s_from):
    """Mass of Cauchy(loc, scale) on (s_from, inf)."""
    return 0.5 - math.atan2(s_from - loc, scale) / math.pi


def sample_exit_batch(params, u, v, rng):
    """Vectorized exact exit sampling from per-entry starts (u, v).

    Entries already on E are returned unchanged. Returns (U, V) arrays on E.
    """
    u = np.array(u, dtype=float, copy=True)
    v = np.array(v, dtype=float, copy=True)
    rho = params.rho
    if rho == 1.0:
        # perfectly correlated coordinates move in lockstep: the smaller one
        # hits zero first and the gap is frozen
        return np.maximum(u - v, 0.0), np.maximum(v - u, 0.0)
    interior = (u > 0) & (v > 0)
    if rho == -1.0:
        tot = u + v
        toU = rng.random(u.shape) * tot < u
        sel = interior & toU
        u[sel], v[sel] = tot[sel], 0.0
        sel = interior & ~toU
        u[sel], v[sel] = 0.0, tot[sel]
        return u, v
    if np.any(interior):
        q = params.root1m2
        z1, z2 = halfplane_image(params, u[interior], v[interior])
        x = z1 + z2 * rng.standard_cauchy(z1.shape)
        mag = q * np.abs(x) ** (1.0 / params.p)
        uu = np.where(x >= 0, mag, 0.0)
        vv = np.where(x >= 0, 0.0, mag)
        u[interior] = uu
        v[interior] = vv
    return u, v


def sample_exit(params, start, rng):
    """Exact draw from the exit law started at (u, v); returns a BoundaryPoint."""
    u, v = start
    if not (u >= 0 and v >= 0):
        raise ValueError("start must be in the closed quadrant")
    uu, vv = sample_exit_batch(params, np.array([u]), np.array([v]), rng)
    if vv[0] > 0:
        return BoundaryPoint(V_AXIS, float(vv[0]))
    return BoundaryPoint(U_AXIS, float(uu[0]))


# ---------------------------------------------------------------------------
# jump measure nu and its balanced truncation
# ---------------------------------------------------------------------------

def nu_density_on_axis(rho, axis, y, a=1.0):
    """Density of the jump measure from magnitude a, vectorized over y."""
    if a <= 0:
        raise ValueError("scale must be positive")
    params = ExitLawParams(rho)
    p = params.p
    c = params.root1m2 * p * p / math.pi
    y = np.asarray(y, dtype=float)
    if axis == U_AXIS:
        denom = (y**p - a**p) ** 2
        if np.any(denom == 0):
            raise PoleValue(f"keep-branch density is infinite at magnitude {a}")
        return c * a ** (p - 1.0) * y ** (p - 1.0) / denom
    return c * a ** (p - 1.0) * y ** (p - 1.0) / (y**p + a**p) ** 2


def nu_density(rho, pt):
    """Density of the unit jump measure at a boundary point."""
    if pt.magnitude <= 0:
        raise ValueError("density is defined for positive magnitudes")
    return float(nu_density_on_axis(rho, pt.axis, pt.magnitude))


def nu_scaled_density(rho, a, pt):
    """Density of the jump measure seen from magnitude a (pole at y1 = a)."""
    if pt.magnitude <= 0:
        raise ValueError("density is defined for positive magnitudes")
    return float(nu_density_on_axis(rho, pt.axis, pt.magnitude, a=a))


@dataclass(frozen=True)
class TruncatedJumpMeasure:
    """Finite, drift-balanced truncation of the jump measure.

    The keep branch (y1-axis, pole at 1) is restricted to
    {y1 > 1+eps} union {y1 < 1-eps_prime} with eps_prime chosen so that
    int (y1 - 1) d(nu trunc) over all of E vanishes: the compensator of the
    truncated jumps then cancels the drift exactly and solutions started on E
    stay on E. The swap branch (y2-axis) is kept whole, so its first moment m2
    is exactly 1 at every truncation level.

    Sampling is exact closed-form inverse-CDF per branch (the s = y^p
    substitution makes every branch CDF rational), including the unbounded
    upper tails, so the sampler realizes the stated moments without bias.
    """

    rho: float
    eps: float
    eps_prime: float
    mass_low: float          # keep branch below the pole
    mass_up: float           # keep branch above the pole
    mass_swap: float         # whole swap branch
    balance_residual: float  # quadrature check of the defining condition
    m2: float                # int y2 dnu: exactly 1 for truncations, 1 at rho=-1
    balance: float           # int (y1-1) dnu: 0 by construction, -1 at rho=-1
    branches: tuple          # (is_swap, mass, quantile fn on [0,1)) per branch

    @property
    def total_mass(self):
        return self.mass_low + self.mass_up + self.mass_swap

    @property
    def params(self):
        return ExitLawParams(self.rho)


def atomic_swap_measure():
    """The rho = -1 jump measure: unit mass at the swap mark of magnitude 1.

    The keep-branch pole carries infinite mass in the rho -> -1 limit but the
    jump integrand vanishes there, so it is dropped; no truncation is needed.
    This measure is not drift-balanced (int (y1-1) dnu = -1); the flow
    compensator absorbs the -1 exactly, which is what freezes magnitudes on
    unit-sum states.
    """
    return TruncatedJumpMeasure(
        rho=-1.0, eps=0.0, eps_prime=0.0,
        mass_low=0.0, mass_up=0.0, mass_swap=1.0,
        balance_residual=-1.0, m2=1.0, balance=-1.0,
        branches=((True, 1.0, lambda f: np.ones_like(np.asarray(f, dtype=float))),),
    )


def truncate_nu(rho, eps):
    """Build the balanced truncated jump measure for eps in (0, 0.5).

    Raises if the balance equation has no root in (0, 1): the above-pole mass
    left by the cut is too small to balance the swap branch (eps too large).
    """
    if rho == -1.0:
        return atomic_swap_measure()
    if not 0 < eps < 0.5:
        raise ValueError("truncation cut must lie in (0, 0.5)")
    params = ExitLawParams(rho)
    p = params.p
    C = params.root1m2 * p / math.pi  # swap-branch mass; also the s-space scale

    # in s = y^p coordinates both branches have density C/(s -+ 1)^2
    def keep_signed_moment(s_a, s_b):
        # int (y - 1) dnu over keep-branch magnitudes [s_a^(1/p), s_b^(1/p)];
        # the integrand's singularity at s=1 is removable, so quad's roundoff
        # complaint there is noise (the residual check below bounds the error)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IntegrationWarning)
            val, _ = quad(lambda s: (s ** (1.0 / p) - 1.0) * C / (s - 1.0) ** 2,
                          s_a, s_b, epsabs=1e-13, epsrel=1e-12, limit=400)
        return val

    s_up = (1.0 + eps) ** p
    # split the upper integral at a far point to keep quad honest on the tail
    far = max(10.0, s_up * 4)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        m_tail = quad(lambda s: (s ** (1.0 / p) - 1.0) * C / (s - 1.0) ** 2,
                      far, np.inf, epsabs=1e-13, epsrel=1e-12, limit=400)[0]
    m_up = keep_signed_moment(s_up, far) + m_tail

    def balance(eps_prime):
        return m_up + keep_signed_moment(0.0, (1.0 - eps_prime) ** p) - C

    hi = 1.0 - 1e-13
    if balance(hi) <= 0:
        raise ValueError(
            f"balance root not bracketed at eps={eps}: cut leaves too little "
            "above-pole mass; choose a smaller eps")
    lo = 1e-12
    while balance(lo) >= 0:
        lo = lo * 10 if lo < 1e-3 else (lo + hi) / 2
    eps_prime = brentq(balance, lo, hi, xtol=1e-15, rtol=1e-15)
    residual = balance(eps_prime)

    # closed-form segment masses via the antiderivative -C/(s-1) (s-space)
    s_lo = (1.0 - eps_prime) ** p
    mass_low = C * s_lo / (1.0 - s_lo)
    mass_up = C / (s_up - 1.0)
    mass_swap = C

    # branch quantiles from the s-space antiderivative -C/(s-1); all rational
    # in s, so inverse-CDF sampling is exact including the unbounded tails
    def q_low(frac):   # below-pole segment, CDF fraction in [0, 1)
        s = frac * mass_low / (C + frac * mass_low)
        return s ** (1.0 / p)

    def q_up(frac):    # above-pole segment
        s = 1.0 + C / (mass_up * (1.0 - frac))
        return s ** (1.0 / p)

    def q_swap(frac):  # quantile of the swap branch
        s = frac / (1.0 - frac)
        return s ** (1.0 / p)

    branches = (
        (False, mass_low, q_low),
        (False, mass_up, q_up),
        (True, mass_swap, q_swap),
    )
    # the sampler is exact, so it realizes the analytic moments: the swap
    # first moment is identically 1 and the keep balance vanishes by the
    # choice of eps_prime (up to the quadrature residual recorded above)
    return TruncatedJumpMeasure(
        rho=rho, eps=eps, eps_prime=eps_prime,
        mass_low=mass_low, mass_up=mass_up, mass_swap=mass_swap,
        balance_residual=residual, m2=1.0, balance=0.0,
        branches=branches,
    )


def sample_nu_trunc(measure, rng, size=None):
    """Draw marks from the truncated measure.

    Returns a BoundaryPoint when size is None, else (is_swap bool array,
    magnitude array): is_swap marks the axis-swapping branch. Magnitudes come
    from the exact closed-form branch quantiles, so sampled moments match the
    measure's stated m2 and balance without discretization bias.
    """
    scalar = size is None
    n = 1 if scalar else int(size)
    masses = np.array([b[1] for b in measure.branches])
    probs = masses / masses.sum()
    seg = rng.choice(len(measure.branches), size=n, p=probs)
    mag = np.empty(n)
    swap = np.zeros(n, dtype=bool)
    u = rng.random(n)
    for i, (is_swap, _, quantile) in enumerate(measure.branches):
        pick = seg == i
        if np.any(pick):
            mag[pick] = quantile(u[pick])
            swap[pick] = is_swap
    if scalar:
        return BoundaryPoint(V_AXIS if swap[0] else U_AXIS, float(mag[0]))
    return swap, mag


# ---------------------------------------------------------------------------
# brute-force Euler oracle: correlated Brownian pair run to absorption
# ---------------------------------------------------------------------------

def euler_exit_oracle(rho, start, dt, n, rng, horizon, block=512):
    """Simulate n correlated Brownian pairs to absorption by plain Euler steps.

    Independent of the conformal sampler: increments are raw correlated
    normals, absorption is detected by sign crossing on the dt-grid. Paths not
    absorbed by the horizon are flagged censored. Returns a dict with fields
    on_u_axis (bool), magnitude, exit_time, censored.
    """
    q = math.sqrt(1.0 - rho * rho)
    u0, v0 = start
    u = np.full(n, float(u0))
    v = np.full(n, float(v0))
    exit_time = np.full(n, np.nan)
    magnitude = np.zeros(n)
    on_u_axis = np.zeros(n, dtype=bool)
    alive = np.arange(n)
    done_on_e = (u <= 0) | (v <= 0)
    if np.any(done_on_e):
        exit_time[done_on_e] = 0.0
        magnitude[done_on_e] = np.maximum(u[done_on_e], v[done_on_e])
        on_u_axis[done_on_e] = u[done_on_e] > 0
        alive = alive[~done_on_e]
    sdt = math.sqrt(dt)
    steps_total = int(round(horizon / dt))
    step = 0
    while alive.size and step < steps_total:
        k = min(block, steps_total - step)
        z1 = rng.standard_normal((alive.size, k))
        z2 = rho * z1 + q * rng.standard_normal((alive.size, k))
        pu = u[alive, None] + sdt * np.cumsum(z1, axis=1)
        pv = v[alive, None] + sdt * np.cumsum(z2, axis=1)
        hit = (pu <= 0) | (pv <= 0)
        any_hit = hit.any(axis=1)
        if np.any(any_hit):
            rows = np.flatnonzero(any_hit)
            first = np.argmax(hit[rows], axis=1)
            idx = alive[rows]
            exit_time[idx] = (step + first + 1) * dt
            uu = pu[rows, first]
            vv = pv[rows, first]
            # the coordinate that crossed is set to zero; simultaneous
            # crossings (measure ~ dt) land at the origin
            exitU = uu > 0
            magnitude[idx] = np.where(exitU, uu, np.maximum(vv, 0.0))
            on_u_axis[idx] = exitU
        survive = ~any_hit
        u[alive[survive]] = pu[survive, -1]
        v[alive[survive]] = pv[survive, -1]
        alive = alive[survive]
        step += k
    return {
        "on_u_axis": on_u_axis,
        "magnitude": magnitude,
        "exit_time": exit_time,
        "censored": np.isnan(exit_time),
    }
