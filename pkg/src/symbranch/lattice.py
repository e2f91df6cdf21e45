"""Finite site graphs, the jump-rate generator, and the heat semigroup.

Graphs are small (tori of side L, or the 2-site dumbbell), stored dense. The
generator is a symmetric Q-matrix: nonnegative off-diagonal rates, rows summing
to zero. Test weights beta are identically 1 at this scale; the weighted-norm
bound sum_i beta(i)|a(i,k)| <= M*beta(k) holds with M = 2 for every graph built
here (|a(k,k)| <= 1 and column sums of |a| equal 2|a(k,k)|).
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm


@dataclass(frozen=True)
class SiteGraph:
    """Finite vertex set with symmetric zero-row-sum rate matrix."""

    rates: np.ndarray          # (n, n) Q-matrix
    beta: np.ndarray           # (n,) positive test weights
    M: float = 2.0             # recorded weighted-norm constant
    label: str = ""
    _expm_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        a = np.asarray(self.rates, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("rates must be a square matrix")
        off = a - np.diag(np.diag(a))
        if np.any(off < 0):
            raise ValueError("off-diagonal rates must be nonnegative")
        if not np.allclose(a, a.T, atol=1e-12):
            raise ValueError("rate matrix must be symmetric")
        if np.max(np.abs(a.sum(axis=1))) > 1e-12:
            raise ValueError("rows must sum to zero")
        object.__setattr__(self, "rates", a)
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=float))
        if self.beta.shape != (a.shape[0],) or np.any(self.beta <= 0):
            raise ValueError("beta must be positive, one weight per site")

    @property
    def n_sites(self):
        return self.rates.shape[0]

    def __hash__(self):
        return id(self)


def as_field(g, values):
    """Validate a per-site scalar field (one real per site) against g."""
    f = np.asarray(values, dtype=float)
    if f.shape[-1] != g.n_sites:
        raise ValueError(f"field has {f.shape[-1]} entries, graph has {g.n_sites} sites")
    return f


def build_torus(d, L):
    """d-dimensional torus of side L with nearest-neighbor rates 1/(2d).

    L < 3 is rejected: side 2 would stack parallel edges into one rate and side
    1 has no neighbors; use build_dumbbell for the two-site graph.
    """
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if L < 3:
        raise ValueError("torus side must be >= 3; use build_dumbbell for 2 sites")
    n = L**d
    a = np.zeros((n, n))
    rate = 1.0 / (2 * d)
    coords = np.array(np.unravel_index(np.arange(n), (L,) * d)).T
    for k in range(n):
        for axis in range(d):
            for step in (-1, 1):
                nb = coords[k].copy()
                nb[axis] = (nb[axis] + step) % L
                j = int(np.ravel_multi_index(nb, (L,) * d))
                a[k, j] += rate
    np.fill_diagonal(a, -a.sum(axis=1))
    return SiteGraph(rates=a, beta=np.ones(n), label=f"torus(d={d},L={L})")


def build_dumbbell(rate=0.5):
    """Two sites joined by a single symmetric rate."""
    if rate <= 0:
        raise ValueError("rate must be positive")
    a = np.array([[-rate, rate], [rate, -rate]], dtype=float)
    return SiteGraph(rates=a, beta=np.ones(2), label=f"dumbbell(rate={rate})")


def apply_generator(g, f):
    """(Af)(i) = sum_j a(i,j) f(j); acts on the last axis of f."""
    f = as_field(g, f)
    return f @ g.rates.T


def heat_semigroup(g, t):
    """exp(t*A): symmetric stochastic matrix, cached per (graph, t)."""
    if t < 0:
        raise ValueError("time must be >= 0")
    key = float(t)
    P = g._expm_cache.get(key)
    if P is None:
        P = np.eye(g.n_sites) if t == 0 else expm(t * g.rates)
        P.setflags(write=False)
        g._expm_cache[key] = P
    return P


def beta_pairing(g, f):
    """<f, beta> = sum_k f(k) beta(k)."""
    f = as_field(g, f)
    return float(f @ g.beta)
