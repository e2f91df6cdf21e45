"""Statistical support: KS tests, Hill tail estimator, SE pooling."""

import numpy as np
from scipy import stats as sps


def ks_statistic(samples, cdf):
    """Two-sided KS statistic of samples against a CDF.

    cdf may be a callable or an array of CDF values already evaluated at the
    samples (in the same order).
    """
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n == 0:
        raise ValueError("empty sample")
    if callable(cdf):
        F = np.asarray(cdf(x), dtype=float)
    else:
        F = np.sort(np.asarray(cdf, dtype=float))
        if F.shape != x.shape:
            raise ValueError("cdf values must match sample size")
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - F)
    d_minus = np.max(F - (i - 1) / n)
    return float(max(d_plus, d_minus))


def ks_two_sample(a, b):
    """Two-sample KS statistic and asymptotic p-value."""
    res = sps.ks_2samp(np.asarray(a, float), np.asarray(b, float), method="asymp")
    return float(res.statistic), float(res.pvalue)


def hill_exponent(samples, k=None):
    """Hill estimator of the tail exponent alpha (survival ~ x^-alpha).

    Uses the top k order statistics; default k = max(1000, 1% of N).
    """
    x = np.asarray(samples, dtype=float)
    x = x[x > 0]
    n = x.size
    if k is None:
        k = max(1000, int(np.ceil(0.01 * n)))
    if not 0 < k < n:
        raise ValueError(f"need 0 < k < n, got k={k}, n={n}")
    top = np.sort(x)[-(k + 1):]
    logs = np.log(top)
    return float(1.0 / np.mean(logs[1:] - logs[0]))


def pooled_mean_se(streams):
    """Mean and standard error of pooled replica values.

    streams: 1-d array of per-replica values, or a list of such arrays
    (concatenated before pooling).
    """
    if isinstance(streams, (list, tuple)):
        x = np.concatenate([np.asarray(s, float).ravel() for s in streams])
    else:
        x = np.asarray(streams, float).ravel()
    n = x.size
    if n < 2:
        raise ValueError("need at least 2 values")
    return float(np.mean(x)), float(np.std(x, ddof=1) / np.sqrt(n))


def complex_mean_se(values):
    """Mean of complex replica values with a (real SE, imag SE) pair."""
    z = np.asarray(values)
    mr, sr = pooled_mean_se(z.real)
    mi, si = pooled_mean_se(z.imag)
    return complex(mr, mi), (sr, si)


def tail_slope(samples, q_lo=0.90, q_hi=0.995, n_grid=40):
    """Tail exponent from the log-log slope of the empirical survival function.

    Fits -d log S / d log t between the q_lo and q_hi sample quantiles. Valid
    under right-censoring as long as q_hi falls below the censoring point:
    survival estimates at t below the horizon do not depend on values beyond it.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    t_lo, t_hi = np.quantile(x, [q_lo, q_hi])
    if not 0 < t_lo < t_hi:
        raise ValueError("degenerate quantile window")
    grid = np.geomspace(t_lo, t_hi, n_grid)
    surv = 1.0 - np.searchsorted(x, grid, side="right") / n
    keep = surv > 0
    slope, _ = np.polyfit(np.log(grid[keep]), np.log(surv[keep]), 1)
    return float(-slope)


def quantile_se(samples, q, n_boot=200, seed=0):
    """Bootstrap standard error of an empirical quantile."""
    x = np.asarray(samples, dtype=float)
    rng = np.random.Generator(np.random.Philox(key=seed))
    idx = rng.integers(0, x.size, size=(n_boot, x.size))
    qs = np.quantile(x[idx], q, axis=1)
    return float(np.std(qs, ddof=1))
