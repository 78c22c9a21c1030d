"""Shared numeric kernels: entropies, exponential integral, quadrature grids,
mod-one-dimensional-lattice Gaussian densities, interval estimates."""

from __future__ import annotations

import math

import numpy as np

LOG2 = math.log(2.0)
# Euler-Mascheroni constant
EULER_GAMMA = float(np.euler_gamma)


class NumericalAccuracyError(RuntimeError):
    """Raised when an internal consistency/accuracy contract is violated."""


def binary_entropy(p):
    """H2(p) in bits, elementwise; H2(0) = H2(1) = 0."""
    p = np.asarray(p, dtype=float)
    out = np.zeros_like(p)
    m = (p > 0.0) & (p < 1.0)
    pm = p[m]
    out[m] = -(pm * np.log2(pm) + (1.0 - pm) * np.log2(1.0 - pm))
    return out if out.ndim else float(out)


def inv_binary_entropy(y, tol=1e-15):
    """Inverse of H2 on [0, 1/2]; bisection, monotone therefore safe."""
    y = np.asarray(y, dtype=float)
    scalar = y.ndim == 0
    y = np.atleast_1d(y)
    if np.any((y < 0.0) | (y > 1.0)):
        raise ValueError("binary entropy values live in [0, 1]")
    lo = np.zeros_like(y)
    hi = np.full_like(y, 0.5)
    # 60 halvings takes the bracket below any float64 spacing on [0, 1/2]
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        below = binary_entropy(mid) < y
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    out = 0.5 * (lo + hi)
    out[y == 0.0] = 0.0
    out[y == 1.0] = 0.5
    return float(out[0]) if scalar else out


def exp1(x):
    """Exponential integral E1(x) for x > 0.

    Power series for x < 1, modified-Lentz continued fraction for x >= 1.
    Both converge to machine precision in their domain; they agree at the
    split to ~1e-15 relative.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x).copy()
    if np.any(x <= 0.0):
        raise ValueError("E1 requires x > 0")
    out = np.empty_like(x)
    small = x < 1.0
    if np.any(small):
        xs = x[small]
        # E1(x) = -gamma - ln x + sum_{k>=1} (-1)^{k+1} x^k / (k * k!)
        acc = np.zeros_like(xs)
        term = np.ones_like(xs)
        for k in range(1, 40):
            term = term * (-xs) / k
            delta = -term / k
            acc += delta
            if np.all(np.abs(delta) < 1e-18 * (np.abs(acc) + 1e-300)):
                break
        out[small] = -EULER_GAMMA - np.log(xs) + acc
    if np.any(~small):
        xl = x[~small]
        # E1(x) = exp(-x) / (x + 1/(1 + 1/(x + 2/(1 + 2/(x + ...)))))
        tiny = 1e-300
        f = np.full_like(xl, tiny)
        c = f.copy()
        d = np.zeros_like(xl)
        # Lentz iteration on the standard CF with a_1=1, b_1=x, then
        # a_{2k}=k, b_{2k}=1 and a_{2k+1}=k, b_{2k+1}=x.
        b = xl
        a = np.ones_like(xl)
        for n in range(1, 200):
            d = b + a * d
            d[d == 0.0] = tiny
            c = b + a / c
            c[c == 0.0] = tiny
            d = 1.0 / d
            delta = c * d
            f = f * delta
            if np.all(np.abs(delta - 1.0) < 1e-16):
                break
            k = (n + 1) // 2
            a = np.full_like(xl, float(k))
            b = xl if (n % 2 == 0) else np.ones_like(xl)
        out[~small] = np.exp(-xl) * f
    return float(out[0]) if scalar else out


def gauss_legendre_panels(lo, hi, npanels, order):
    """Composite Gauss-Legendre rule on [lo, hi]; returns (nodes, weights)."""
    if hi <= lo:
        return np.empty(0), np.empty(0)
    xg, wg = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, npanels + 1)
    a = edges[:-1, None]
    half = 0.5 * (edges[1:, None] - a)
    nodes = (a + half * (xg[None, :] + 1.0)).ravel()
    weights = (half * wg[None, :]).ravel()
    return nodes, weights


def gauss_legendre_segments(bounds, order):
    """GL nodes/weights for many segments at once.

    bounds: array (S, 2) of [lo, hi] per segment. Returns nodes, weights of
    shape (S, order).
    """
    bounds = np.asarray(bounds, dtype=float)
    xg, wg = np.polynomial.legendre.leggauss(order)
    a = bounds[:, 0:1]
    half = 0.5 * (bounds[:, 1:2] - a)
    return a + half * (xg[None, :] + 1.0), half * wg[None, :]


def wilson_interval(k, n, z=1.959963984540054):
    """Wilson score interval for a binomial proportion (default 95%)."""
    if n <= 0:
        return 0.0, 1.0
    phat = k / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    rad = z * math.sqrt(phat * (1.0 - phat) / n + z * z / (4 * n * n)) / denom
    # the score bounds equal phat exactly at k=0 and k=n; clamp the rounding
    # residue so the interval always contains the point estimate
    return max(0.0, min(center - rad, phat)), min(1.0, max(center + rad, phat))


# --- periodized (mod v*Z) Gaussian density ---------------------------------

# Below this sigma/v ratio the direct theta sum needs few terms and stays
# accurate; above it the Poisson-dual sum converges faster.
_DUAL_SWITCH = 0.31


def _direct_theta(tm, sigma, v):
    # tm in [0, v); terms beyond 12 deviations contribute < exp(-72)
    kspan = int(math.ceil(12.0 * float(np.max(sigma)) / v)) + 1
    ks = np.arange(-kspan, kspan + 1, dtype=float)
    x = tm[..., None] + ks * v
    out = np.exp(-0.5 * (x / sigma[..., None]) ** 2).sum(axis=-1)
    return out / (math.sqrt(2.0 * math.pi) * sigma)


def _dual_theta(t, sigma, v):
    # (1/v) * (1 + 2 sum_k q^{k^2} cos(2 pi k t / v)), q = exp(lq)
    lq = -2.0 * (math.pi * sigma / v) ** 2
    lq_top = float(np.max(lq))
    kmax = int(math.ceil(math.sqrt(745.0 / -lq_top))) if lq_top > -745.0 else 0
    out = np.ones_like(t, dtype=float)
    for k in range(1, kmax + 1):
        out = out + 2.0 * np.exp(lq * (k * k)) * np.cos(2.0 * math.pi * k * t / v)
    return out / v


def wrapped_gaussian_pdf(t, sigma, v):
    """Density of (sigma*Z mod v) at t: f(t) = sum_k phi_sigma(t + k v).

    Periodic with period v, integrates to 1 over one period. Vectorized in t
    and sigma (broadcast together).
    """
    scalar = np.asarray(t).ndim == 0 and np.asarray(sigma).ndim == 0
    t, sigma = np.broadcast_arrays(np.atleast_1d(np.asarray(t, dtype=float)),
                                   np.asarray(sigma, dtype=float))
    if v <= 0.0 or np.any(sigma <= 0.0):
        raise ValueError("sigma and v must be positive")
    out = np.empty(t.shape)
    direct = sigma < _DUAL_SWITCH * v
    if np.any(direct):
        out[direct] = _direct_theta(np.mod(t[direct], v), sigma[direct], v)
    if np.any(~direct):
        out[~direct] = _dual_theta(t[~direct], sigma[~direct], v)
    return float(out[0]) if scalar else out


def wrapped_gaussian_logpdf(t, sigma, v):
    """log of wrapped_gaussian_pdf, stable for sigma << v (deep tails)."""
    scalar = np.asarray(t).ndim == 0 and np.asarray(sigma).ndim == 0
    t, sigma = np.broadcast_arrays(np.atleast_1d(np.asarray(t, dtype=float)),
                                   np.asarray(sigma, dtype=float))
    if v <= 0.0 or np.any(sigma <= 0.0):
        raise ValueError("sigma and v must be positive")
    out = np.empty(t.shape)
    direct = sigma < _DUAL_SWITCH * v
    if np.any(direct):
        tm = np.mod(t[direct], v)
        sd = sigma[direct]
        kspan = int(math.ceil(12.0 * float(np.max(sd)) / v)) + 1
        ks = np.arange(-kspan, kspan + 1, dtype=float)
        e = -0.5 * ((tm[..., None] + ks * v) / sd[..., None]) ** 2
        m = e.max(axis=-1)
        s = np.exp(e - m[..., None]).sum(axis=-1)
        out[direct] = m + np.log(s) - np.log(math.sqrt(2.0 * math.pi) * sd)
    if np.any(~direct):
        # dual sum is bounded away from 0 here (alternating part < 1)
        out[~direct] = np.log(_dual_theta(t[~direct], sigma[~direct], v))
    return float(out[0]) if scalar else out


def wrapped_gaussian_entropy(sigma, v, n=512):
    """Differential entropy (bits) of the wrapped Gaussian on one period.

    Midpoint rule; the integrand is smooth and periodic so the rule is
    spectrally accurate. Below sigma/v = 0.01 the period holds one isolated
    bump (aliasing < exp(-1250)) and the free-Gaussian entropy is exact to
    double precision, so that closed form is returned instead.
    """
    if sigma < 0.01 * v:
        return 0.5 * math.log2(2.0 * math.pi * math.e * sigma * sigma)
    t = (np.arange(n) + 0.5) * (v / n)
    f = wrapped_gaussian_pdf(t, sigma, v)
    lf = wrapped_gaussian_logpdf(t, sigma, v)
    return float(-(v / n) * np.sum(f * lf) / LOG2)
