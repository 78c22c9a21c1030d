"""One-dimensional binary lattice partition chains: fading mod-lattice and
two-coset channels, level capacities, uncoded error terms, and chain design
against top-capacity / bottom-error targets."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .fading import FadingDistribution
from .numerics import (
    NumericalAccuracyError,
    gauss_legendre_panels,
    wrapped_gaussian_entropy,
    wrapped_gaussian_pdf,
)
from .quantize import QuantizerParams, quantize_by_llr

_log = logging.getLogger(__name__)

# relative bisection tolerance on designed scales
SCALE_REL_TOL = 1e-6
# bracket growth limit for the design searches
_MAX_DOUBLINGS = 200


class ChainDesignError(ValueError):
    """No lattice scale meets the design target within the search span."""


@dataclass(frozen=True)
class PartitionChain:
    """Chain of scaled integer lattices halved r times: level-l spacing is
    top_scale * 2^l, so consecutive quotients are binary and the log volume
    ratio bottom/top is exactly r bits.

    h_l and h_s are the large/small gain design points the chain was sized
    for; delta is the exponent in h_s = N^-delta.
    """

    top_scale: float
    r: int
    h_l: float
    h_s: float
    delta: float

    def __post_init__(self):
        if self.top_scale <= 0.0:
            raise ValueError("top_scale must be positive")
        if self.r < 1:
            raise ValueError("need at least one binary level")
        if self.h_l <= 0.0 or self.h_s <= 0.0:
            raise ValueError("gain design points must be positive")

    def scale(self, level):
        """Spacing of the level-th lattice in the chain (level 0 = top)."""
        if not 0 <= level <= self.r:
            raise ValueError(f"level must lie in [0, {self.r}]")
        return self.top_scale * 2.0**level

    @property
    def bottom_scale(self):
        return self.scale(self.r)

    def to_dict(self):
        return {
            "top_scale": self.top_scale,
            "r": self.r,
            "h_l": self.h_l,
            "h_s": self.h_s,
            "delta": self.delta,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            top_scale=float(d["top_scale"]),
            r=int(d["r"]),
            h_l=float(d["h_l"]),
            h_s=float(d["h_s"]),
            delta=float(d["delta"]),
        )


@dataclass(frozen=True)
class LevelFadingChannel:
    """Binary-input channel of one partition step under fading.

    Bit x enters as the coset shift x * spacing; after the receiver rescales
    by 1/h and reduces mod the level lattice, the conditional output density
    at gain h is the wrapped Gaussian with deviation noise_sd(h). noise_fn
    overrides the plain sigma/h deviation (the shaped construction passes the
    MMSE-equivalent deviation instead).
    """

    chain: PartitionChain
    level: int  # 1-based
    sigma: float
    dist: FadingDistribution
    noise_fn: object = None

    def __post_init__(self):
        if not 1 <= self.level <= self.chain.r:
            raise ValueError(f"level must lie in [1, {self.chain.r}]")
        if self.sigma <= 0.0 and self.noise_fn is None:
            raise ValueError("sigma must be positive")

    @property
    def mod_scale(self):
        return self.chain.scale(self.level)

    @property
    def spacing(self):
        return self.chain.scale(self.level - 1)

    def noise_sd(self, h):
        if self.noise_fn is not None:
            return self.noise_fn(h)
        return self.sigma / h


class LevelChannelSlices:
    """quantize_by_llr evaluator for a LevelFadingChannel.

    Slices are gain values on a composite Gauss-Legendre grid weighted by the
    gain density. The half domain [0, spacing) holds one point of each
    conjugate pair (t, t + spacing) of the mod-scale period.
    """

    def __init__(self, lc: LevelFadingChannel, npanels=48, order=8):
        self.lc = lc
        nodes, wts = gauss_legendre_panels(0.0, lc.dist.h_max(), npanels, order)
        self._labels = nodes
        self._weights = wts * lc.dist.pdf(nodes)

    def outer_nodes(self):
        return self._labels, self._weights

    def half_domain(self, h):
        return 0.0, self.lc.spacing

    def scan_scale(self, h):
        return min(float(self.lc.noise_sd(h)), self.lc.spacing)

    def pair_density(self, h, t):
        s = float(self.lc.noise_sd(h))
        v = self.lc.mod_scale
        t = np.asarray(t, dtype=float)
        return (
            wrapped_gaussian_pdf(t, s, v),
            wrapped_gaussian_pdf(t - self.lc.spacing, s, v),
        )


def mod_fading_pdf(scale, dist: FadingDistribution, sigma, ytilde, h, x=0.0):
    """Joint density of (output mod scale*Z, gain) at input offset x.

    Factorizes as gain density times the wrapped Gaussian with deviation
    sigma/h; vectorized in ytilde and h jointly.
    """
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    h = np.asarray(h, dtype=float)
    return dist.pdf(h) * wrapped_gaussian_pdf(np.asarray(ytilde) - x, sigma / h, scale)


def level_channel_pdf(lc: LevelFadingChannel, x, ytilde, h):
    """Joint output/gain density of the two-coset level channel at bit x."""
    if x not in (0, 1):
        raise ValueError("input bit must be 0 or 1")
    h = np.asarray(h, dtype=float)
    t = np.asarray(ytilde) - x * lc.spacing
    return lc.dist.pdf(h) * wrapped_gaussian_pdf(t, lc.noise_sd(h), lc.mod_scale)


def level_capacity(lc: LevelFadingChannel, params: QuantizerParams = None, tol=1e-3):
    """Capacity in bits of the two-coset level channel.

    Computed as the gain expectation of the entropy difference between the
    input-spacing and mod-scale wrapped densities plus one bit. When params
    is given, the quantized-channel capacity is computed as a cross-check and
    must sit within 1/Q + tol below the direct value.
    """
    v_in, v_out = lc.spacing, lc.mod_scale

    def integrand(h):
        s = float(lc.noise_sd(h))
        return lc.dist.pdf(h) * (
            1.0 + wrapped_gaussian_entropy(s, v_in) - wrapped_gaussian_entropy(s, v_out)
        )

    direct, err = integrate.quad(
        integrand, 0.0, lc.dist.h_max(), epsabs=1e-11, epsrel=1e-10, limit=400
    )
    if err > 1e-7:
        raise NumericalAccuracyError(f"level capacity quadrature error {err!r}")
    if params is not None:
        quantized = quantize_by_llr(LevelChannelSlices(lc), params).capacity()
        gap = direct - quantized
        if not -tol <= gap <= 1.0 / params.Q + tol:
            raise NumericalAccuracyError(
                f"quantized capacity {quantized!r} vs direct {direct!r} "
                f"violates the 1/Q degradation window"
            )
    return direct


def mod_capacity(scale, dist: FadingDistribution, sigma):
    """Capacity in bits of the fading mod-(scale*Z) channel, uniform input."""
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")

    def integrand(h):
        return dist.pdf(h) * (math.log2(scale) - wrapped_gaussian_entropy(sigma / h, scale))

    val, err = integrate.quad(integrand, 0.0, dist.h_max(), epsabs=1e-11, epsrel=1e-10, limit=400)
    if err > 1e-7:
        raise NumericalAccuracyError(f"mod capacity quadrature error {err!r}")
    return val


def mod_capacity_fixed(scale, noise_sd):
    """C(scale*Z, noise_sd^2): mod-lattice capacity at one fixed gain."""
    return math.log2(scale) - wrapped_gaussian_entropy(noise_sd, scale)


def point_error_probability(scale, noise_sd):
    """Nearest-point decision error of scale*Z under N(0, noise_sd^2)."""
    if noise_sd == 0.0:
        return 0.0
    return float(special.erfc(scale / (2.0 * math.sqrt(2.0) * noise_sd)))


def uncoded_error_expectation(scale, dist: FadingDistribution, sigma):
    """Gain expectation of the scale*Z nearest-point error probability."""
    if sigma == 0.0:
        return 0.0
    c = scale / (2.0 * math.sqrt(2.0) * sigma)

    def integrand(h):
        return dist.pdf(h) * special.erfc(c * h)

    val, _ = integrate.quad(integrand, 0.0, dist.h_max(), epsabs=1e-15, epsrel=1e-10, limit=400)
    return val


def uncoded_error_bound(scale, dist: FadingDistribution, sigma, h_s):
    """Two-term split bound on the expected uncoded error: full outage mass
    below h_s plus the h_s-gain error applied to the rest. Verifies that the
    exact expectation does not exceed it."""
    if h_s <= 0.0:
        raise ValueError("h_s must be positive")
    below = dist.cdf(h_s)
    pe_at = point_error_probability(scale, sigma / h_s) if sigma > 0.0 else 0.0
    bound = below + pe_at * (1.0 - below)
    exact = uncoded_error_expectation(scale, dist, sigma)
    if exact > bound + 1e-12:
        raise NumericalAccuracyError(
            f"exact uncoded error {exact!r} exceeds its split bound {bound!r}"
        )
    return bound


def _grow_bracket(pred, start, direction):
    """Doubles (direction=+1) or halves (-1) start until pred flips."""
    val = start
    for _ in range(_MAX_DOUBLINGS):
        nxt = val * 2.0 if direction > 0 else val * 0.5
        if pred(nxt):
            return val, nxt
        val = nxt
    return None


def design_chain(dist: FadingDistribution, sigma, N, delta, eps1_target, pe_target):
    """Sizes a chain for block length N: gains h_l = N and h_s = N^-delta,
    largest top scale whose fixed-gain mod capacity stays below eps1_target,
    smallest power-of-two multiple of it whose fixed-gain point error at h_s
    stays below pe_target.
    """
    if N < 2 or N & (N - 1):
        raise ValueError("N must be a power of two >= 2")
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    if not 0.0 < pe_target < 1.0:
        raise ValueError("pe_target must lie in (0, 1)")
    if eps1_target <= 0.0:
        raise ChainDesignError("eps1_target must be positive; any scale exceeds it")
    h_l = float(N)
    h_s = float(N) ** (-delta)

    # top: capacity is increasing in the scale
    def top_feasible(v):
        return mod_capacity_fixed(v, sigma / h_l) <= eps1_target

    start = sigma / h_l
    if top_feasible(start):
        grown = _grow_bracket(lambda v: not top_feasible(v), start, +1)
        if grown is None:
            raise ChainDesignError(
                f"top capacity never reaches {eps1_target!r} within the search span"
            )
        lo, hi = grown
    else:
        grown = _grow_bracket(top_feasible, start, -1)
        if grown is None:
            raise ChainDesignError(
                f"top capacity target {eps1_target!r} unreachable; at scale "
                f"{start!r} the capacity is {mod_capacity_fixed(start, sigma / h_l)!r}"
            )
        hi, lo = grown
    while hi - lo > SCALE_REL_TOL * lo:
        mid = 0.5 * (lo + hi)
        if top_feasible(mid):
            lo = mid
        else:
            hi = mid
    v_top = lo

    # bottom: point error is decreasing in the scale
    def bot_feasible(v):
        return point_error_probability(v, sigma / h_s) <= pe_target

    start = sigma / h_s
    if bot_feasible(start):
        grown = _grow_bracket(lambda v: not bot_feasible(v), start, -1)
        if grown is None:
            raise ChainDesignError("bottom error target holds at arbitrarily small scales")
        hi, lo = grown
    else:
        grown = _grow_bracket(bot_feasible, start, +1)
        if grown is None:
            raise ChainDesignError(
                f"bottom error target {pe_target!r} unreachable; at scale "
                f"{start!r} the error is {point_error_probability(start, sigma / h_s)!r}"
            )
        lo, hi = grown
    while hi - lo > SCALE_REL_TOL * lo:
        mid = 0.5 * (lo + hi)
        if bot_feasible(mid):
            hi = mid
        else:
            lo = mid
    v_bot = hi

    r = max(1, math.ceil(math.log2(v_bot / v_top) - 1e-12))
    chain = PartitionChain(top_scale=v_top, r=r, h_l=h_l, h_s=h_s, delta=delta)
    _log.info(
        "designed chain: top %.6g, r=%d (bottom %.6g needs >= %.6g), h_l=%g h_s=%g",
        v_top, r, chain.bottom_scale, v_bot, h_l, h_s,
    )
    return chain


def chain_meets_targets(chain: PartitionChain, sigma, eps1_target, pe_target):
    """Fixed-gain design criteria evaluated on an existing chain."""
    top_capacity = mod_capacity_fixed(chain.top_scale, sigma / chain.h_l)
    bottom_error = point_error_probability(chain.bottom_scale, sigma / chain.h_s)
    return {
        "top_capacity": top_capacity,
        "bottom_error": bottom_error,
        "top_ok": top_capacity <= eps1_target,
        "bottom_ok": bottom_error <= pe_target,
        "ok": top_capacity <= eps1_target and bottom_error <= pe_target,
    }
