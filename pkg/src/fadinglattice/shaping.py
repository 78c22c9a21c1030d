"""Lattice Gaussian shaping over a one-dimensional partition chain.

Discrete Gaussian constellation and sampler, flatness factor, MMSE
rescaling, per-level bit priors with their asymmetric level channels,
shaped encoding/decoding driven by shared randomness, and the shaped
union bound with its out-of-Voronoi term.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import expit, logsumexp

from .bmsc import DiscreteBMSC
from .codec import LLR_CLIP, polar_transform, sc_process, trial_rng
from .construction import construct_cached
from .fading import RAYLEIGH, FadingDistribution, ergodic_capacity_power
from .numerics import (
    LOG2,
    gauss_legendre_panels,
    wrapped_gaussian_pdf,
)
from .partitions import PartitionChain, LevelFadingChannel, level_capacity
from .quantize import QuantizerParams, quantize_by_llr

log = logging.getLogger(__name__)

# support radius of truncated theta sums, in deviations
TRUNCATION_DEVIATIONS = 12.0


class ShapedBuildError(ValueError):
    """Shaped construction cannot meet the requested rates or budget."""


@dataclass(frozen=True)
class LatticeGaussianSpec:
    """Discrete Gaussian over the lattice scale*Z with center c.

    The support is truncated where the Gaussian weight is negligible
    (TRUNCATION_DEVIATIONS deviations from the center), and the pmf is
    normalized over that support.
    """

    scale: float
    sigma_s: float
    c: float = 0.0

    def __post_init__(self):
        if self.scale <= 0.0:
            raise ValueError("scale must be positive")
        if self.sigma_s <= 0.0:
            raise ValueError("sigma_s must be positive")

    @cached_property
    def indices(self):
        reach = TRUNCATION_DEVIATIONS * self.sigma_s
        lo = math.floor((self.c - reach) / self.scale) - 2
        hi = math.ceil((self.c + reach) / self.scale) + 2
        return np.arange(lo, hi + 1)

    @cached_property
    def points(self):
        return self.indices * self.scale

    @cached_property
    def pmf(self):
        w = np.exp(-((self.points - self.c) ** 2) / (2.0 * self.sigma_s**2))
        return w / w.sum()

    @cached_property
    def power(self):
        return float(np.sum(self.pmf * self.points**2))


def discrete_gaussian_pmf(spec: LatticeGaussianSpec, lam):
    """Probability of lattice point(s) lam; zero outside the truncated support."""
    lam = np.asarray(lam, dtype=float)
    scalar = lam.ndim == 0
    lam = np.atleast_1d(lam)
    k = np.rint(lam / spec.scale).astype(np.int64)
    if np.any(np.abs(lam - k * spec.scale) > 1e-9 * spec.scale):
        raise ValueError("points must lie on the lattice scale*Z")
    out = np.zeros(lam.shape)
    pos = k - spec.indices[0]
    inside = (pos >= 0) & (pos < len(spec.indices))
    out[inside] = spec.pmf[pos[inside]]
    return float(out[0]) if scalar else out


def sample(spec: LatticeGaussianSpec, rng, size=None):
    """Inverse-CDF draws from the truncated pmf; returns lattice points."""
    cdf = np.cumsum(spec.pmf)
    u = rng.random(size if size is not None else 1)
    idx = np.minimum(np.searchsorted(cdf, u, side="right"), len(cdf) - 1)
    pts = spec.points[idx]
    return float(pts[0]) if size is None else pts


def flatness_factor(scale, sigma):
    """Largest deviation of the sigma-blurred lattice density from uniform.

    The extreme over the fundamental domain of scale*Z sits at one of the
    two symmetry points, so both are evaluated. In the near-flat regime the
    deviation is summed directly in the dual domain (a difference against 1
    would round tiny values away).
    """
    if sigma <= 0.0:
        return math.inf
    if sigma < 0.31 * scale:
        at0 = scale * wrapped_gaussian_pdf(0.0, sigma, scale) - 1.0
        athalf = scale * wrapped_gaussian_pdf(0.5 * scale, sigma, scale) - 1.0
        return max(abs(at0), abs(athalf))
    kmax = math.ceil(6.15 * scale / sigma) + 2
    k = np.arange(1, kmax + 1)
    q = np.exp(-2.0 * math.pi**2 * sigma**2 * k**2 / scale**2)
    at0 = 2.0 * float(q.sum())
    athalf = 2.0 * float(np.sum(np.where(k % 2 == 0, q, -q)))
    return max(abs(at0), abs(athalf))


@dataclass(frozen=True)
class MmseParams:
    """Per-gain MMSE rescaling coefficient and equivalent noise deviation."""

    sigma_s: float
    sigma: float

    def alpha(self, h):
        h = np.asarray(h, dtype=float)
        return h * self.sigma_s**2 / (h**2 * self.sigma_s**2 + self.sigma**2)

    def sigma_tilde(self, h):
        h = np.asarray(h, dtype=float)
        return self.sigma_s * self.sigma / np.sqrt(h**2 * self.sigma_s**2 + self.sigma**2)


# --- level labeling ----------------------------------------------------------


def _check_chain(spec: LatticeGaussianSpec, chain: PartitionChain):
    if abs(chain.top_scale - spec.scale) > 1e-9 * spec.scale:
        raise ValueError("chain top scale must match the constellation lattice")


def _level_residues(spec: LatticeGaussianSpec, ell):
    """Residue of each support index modulo 2**ell (nonnegative)."""
    return np.mod(spec.indices, 1 << ell)


def level_bit_priors(spec: LatticeGaussianSpec, chain: PartitionChain):
    """Conditional label-bit distributions P(X_ell | X_{1:ell-1}).

    Returns a tuple of (2**(ell-1), 2) arrays, one per level; rows are the
    contexts (residues modulo 2**(ell-1)) and may be [1/2, 1/2] for contexts
    of zero mass (never reached by valid paths).
    """
    _check_chain(spec, chain)
    out = []
    for ell in range(1, chain.r + 1):
        nctx = 1 << (ell - 1)
        ctx = _level_residues(spec, ell - 1)
        bit = (_level_residues(spec, ell) >> (ell - 1)).astype(np.int64)
        mass = np.zeros((nctx, 2))
        np.add.at(mass, (ctx, bit), spec.pmf)
        tot = mass.sum(axis=1, keepdims=True)
        prior = np.where(tot > 0.0, mass / np.where(tot > 0.0, tot, 1.0), 0.5)
        out.append(prior)
    return tuple(out)


def context_marginals(spec: LatticeGaussianSpec, chain: PartitionChain):
    """P(context) per level: D-mass of each residue class modulo 2**(ell-1)."""
    _check_chain(spec, chain)
    out = []
    for ell in range(1, chain.r + 1):
        nctx = 1 << (ell - 1)
        mass = np.zeros(nctx)
        np.add.at(mass, _level_residues(spec, ell - 1), spec.pmf)
        out.append(mass)
    return tuple(out)


# --- asymmetric level channels -----------------------------------------------


def asym_level_pdf(spec: LatticeGaussianSpec, chain: PartitionChain, ell, res, y, h, dist: FadingDistribution, sigma):
    """Joint density of (y, h) given the first ell label bits (residue res).

    Written in the MMSE form: a Gaussian prefactor in y/h times the theta
    sum over the coset, normalized by the coset's Gaussian mass. ell=0
    (res=0) gives the unconditional signal marginal.
    """
    _check_chain(spec, chain)
    if spec.c != 0.0:
        raise ValueError("centered constellations only")
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    if not 0 <= ell <= chain.r:
        raise ValueError(f"level must lie in [0, {chain.r}]")
    if not 0 <= res < (1 << ell):
        raise ValueError("residue out of range for this level")
    sel = _level_residues(spec, ell) == res
    if not np.any(sel):
        raise ValueError("empty coset in the truncated support")
    pts = spec.points[sel]
    mm = MmseParams(spec.sigma_s, sigma)
    y = np.asarray(y, dtype=float)
    a = float(mm.alpha(h))
    st = float(mm.sigma_tilde(h))
    # the coset's Gaussian weights are absorbed by completing the square;
    # the theta sum over the rescaled output is unweighted
    logw = -(pts**2) / (2.0 * spec.sigma_s**2)
    log_fa = logsumexp(logw) - math.log(math.sqrt(2.0 * math.pi) * spec.sigma_s)
    log_pref = (
        math.log(dist.pdf(h))
        - math.log(2.0 * math.pi * sigma * spec.sigma_s)
        - log_fa
    )
    body = logsumexp(-((a * y[..., None] - pts[None, :]) ** 2) / (2.0 * st**2), axis=-1)
    return np.exp(log_pref - (y / h) ** 2 / (2.0 * (spec.sigma_s**2 + sigma**2 / h**2)) + body)


def _partition_mi(spec, dist, sigma, parent_of, child_of, npanels=15, order=16):
    """I(Y,H ; child | parent) for y = h*a + noise, a ~ the constellation.

    parent_of/child_of label each support point; children refine parents.
    Outer Gauss-Legendre rule over the gain, inner panels over y sized to
    resolve the noise width.
    """
    pts = spec.points
    pmf = spec.pmf
    hn, hw = gauss_legendre_panels(0.0, dist.h_max(), npanels, order)
    amax = float(np.abs(pts).max())
    children = np.unique(child_of)
    total = 0.0
    for h, wh in zip(hn, hw):
        u = wh * dist.pdf(h)
        if u <= 0.0:
            continue
        ymax = h * amax + TRUNCATION_DEVIATIONS * sigma
        npan = int(np.clip(math.ceil(2.0 * ymax / (0.5 * sigma)), 40, 4000))
        yn, yw = gauss_legendre_panels(-ymax, ymax, npan, 6)
        g = np.exp(-((yn[:, None] - h * pts[None, :]) ** 2) / (2.0 * sigma**2)) / math.sqrt(
            2.0 * math.pi * sigma**2
        )
        mi_h = 0.0
        for ch in children:
            sel = child_of == ch
            p_sel = pmf[sel].sum()
            if p_sel <= 0.0:
                continue
            par = parent_of == parent_of[sel][0]
            p_par = pmf[par].sum()
            num = g[:, sel] @ (pmf[sel] / p_sel)
            den = g[:, par] @ (pmf[par] / p_par)
            m = num > 1e-300
            mi_h += p_sel * float(np.sum(yw[m] * num[m] * np.log(num[m] / den[m]))) / LOG2
        total += u * mi_h
    return total


def level_mutual_information(spec: LatticeGaussianSpec, chain: PartitionChain, ell, dist, sigma, npanels=15, order=16):
    """I(Y,H ; X_ell | X_{1:ell-1}) of the faded shaped constellation, in bits."""
    _check_chain(spec, chain)
    if not 1 <= ell <= chain.r:
        raise ValueError(f"level must lie in [1, {chain.r}]")
    return _partition_mi(
        spec,
        dist,
        sigma,
        _level_residues(spec, ell - 1),
        _level_residues(spec, ell),
        npanels=npanels,
        order=order,
    )


def residue_mutual_information(spec: LatticeGaussianSpec, chain: PartitionChain, depth, dist, sigma, npanels=15, order=16):
    """I(Y,H ; X_{1:depth}) in bits; the chain-rule total of the level MIs."""
    _check_chain(spec, chain)
    if not 1 <= depth <= chain.r:
        raise ValueError(f"depth must lie in [1, {chain.r}]")
    return _partition_mi(
        spec,
        dist,
        sigma,
        np.zeros(len(spec.indices), dtype=np.int64),
        _level_residues(spec, depth),
        npanels=npanels,
        order=order,
    )


# --- symmetrized level channels ----------------------------------------------


class ShapedLevelSlices:
    """quantize_by_llr evaluator for the prior-weighted symmetrized channel.

    One slice per (gain node, context); the conjugate of output (y, v) flips
    v, so the half-domain is the full y-range of the v=0 copy and the pair
    densities carry the conditional bit priors.
    """

    bisect_iters = 20

    def __init__(self, spec: LatticeGaussianSpec, chain: PartitionChain, ell, dist, sigma, npanels=32, order=8):
        _check_chain(spec, chain)
        if sigma <= 0.0:
            raise ValueError("sigma must be positive")
        self.spec = spec
        self.sigma = sigma
        self.spacing = chain.scale(ell - 1)
        nctx = 1 << (ell - 1)
        ctx_of = _level_residues(spec, ell - 1)
        bit_of = (_level_residues(spec, ell) >> (ell - 1)).astype(np.int64)
        self._groups = []
        cmass = np.zeros(nctx)
        np.add.at(cmass, ctx_of, spec.pmf)
        for c in range(nctx):
            sel = ctx_of == c
            if cmass[c] <= 0.0:
                self._groups.append(None)
                continue
            w = spec.pmf[sel] / cmass[c]
            is0 = bit_of[sel] == 0
            self._groups.append((spec.points[sel], np.where(is0, w, 0.0), np.where(is0, 0.0, w)))
        hn, hw = gauss_legendre_panels(0.0, dist.h_max(), npanels, order)
        hw = hw * dist.pdf(hn)
        self._labels = [(h, c) for h in hn for c in range(nctx)]
        self._weights = np.array([u * cmass[c] for u in hw for c in range(nctx)])
        self._amax = float(np.abs(spec.points).max())
        # mixture terms farther than this from an output point are dropped;
        # the truncated tail mass stays below exp(-reach^2 / 2 sigma^2)
        self._reach = (TRUNCATION_DEVIATIONS + 2.0) * sigma

    def outer_nodes(self):
        return self._labels, self._weights

    def half_domain(self, label):
        h, _ = label
        ymax = h * self._amax + TRUNCATION_DEVIATIONS * self.sigma
        return -ymax, ymax

    def scan_scale(self, label):
        h, _ = label
        return min(self.sigma, max(h * self.spacing, 1e-12))

    def pair_density(self, label, t):
        h, c = label
        pts, w0, w1 = self._groups[c]
        t = np.atleast_1d(np.asarray(t, dtype=float))
        centers = h * pts
        npts = len(pts)
        win = npts
        if h * self.spacing > 0.0:
            win = min(npts, int(2.0 * self._reach / (h * self.spacing)) + 2)
        idx = np.clip(np.searchsorted(centers, t - self._reach), 0, npts - win)
        cols = idx[:, None] + np.arange(win)[None, :]
        d = t[:, None] - centers[cols]
        g = np.where(
            np.abs(d) < self._reach, np.exp(-(d * d) / (2.0 * self.sigma**2)), 0.0
        ) / math.sqrt(2.0 * math.pi * self.sigma**2)
        return (g * w0[cols]).sum(axis=1), (g * w1[cols]).sum(axis=1)


def shaped_level_channel(spec: LatticeGaussianSpec, chain: PartitionChain, ell, dist, sigma, params: QuantizerParams, npanels=32, order=8) -> DiscreteBMSC:
    """Quantized symmetrized channel of one shaped level."""
    return quantize_by_llr(ShapedLevelSlices(spec, chain, ell, dist, sigma, npanels, order), params)


def level_source_channel(spec: LatticeGaussianSpec, chain: PartitionChain, ell) -> DiscreteBMSC:
    """Symmetrized source model of one level: context-weighted bit priors.

    Its Bhattacharyya polarization separates the nearly-uniform label bits
    (usable positions) from the nearly-determined ones (shaping positions).
    """
    _check_chain(spec, chain)
    nctx = 1 << (ell - 1)
    ctx_of = _level_residues(spec, ell - 1)
    bit_of = (_level_residues(spec, ell) >> (ell - 1)).astype(np.int64)
    mass = np.zeros((nctx, 2))
    np.add.at(mass, (ctx_of, bit_of), spec.pmf)
    keep = mass.sum(axis=1) > 0.0
    return DiscreteBMSC.create(mass[keep, 0], mass[keep, 1])


def symmetrized_equivalence_gap(spec: LatticeGaussianSpec, chain: PartitionChain, ell, dist, sigma, params: QuantizerParams = None, channel: DiscreteBMSC = None):
    """Compare the symmetrized shaped level against its claimed mod-lattice twin.

    Returns the quantized symmetrized capacity, the capacity of the
    uniform-input partition channel run at the MMSE-equivalent deviation,
    and their gap (mod minus quantized; the quantizer loses at most 1/Q).
    A pre-quantized ``channel`` skips the expensive step.
    """
    params = params or QuantizerParams(Q=128)
    mm = MmseParams(spec.sigma_s, sigma)
    if channel is None:
        channel = shaped_level_channel(spec, chain, ell, dist, sigma, params)
    c_sym = channel.capacity()
    lc = LevelFadingChannel(chain, ell, sigma, dist, noise_fn=mm.sigma_tilde)
    c_mod = level_capacity(lc)
    return {"c_symmetrized": c_sym, "c_mod": c_mod, "gap": c_mod - c_sym}


# --- shaped construction ------------------------------------------------------


@dataclass(frozen=True)
class ShapedLevelCode:
    """Index sets of one shaped level.

    info carries message bits, frozen_random carries shared-random bits
    (both inside the high-entropy set), shaping is sampled from the source
    posterior during encoding.
    """

    m: int
    z_channel: np.ndarray
    z_source: np.ndarray
    info: np.ndarray
    frozen_random: np.ndarray
    shaping: np.ndarray
    delta_source: float

    @property
    def n(self):
        return 1 << self.m

    @property
    def k(self):
        return len(self.info)

    @property
    def rate(self):
        return self.k / self.n

    @property
    def z_sum(self):
        return float(self.z_channel[self.info].sum()) if self.k else 0.0

    def validate(self):
        parts = np.concatenate([self.info, self.frozen_random, self.shaping])
        if len(parts) != self.n or len(np.unique(parts)) != self.n:
            raise ValueError("index sets must partition [0, N)")
        return self


@dataclass(frozen=True)
class ShapedPolarLattice:
    """Multilevel shaped construction over a partition chain."""

    chain: PartitionChain
    gauss: LatticeGaussianSpec
    dist: FadingDistribution
    sigma: float
    levels: tuple
    priors: tuple

    @property
    def n(self):
        return self.levels[0].n

    @property
    def total_rate(self):
        return float(sum(lv.rate for lv in self.levels))

    @property
    def mmse(self):
        return MmseParams(self.gauss.sigma_s, self.sigma)

    @property
    def out_of_voronoi(self):
        return out_of_voronoi_probability(self.gauss.sigma_s, self.chain.bottom_scale, self.gauss.c)


def out_of_voronoi_probability(sigma_s, bottom_scale, c=0.0):
    """Mass the bottom-lattice discrete Gaussian puts outside zero.

    Summed as off-mass over total so values far below machine epsilon
    survive.
    """
    kmax = max(2, math.ceil(TRUNCATION_DEVIATIONS * sigma_s / bottom_scale) + 2)
    k = np.arange(-kmax, kmax + 1)
    w = np.exp(-((k * bottom_scale - c) ** 2) / (2.0 * sigma_s**2))
    center = w[kmax]
    w[kmax] = 0.0
    off = float(w.sum())
    return off / (off + center)


def _usable_positions(z_source, delta_source):
    """High-entropy indices of the polarized source model."""
    return np.nonzero(z_source >= 1.0 - delta_source)[0]


def _shaped_sets(z_channel, hx, k):
    """Split positions into (info, frozen_random, shaping) given |info| = k."""
    n = len(z_channel)
    order = hx[np.lexsort((hx, z_channel[hx]))]
    info = np.sort(order[:k])
    frozen_random = np.sort(order[k:])
    mask = np.zeros(n, dtype=bool)
    mask[hx] = True
    shaping = np.nonzero(~mask)[0]
    return info, frozen_random, shaping


def _budget_counts(z_lists, hx_lists, budget):
    """Greedy Z-budget allocation over the pooled usable positions.

    Levels differ wildly in usable-set size, so the split must come from
    one global sort by reliability, not a per-level quota.
    """
    pool = np.concatenate(
        [np.stack([z[hx], np.full(len(hx), ell, dtype=float)], axis=1) for ell, (z, hx) in enumerate(zip(z_lists, hx_lists))]
    )
    pool = pool[np.argsort(pool[:, 0], kind="stable")]
    csum = np.cumsum(pool[:, 0])
    k = int(np.searchsorted(csum, budget, side="right"))
    return [int(np.sum(pool[:k, 1] == ell)) for ell in range(len(z_lists))]


def build_shaped_lattice(
    chain: PartitionChain,
    gauss: LatticeGaussianSpec,
    dist: FadingDistribution,
    sigma,
    m,
    params: QuantizerParams,
    rates=None,
    budget=None,
    target=None,
    delta_source=1e-2,
    channels=None,
    cache_dir=None,
) -> ShapedPolarLattice:
    """Construct all shaped levels from the polarized channel/source pair.

    Exactly one selection mode: rates gives one target per level; budget is
    a total Z-sum allocated greedily over the pooled usable positions of
    all levels; target is a total block-error bound, i.e. the Z budget left
    after the out-of-Voronoi term. channels may carry precomputed
    symmetrized level channels so N-sweeps quantize only once. Levels are
    independent: usable sets shrink toward the bottom of the chain, so no
    cross-level index structure is imposed.
    """
    _check_chain(gauss, chain)
    if (rates, budget, target).count(None) != 2:
        raise ShapedBuildError("exactly one of rates/budget/target must be given")
    if target is not None:
        slack = target - (1 << m) * out_of_voronoi_probability(gauss.sigma_s, chain.bottom_scale, gauss.c)
        if slack <= 0.0:
            raise ShapedBuildError(
                f"target {target!r} is below the out-of-Voronoi floor at N={1 << m}"
            )
        budget = slack
    if rates is not None and len(rates) != chain.r:
        raise ShapedBuildError(f"need {chain.r} level rates")
    if channels is not None and len(channels) != chain.r:
        raise ShapedBuildError(f"need {chain.r} precomputed level channels")
    priors = level_bit_priors(gauss, chain)
    z_lists, zsrc_lists, hx_lists = [], [], []
    for ell in range(1, chain.r + 1):
        w = channels[ell - 1] if channels is not None else shaped_level_channel(
            gauss, chain, ell, dist, sigma, params
        )
        z_chan = construct_cached(w, m, params.mu, cache_dir=cache_dir)
        z_src = construct_cached(level_source_channel(gauss, chain, ell), m, params.mu, cache_dir=cache_dir)
        z_lists.append(z_chan)
        zsrc_lists.append(z_src)
        hx_lists.append(_usable_positions(z_src, delta_source))
    if rates is not None:
        counts = [int(np.floor(r * (1 << m))) for r in rates]
        for ell, (k, hx) in enumerate(zip(counts, hx_lists)):
            if k > len(hx):
                raise ShapedBuildError(
                    f"level {ell + 1} rate needs {k} usable positions; high-entropy set has {len(hx)}"
                )
    else:
        counts = _budget_counts(z_lists, hx_lists, budget)
    levels = []
    for ell in range(1, chain.r + 1):
        info, frozen_random, shaping = _shaped_sets(z_lists[ell - 1], hx_lists[ell - 1], counts[ell - 1])
        levels.append(
            ShapedLevelCode(
                m=m,
                z_channel=z_lists[ell - 1],
                z_source=zsrc_lists[ell - 1],
                info=info,
                frozen_random=frozen_random,
                shaping=shaping,
                delta_source=delta_source,
            ).validate()
        )
        log.info(
            "shaped level %d: rate %.4f, z_sum %.3e, |H_X| %d",
            ell,
            levels[-1].rate,
            levels[-1].z_sum,
            len(hx_lists[ell - 1]),
        )
    return ShapedPolarLattice(
        chain=chain,
        gauss=gauss,
        dist=dist,
        sigma=float(sigma),
        levels=tuple(levels),
        priors=priors,
    )


# --- shaped encoding / decoding ----------------------------------------------


@dataclass(frozen=True)
class ShapedFrame:
    x: np.ndarray  # (B, N) transmitted lattice points
    residues: np.ndarray  # (B, N) label residues modulo 2**r
    level_u: tuple  # per level, (B, N) polar-domain bits


@dataclass(frozen=True)
class ShapedDecodeResult:
    level_bits: tuple  # per level, (B, k_ell) recovered message bits
    residues: np.ndarray  # (B, N) recovered label residues


def _shared_draws(S: ShapedPolarLattice, seed, frame0, B, with_residual):
    """Per-frame shared randomness, in a fixed draw order.

    Per level: frozen bits then shaping uniforms; the residual-point
    uniforms come last so the decoder can skip them.
    """
    frozen = [np.empty((B, len(lv.frozen_random)), dtype=np.uint8) for lv in S.levels]
    uniforms = [np.empty((B, len(lv.shaping))) for lv in S.levels]
    resid = np.empty((B, S.n)) if with_residual else None
    for j in range(B):
        rng = trial_rng(seed, frame0 + j)
        for ell, lv in enumerate(S.levels):
            frozen[ell][j] = rng.integers(0, 2, size=len(lv.frozen_random), dtype=np.uint8)
            uniforms[ell][j] = rng.random(len(lv.shaping))
        if with_residual:
            resid[j] = rng.random(S.n)
    return frozen, uniforms, resid


def _position_maps(lv: ShapedLevelCode):
    kind = np.empty(lv.n, dtype=np.int8)  # 0 info, 1 frozen_random, 2 shaping
    rank = np.empty(lv.n, dtype=np.int64)
    kind[lv.info] = 0
    rank[lv.info] = np.arange(lv.k)
    kind[lv.frozen_random] = 1
    rank[lv.frozen_random] = np.arange(len(lv.frozen_random))
    kind[lv.shaping] = 2
    rank[lv.shaping] = np.arange(len(lv.shaping))
    return kind, rank


def _prior_llrs(prior, ctx):
    with np.errstate(divide="ignore"):
        table = np.log(prior[:, 0]) - np.log(prior[:, 1])
    table = np.clip(np.nan_to_num(table, nan=0.0, posinf=LLR_CLIP, neginf=-LLR_CLIP), -LLR_CLIP, LLR_CLIP)
    return table[ctx]


def _residue_tables(spec: LatticeGaussianSpec, r):
    tables = []
    res_of = _level_residues(spec, r)
    for res in range(1 << r):
        sel = res_of == res
        mass = spec.pmf[sel].sum()
        if mass <= 0.0:
            tables.append(None)
            continue
        cdf = np.cumsum(spec.pmf[sel]) / mass
        tables.append((spec.points[sel], cdf))
    return tables


def shaped_encode(S: ShapedPolarLattice, level_bits, seed, frame0=0) -> ShapedFrame:
    """Map message bits to lattice points with the shaped distribution.

    level_bits: per level, (k_ell,) or (B, k_ell) message bits. Frozen bits
    and shaping-roundoff uniforms come from the shared (seed, frame)
    streams; the residual point within the bottom coset is drawn from the
    same stream's tail.
    """
    if len(level_bits) != S.chain.r:
        raise ValueError(f"need bits for {S.chain.r} levels")
    bits = [np.atleast_2d(np.asarray(b, dtype=np.uint8)) for b in level_bits]
    B = bits[0].shape[0]
    for lv, b in zip(S.levels, bits):
        if b.shape != (B, lv.k):
            raise ValueError("message bit shape mismatch")
    frozen, uniforms, resid = _shared_draws(S, seed, frame0, B, with_residual=True)
    residues = np.zeros((B, S.n), dtype=np.int64)
    level_u = []
    for ell, lv in enumerate(S.levels):
        kind, rank = _position_maps(lv)
        llrs = _prior_llrs(S.priors[ell], residues)

        def decide(i, col, _ell=ell, _kind=kind, _rank=rank, _bits=bits):
            if _kind[i] == 0:
                return _bits[_ell][:, _rank[i]]
            if _kind[i] == 1:
                return frozen[_ell][:, _rank[i]]
            p1 = expit(-col)
            return (uniforms[_ell][:, _rank[i]] < p1).astype(np.uint8)

        u = np.atleast_2d(sc_process(llrs, decide))
        level_u.append(u)
        residues += polar_transform(u).astype(np.int64) << ell
    x = np.empty((B, S.n))
    tables = _residue_tables(S.gauss, S.chain.r)
    for res in range(1 << S.chain.r):
        sel = residues == res
        if not np.any(sel):
            continue
        if tables[res] is None:
            raise ShapedBuildError(f"reached residue class {res} of zero mass")
        pts, cdf = tables[res]
        idx = np.minimum(np.searchsorted(cdf, resid[sel], side="right"), len(pts) - 1)
        x[sel] = pts[idx]
    return ShapedFrame(x=x, residues=residues, level_u=tuple(level_u))


def _coset_points(spec: LatticeGaussianSpec, ell):
    """Support points of each residue class modulo 2**ell."""
    res_of = _level_residues(spec, ell)
    return [spec.points[res_of == res] for res in range(1 << ell)]


def _shaped_level_llrs(S: ShapedPolarLattice, ell, w, st, ctx):
    """Prior-weighted channel LLRs of level ell at the MMSE-scaled outputs.

    The MMSE rescaling absorbs the coset priors, leaving a plain theta
    ratio. w, st, ctx: (B, N) scaled observations, equivalent deviations,
    contexts. st may be zero (noiseless); ties resolve to LLR 0.
    """
    cosets = _coset_points(S.gauss, ell)
    nctx = 1 << (ell - 1)
    half = nctx
    llr = np.zeros(w.shape)
    noiseless = st == 0.0
    for c in range(nctx):
        mask = ctx == c
        if not np.any(mask):
            continue
        terms = []
        for b in (0, 1):
            pts = cosets[c + b * half]
            if len(pts) == 0:
                terms.append(np.full(int(mask.sum()), -np.inf))
                continue
            d2 = (w[mask][:, None] - pts[None, :]) ** 2
            with np.errstate(divide="ignore", invalid="ignore"):
                val = logsumexp(-d2 / (2.0 * st[mask][:, None] ** 2), axis=1)
            # zero deviation: the metric degenerates to nearest-point distance
            terms.append(np.where(noiseless[mask], -d2.min(axis=1), val))
        raw = terms[0] - terms[1]
        raw = np.nan_to_num(raw, nan=0.0, posinf=LLR_CLIP, neginf=-LLR_CLIP)
        llr[mask] = np.clip(raw, -LLR_CLIP, LLR_CLIP)
    return llr


def shaped_multistage_decode(S: ShapedPolarLattice, y, h, seed, frame0=0, sigma=None) -> ShapedDecodeResult:
    """Recover message bits from MMSE-rescaled observations level by level.

    The decoder replays the shared (seed, frame) streams: frozen bits are
    known, shaping bits are re-derived from the source posterior (a second
    SC recursion over prior-only LLRs fed with the same decisions), and
    info bits are maximum-likelihood decisions. sigma overrides the build
    noise level (pass the actual channel deviation when they differ).
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    h = np.atleast_2d(np.asarray(h, dtype=float))
    if y.shape != (y.shape[0], S.n) or h.shape != y.shape:
        raise ValueError("y and h must be (B, N)")
    B = y.shape[0]
    frozen, uniforms, _ = _shared_draws(S, seed, frame0, B, with_residual=False)
    mm = MmseParams(S.gauss.sigma_s, S.sigma if sigma is None else float(sigma))
    w = mm.alpha(h) * y
    st = np.broadcast_to(mm.sigma_tilde(h), w.shape)
    residues = np.zeros((B, S.n), dtype=np.int64)
    out_bits = []
    for ell, lv in enumerate(S.levels):
        kind, rank = _position_maps(lv)
        prior_rows = _prior_llrs(S.priors[ell], residues)
        chan_rows = _shaped_level_llrs(S, ell + 1, w, st, residues)
        stacked = np.concatenate([prior_rows, chan_rows], axis=0)

        def decide(i, col, _ell=ell, _kind=kind, _rank=rank):
            if _kind[i] == 1:
                bits = frozen[_ell][:, _rank[i]]
            elif _kind[i] == 0:
                bits = (col[B:] < 0.0).astype(np.uint8)
            else:
                p1 = expit(-col[:B])
                bits = (uniforms[_ell][:, _rank[i]] < p1).astype(np.uint8)
            return np.concatenate([bits, bits])

        u = np.atleast_2d(sc_process(stacked, decide))[:B]
        out_bits.append(u[:, lv.info])
        residues += polar_transform(u).astype(np.int64) << ell
    return ShapedDecodeResult(level_bits=tuple(out_bits), residues=residues)


# --- bounds and reports --------------------------------------------------------


@dataclass(frozen=True)
class ShapedBoundReport:
    z_sum: float
    voronoi_term: float

    @property
    def total(self):
        return self.z_sum + self.voronoi_term


def shaped_union_bound(S: ShapedPolarLattice) -> ShapedBoundReport:
    """Block-error bound: info-set Z-sums plus the out-of-Voronoi term."""
    return ShapedBoundReport(
        z_sum=float(sum(lv.z_sum for lv in S.levels)),
        voronoi_term=S.n * S.out_of_voronoi,
    )


def shaped_rate_for_bound(levels, n, p_ov, target):
    """Largest total rate whose greedy Z-allocation keeps the bound at target.

    Pools the usable (high-entropy) positions of all levels, sorted by Z.
    Returns (rate, per-level bit counts).
    """
    slack = target - n * p_ov
    if slack <= 0.0:
        return 0.0, [0] * len(levels)
    pool = []
    for ell, lv in enumerate(levels):
        usable = np.concatenate([lv.info, lv.frozen_random])
        pool.append(np.stack([lv.z_channel[usable], np.full(len(usable), ell, dtype=float)], axis=1))
    pool = np.concatenate(pool, axis=0)
    pool = pool[np.argsort(pool[:, 0], kind="stable")]
    csum = np.cumsum(pool[:, 0])
    k = int(np.searchsorted(csum, slack, side="right"))
    counts = [int(np.sum(pool[:k, 1] == ell)) for ell in range(len(levels))]
    return k / n, counts


@dataclass(frozen=True)
class MiBoundReport:
    bound: object  # float, or None when the hypothesis fails
    ergodic: float
    tail_term: float
    flatness_term: float
    epsilon: float
    epsilon_t: dict  # t -> (eps_t, condition ok)
    hypothesis_ok: bool


def mi_lower_bound(spec: LatticeGaussianSpec, dist: FadingDistribution, sigma, h_l, n_dim=1) -> MiBoundReport:
    """Ergodic-capacity lower bound of the shaped constellation, in bits.

    The flatness factor is taken at the MMSE deviation of the largest
    trusted gain h_l (its worst case over smaller gains), the truncated-gain
    tail uses the closed Rayleigh form, and both t-branches of the
    smoothing condition are reported. A failed hypothesis yields bound None.
    """
    if dist.kind != RAYLEIGH:
        raise ValueError("bound evaluated for Rayleigh gain laws only")
    if h_l <= 0.0 or sigma <= 0.0:
        raise ValueError("h_l and sigma must be positive")
    mm = MmseParams(spec.sigma_s, sigma)
    eps = flatness_factor(spec.scale, float(mm.sigma_tilde(h_l)))
    eps_t = {}
    any_ok = False
    for t in (1.0, 0.25):
        e = flatness_factor(spec.scale, spec.sigma_s * math.sqrt((math.pi - t) / math.pi))
        if t < 1.0 / math.e:
            e *= t**-4 + 1.0
        ok = e < 1.0 and math.pi * e / (1.0 - e) <= eps
        eps_t[t] = (e, ok)
        any_ok = any_ok or ok
    hypothesis_ok = eps < 0.5 and any_ok
    ergodic = ergodic_capacity_power(dist, sigma, spec.power)
    x = h_l**2 / (2.0 * dist.sigma_h**2)
    tail = 0.5 * (h_l**2 / dist.sigma_h**2 + 2.0) * (spec.power * dist.sigma_h**2 / sigma**2) * math.exp(-x)
    # the truncation and flatness penalties are per-nat; convert to bits
    tail_bits = tail / LOG2
    flat_bits = 5.0 * eps / n_dim / LOG2
    bound = ergodic - tail_bits - flat_bits if hypothesis_ok else None
    return MiBoundReport(
        bound=bound,
        ergodic=ergodic,
        tail_term=tail_bits,
        flatness_term=flat_bits,
        epsilon=eps,
        epsilon_t=eps_t,
        hypothesis_ok=hypothesis_ok,
    )


def empirical_power(S: ShapedPolarLattice, frames, seed):
    """Mean squared transmitted symbol over seeded random-message frames."""
    rng = np.random.default_rng([seed, 101])
    bits = [rng.integers(0, 2, size=(frames, lv.k), dtype=np.uint8) for lv in S.levels]
    return float(np.mean(shaped_encode(S, bits, seed).x ** 2))


SHAPED_LEVEL_CSV_COLUMNS = ["level", "rate", "z_sum", "usable_fraction"]
SHAPED_CSV_COLUMNS = ["N", "R", "z_sum", "voronoi_term", "bound"]


def shaped_report(S: ShapedPolarLattice):
    """Per-level and total CSV rows (column lists above)."""
    level_rows = [
        [ell + 1, lv.rate, lv.z_sum, (lv.k + len(lv.frozen_random)) / lv.n]
        for ell, lv in enumerate(S.levels)
    ]
    bound = shaped_union_bound(S)
    total_row = [S.n, S.total_rate, bound.z_sum, bound.voronoi_term, bound.total]
    return level_rows, total_row
