"""Nested per-level polar codes assembled over a binary partition chain:
build, lattice-point encoding, multistage decoding, the two-part union bound,
and the volume-to-noise-ratio gap report."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .codec import LLR_CLIP, sc_decode, polar_transform, trial_rng
from .construction import PolarCodeSpec, construct, enforce_nesting, select_frozen
from .fading import RAYLEIGH, FadingDistribution
from .numerics import (
    EULER_GAMMA,
    LOG2,
    NumericalAccuracyError,
    wilson_interval,
    wrapped_gaussian_entropy,
    wrapped_gaussian_logpdf,
)
from .partitions import (
    LevelChannelSlices,
    LevelFadingChannel,
    PartitionChain,
    level_capacity,
    mod_capacity,
    uncoded_error_expectation,
)
from .quantize import QuantizerParams, quantize_by_llr

_log = logging.getLogger(__name__)


class LatticeBuildError(ValueError):
    """A level's selected rate is not achievable for its channel."""


@dataclass(frozen=True)
class PolarLattice:
    """r nested polar codes, one per binary partition level.

    specs are ordered from the top partition step (weakest channel) to the
    bottom one; nesting means each info set is contained in the next level's.
    capacities are the per-level true channel capacities used for the rate
    gap; nesting_corrections counts indices the nesting pass had to freeze.
    """

    chain: PartitionChain
    dist: FadingDistribution
    sigma: float
    specs: tuple
    capacities: tuple
    nesting_corrections: int = 0

    @property
    def n(self):
        return self.specs[0].n

    @property
    def rates(self):
        return tuple(sp.rate for sp in self.specs)

    @property
    def total_rate(self):
        return float(sum(self.rates))

    @property
    def eps3(self):
        """Total per-level capacity-minus-rate gap; nonnegative by build."""
        return float(sum(c - sp.rate for c, sp in zip(self.capacities, self.specs)))

    def log_volume_bits(self):
        """log2 of the lattice volume: N * (log2 bottom spacing - sum rate)."""
        return self.n * (math.log2(self.chain.bottom_scale) - self.total_rate)


def build_lattice(
    chain: PartitionChain,
    dist: FadingDistribution,
    sigma,
    m,
    mu,
    rates=None,
    budget=None,
    beta=None,
    capacity_tol=1e-3,
    **construct_kwargs,
) -> PolarLattice:
    """Quantizes each level channel, constructs and selects each code, then
    enforces nesting by intersection.

    Exactly one of rates (sequence, one per level) / budget (total Z-sum
    budget, split evenly across levels) must be given. A level whose selected
    rate exceeds its channel capacity is a build error.
    """
    if (rates is None) == (budget is None):
        raise ValueError("exactly one of rates/budget must be given")
    if rates is not None and len(rates) != chain.r:
        raise ValueError(f"need {chain.r} per-level rates")
    params = QuantizerParams(Q=max(mu // 2, 1), mu=mu)
    specs = []
    capacities = []
    for ell in range(1, chain.r + 1):
        lc = LevelFadingChannel(chain, ell, sigma, dist)
        w = quantize_by_llr(LevelChannelSlices(lc), params)
        z = construct(w, m, mu, **construct_kwargs)
        if rates is not None:
            sp = select_frozen(z, rate=rates[ell - 1], beta=beta)
        else:
            sp = select_frozen(z, budget=budget / chain.r, beta=beta)
        cap = level_capacity(lc)
        if sp.rate > cap + capacity_tol:
            raise LatticeBuildError(
                f"level {ell}: selected rate {sp.rate!r} exceeds channel capacity {cap!r}"
            )
        specs.append(sp)
        capacities.append(cap)
    specs, corrections = enforce_nesting(specs)
    return PolarLattice(
        chain=chain,
        dist=dist,
        sigma=sigma,
        specs=tuple(specs),
        capacities=tuple(capacities),
        nesting_corrections=corrections,
    )


def encode_lattice(L: PolarLattice, level_bits, z):
    """Lattice point x = top_scale * (sum_l 2^(l-1) c_l + 2^r z).

    level_bits: one info-bit array per level, each (..., k_l); z: integer
    array (..., N). All leading shapes must broadcast.
    """
    if len(level_bits) != L.chain.r:
        raise ValueError(f"need {L.chain.r} per-level bit arrays")
    z = np.asarray(z)
    if z.shape[-1] != L.n:
        raise ValueError("integer part length mismatch")
    acc = L.chain.bottom_scale * z.astype(np.float64)
    for ell, (sp, bits) in enumerate(zip(L.specs, level_bits), start=1):
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.shape[-1] != sp.k:
            raise ValueError(f"level {ell}: expected {sp.k} info bits, got {bits.shape[-1]}")
        u = np.zeros(bits.shape[:-1] + (sp.n,), dtype=np.uint8)
        u[..., sp.info] = bits
        c = polar_transform(u)
        acc = acc + L.chain.scale(ell - 1) * c
    return acc


@dataclass(frozen=True)
class MultistageDecodeResult:
    levels: tuple  # per-level info-bit arrays
    z: np.ndarray  # integer part estimate
    x: np.ndarray  # reconstructed lattice point


def _coset_llrs(t, s, v, d):
    """log f(t)/f(t-d) for the wrapped density, elementwise noise s."""
    if np.all(s == 0.0):
        # noiseless limit: sign by nearest coset, ties to zero
        tm = np.mod(t, v)
        r0 = np.minimum(tm, v - tm)
        t1 = np.mod(t - d, v)
        r1 = np.minimum(t1, v - t1)
        return np.where(r0 < r1, LLR_CLIP, np.where(r0 > r1, -LLR_CLIP, 0.0))
    raw = wrapped_gaussian_logpdf(t, s, v) - wrapped_gaussian_logpdf(t - d, s, v)
    return np.clip(raw, -LLR_CLIP, LLR_CLIP)


def multistage_decode(L: PolarLattice, y, h) -> MultistageDecodeResult:
    """Per-level SC decoding of the rescaled signal, peeling decoded cosets,
    then rounding the residue to the bottom lattice.

    Accepts (N,) or (batch, N) inputs; the gain vector h must be known to the
    receiver.
    """
    y = np.asarray(y, dtype=float)
    h = np.asarray(h, dtype=float)
    single = y.ndim == 1
    y = np.atleast_2d(y)
    h = np.atleast_2d(h)
    if y.shape != h.shape or y.shape[1] != L.n:
        raise ValueError("y/h shape mismatch")
    ytil = y / h
    s = (L.sigma / h) if L.sigma > 0.0 else np.zeros_like(h)
    acc = np.zeros_like(ytil)
    levels = []
    for ell, sp in enumerate(L.specs, start=1):
        v = L.chain.scale(ell)
        d = L.chain.scale(ell - 1)
        llrs = _coset_llrs(ytil - acc, s, v, d)
        u_hat = sc_decode(sp, llrs)
        c = polar_transform(u_hat)
        acc = acc + d * c
        levels.append(u_hat[:, sp.info])
    z_hat = np.rint((ytil - acc) / L.chain.bottom_scale).astype(np.int64)
    x_hat = acc + L.chain.bottom_scale * z_hat
    if single:
        return MultistageDecodeResult(
            levels=tuple(lv[0] for lv in levels), z=z_hat[0], x=x_hat[0]
        )
    return MultistageDecodeResult(levels=tuple(levels), z=z_hat, x=x_hat)


@dataclass(frozen=True)
class UnionBoundReport:
    z_sum: float
    uncoded: float

    @property
    def total(self):
        return self.z_sum + self.uncoded


def union_bound(L: PolarLattice) -> UnionBoundReport:
    """Block-error bound: info-set Z-sums over all levels plus N times the
    expected bottom-lattice nearest-point error."""
    z_sum = float(sum(sp.union_bound for sp in L.specs))
    unc = L.n * uncoded_error_expectation(L.chain.bottom_scale, L.dist, L.sigma)
    return UnionBoundReport(z_sum=z_sum, uncoded=unc)


@dataclass(frozen=True)
class VnrReport:
    gap_bits: float
    eps1: float
    eps2: float
    eps3: float

    @property
    def bound(self):
        return 2.0 * (self.eps1 + self.eps3)


def _awgn_entropy_expect(dist: FadingDistribution, sigma):
    # E_h[h(sigma^2/h^2)] in bits; for the Rayleigh law E[ln h^2] has the
    # closed form ln(2 sigma_h^2) - EULER_GAMMA
    return 0.5 * math.log2(
        2.0 * math.pi * math.e * sigma**2 * math.exp(EULER_GAMMA) / (2.0 * dist.sigma_h**2)
    )


def vnr_gap(L: PolarLattice, tol=1e-6) -> VnrReport:
    """Logarithmic VNR gap to the fading Poltyrev limit, with its exact
    decomposition 2*(eps1 - eps2 + eps3) cross-checked."""
    if L.dist.kind != RAYLEIGH:
        raise ValueError("the VNR normalization uses the Rayleigh gain law")
    if L.sigma <= 0.0:
        raise ValueError("sigma must be positive")
    v_bot = L.chain.bottom_scale
    gap = (
        -2.0 * L.total_rate
        + 2.0 * math.log2(v_bot)
        - 2.0 * _awgn_entropy_expect(L.dist, L.sigma)
    )
    eps1 = mod_capacity(L.chain.top_scale, L.dist, L.sigma)

    def integrand(h):
        return L.dist.pdf(h) * wrapped_gaussian_entropy(L.sigma / h, v_bot)

    bottom_entropy, _ = integrate.quad(
        integrand, 0.0, L.dist.h_max(), epsabs=1e-11, epsrel=1e-10, limit=400
    )
    eps2 = _awgn_entropy_expect(L.dist, L.sigma) - bottom_entropy
    eps3 = L.eps3
    if eps2 < -1e-9:
        raise NumericalAccuracyError(f"eps2 = {eps2!r} is negative")
    ident = 2.0 * (eps1 - eps2 + eps3)
    if abs(gap - ident) > tol:
        raise NumericalAccuracyError(
            f"VNR identity violated: gap {gap!r} vs decomposition {ident!r}"
        )
    return VnrReport(gap_bits=gap, eps1=eps1, eps2=eps2, eps3=eps3)


def draw_gains(dist: FadingDistribution, rng, n):
    """Inverse-CDF Rayleigh / two-component Rician gains from a trial stream."""
    if dist.kind == RAYLEIGH:
        return dist.sigma_h * np.sqrt(-2.0 * np.log1p(-rng.random(n)))
    return np.hypot(
        dist.s + dist.sigma_h * rng.standard_normal(n),
        dist.sigma_h * rng.standard_normal(n),
    )


def simulate_lattice(L: PolarLattice, trials, seed, zspan=2, batch=64):
    """Monte Carlo multistage decoding; deterministic in (seed, trial).

    Per trial the draw order is gains, noise, level bits (top to bottom),
    then the integer part uniform on [-zspan, zspan]. A frame errs when the
    reconstructed lattice point differs anywhere from the transmitted one;
    level_frame_errors counts frames whose first error is at each level.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    n = L.n
    ks = [sp.k for sp in L.specs]
    frame_errors = 0
    integer_frame_errors = 0
    level_frame_errors = np.zeros(L.chain.r, dtype=np.int64)
    done = 0
    while done < trials:
        b = min(batch, trials - done)
        hs = np.empty((b, n))
        zs = np.empty((b, n))
        bits = [np.empty((b, k), dtype=np.uint8) for k in ks]
        ints = np.empty((b, n), dtype=np.int64)
        for j in range(b):
            rng = trial_rng(seed, done + j)
            hs[j] = draw_gains(L.dist, rng, n)
            zs[j] = rng.standard_normal(n)
            for ell in range(L.chain.r):
                bits[ell][j] = rng.integers(0, 2, size=ks[ell], dtype=np.uint8)
            ints[j] = rng.integers(-zspan, zspan + 1, size=n)
        x = encode_lattice(L, bits, ints)
        y = hs * x + L.sigma * zs
        res = multistage_decode(L, y, hs)
        bad = np.any(res.x != x, axis=1)
        frame_errors += int(bad.sum())
        pending = bad.copy()
        for ell in range(L.chain.r):
            lvl_bad = pending & np.any(res.levels[ell] != bits[ell], axis=1)
            level_frame_errors[ell] += int(lvl_bad.sum())
            pending &= ~lvl_bad
        integer_frame_errors += int(pending.sum())
        done += b
    fer = frame_errors / trials
    lo, hi = wilson_interval(frame_errors, trials)
    return {
        "N": n,
        "r": L.chain.r,
        "R_C": L.total_rate,
        "sigma": L.sigma,
        "trials": trials,
        "frame_errors": frame_errors,
        "fer": fer,
        "fer_lo": lo,
        "fer_hi": hi,
        "level_frame_errors": level_frame_errors.tolist(),
        "integer_frame_errors": integer_frame_errors,
        "seed": seed,
    }


def simulate_level(
    chain: PartitionChain, ell, sigma, dist: FadingDistribution, spec: PolarCodeSpec,
    trials, seed, batch=64,
):
    """FER/BER of one quotient level decoded in isolation.

    Transmits only the level's binary coset component; the wrapped-metric
    LLRs are invariant to everything the level's modulo removes, so this is
    exactly the channel the chain hands to that level's code.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    n = spec.n
    v = chain.scale(ell)
    d = chain.scale(ell - 1)
    frame_errors = 0
    bit_errors = 0
    done = 0
    while done < trials:
        b = min(batch, trials - done)
        hs = np.empty((b, n))
        zs = np.empty((b, n))
        bits = np.empty((b, spec.k), dtype=np.uint8)
        for j in range(b):
            rng = trial_rng(seed, done + j)
            hs[j] = draw_gains(dist, rng, n)
            zs[j] = rng.standard_normal(n)
            bits[j] = rng.integers(0, 2, size=spec.k, dtype=np.uint8)
        u = np.zeros((b, n), dtype=np.uint8)
        u[:, spec.info] = bits
        y = hs * (d * polar_transform(u)) + sigma * zs
        u_hat = sc_decode(spec, _coset_llrs(y / hs, sigma / hs, v, d))
        wrong = u_hat[:, spec.info] != bits
        frame_errors += int(np.any(wrong, axis=1).sum())
        bit_errors += int(wrong.sum())
        done += b
    lo, hi = wilson_interval(frame_errors, trials)
    return {
        "level": ell,
        "N": n,
        "rate": spec.k / n,
        "sigma": sigma,
        "trials": trials,
        "frame_errors": frame_errors,
        "bit_errors": bit_errors,
        "fer": frame_errors / trials,
        "ber": bit_errors / (spec.k * trials) if spec.k else 0.0,
        "fer_lo": lo,
        "fer_hi": hi,
        "seed": seed,
    }


LEVEL_CSV_COLUMNS = ["level", "rate", "capacity", "z_sum"]
LATTICE_CSV_COLUMNS = ["R_C", "vnr_gap_bits", "eps1", "eps2", "eps3", "union_bound"]
LEVEL_SIM_CSV_COLUMNS = [
    "level", "N", "rate", "sigma", "trials", "frame_errors", "bit_errors",
    "fer", "ber", "fer_lo", "fer_hi", "seed",
]


def lattice_report(L: PolarLattice):
    """Per-level and lattice-level CSV rows (column lists above)."""
    level_rows = [
        [ell + 1, sp.rate, cap, sp.union_bound]
        for ell, (sp, cap) in enumerate(zip(L.specs, L.capacities))
    ]
    vnr = vnr_gap(L)
    ub = union_bound(L)
    lattice_row = [L.total_rate, vnr.gap_bits, vnr.eps1, vnr.eps2, vnr.eps3, ub.total]
    return level_rows, lattice_row
