"""Reduction of continuous-output symmetric channels to finite alphabets by
binning outputs on the per-output capacity coordinate and merging."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .bmsc import DiscreteBMSC, degrading_merge
from .fading import FadingChannelSpec, CSI
from .numerics import (
    NumericalAccuracyError,
    binary_entropy,
    gauss_legendre_segments,
    inv_binary_entropy,
)

MASS_CONTRACT_TOL = 1e-9


@dataclass(frozen=True)
class QuantizerParams:
    """Q capacity bins; mu caps the post-merge alphabet (default 2Q)."""

    Q: int
    mu: int | None = None

    def __post_init__(self):
        if self.Q < 1:
            raise ValueError("Q must be >= 1")
        if self.mu is None:
            object.__setattr__(self, "mu", 2 * self.Q)
        if self.mu < 2:
            raise ValueError("mu must be >= 2")


def bin_boundaries(Q, sigma):
    """Boundaries of the capacity bins in the t = y*h coordinate.

    d[j] = (sigma^2/2) * ln(1/h2inv(1 - j/Q) - 1); d[0] = 0, d[Q] = inf.
    """
    d = np.empty(Q + 1)
    d[0] = 0.0
    d[Q] = math.inf
    for j in range(1, Q):
        p = inv_binary_entropy(1.0 - j / Q)
        d[j] = 0.5 * sigma**2 * math.log(1.0 / p - 1.0)
    return d


def quantize_fading_bpsk(ch: FadingChannelSpec, params: QuantizerParams) -> DiscreteBMSC:
    """Capacity-binned quantization of the CSI fading BPSK channel.

    Per gain h the bin regions are y-intervals, so the inner integral is a
    Gaussian CDF difference; the outer gain integral is adaptive.
    """
    if ch.csi != CSI:
        raise ValueError("closed-form route needs receiver CSI")
    if ch.sigma == 0.0:
        raise ValueError("quantization needs sigma > 0")
    Q = params.Q
    d = bin_boundaries(Q, ch.sigma)
    hmax = ch.dist.h_max()
    sig = ch.sigma

    def mass(i, x):
        a, b = d[i - 1], d[i]

        def f(h):
            zb = 1.0 if b == math.inf else special.ndtr((b / h - x * h) / sig)
            za = special.ndtr((a / h - x * h) / sig)
            return ch.dist.pdf(h) * (zb - za)

        val, _ = integrate.quad(f, 0.0, hmax, epsabs=1e-15, epsrel=1e-9, limit=300)
        return val

    w0 = np.array([mass(i, +1) for i in range(1, Q + 1)])
    w1 = np.array([mass(i, -1) for i in range(1, Q + 1)])
    total = w0.sum() + w1.sum()
    if abs(total - 1.0) > 1e-6:
        raise NumericalAccuracyError(f"bin masses sum to {total!r}")
    w0 /= total
    w1 /= total
    return degrading_merge(DiscreteBMSC.create(w0, w1), params.mu)


# --- generic engine ----------------------------------------------------------
#
# An evaluator presents a symmetric channel as weighted 1-D slices:
#   outer_nodes() -> (sequence of slice labels, weight array summing to 1)
#   half_domain(label) -> (lo, hi): a half of the slice's output space with
#       one point per conjugate pair
#   pair_density(label, t) -> (p0, p1) vectorized conditional densities
#   scan_scale(label) -> smoothness length used to pick scan resolution
#
# The slice masses of capacity-bin i are then
#   w0_i = sum_slices weight * int_{bin i} max(p0, p1) dt
#   w1_i = sum_slices weight * int_{bin i} min(p0, p1) dt
# which is exact because orienting each conjugate pair by max/min is the
# canonical representative choice, and the bin coordinate C[LR] is invariant
# under LR <-> 1/LR.

_OVERSAMPLE = 16
_GL_ORDER = 16
_PANEL_FACTOR = 1.5


def _cap_coord(p0, p1):
    """C[LR] in [0,1]: 1 - H2 of the pair's crossover. Dead points -> 1."""
    s = p0 + p1
    with np.errstate(invalid="ignore", divide="ignore"):
        p = np.where(s > 0.0, np.minimum(p0, p1) / np.where(s > 0.0, s, 1.0), 0.0)
    return 1.0 - binary_entropy(p)


def _bisect_many(fun, tlo, thi, flo_sign, iters=60):
    """Vectorized bisection: fun crosses 0 in each (tlo, thi)."""
    for _ in range(iters):
        mid = 0.5 * (tlo + thi)
        fm = fun(mid)
        left = (fm > 0.0) == flo_sign
        tlo = np.where(left, mid, tlo)
        thi = np.where(left, thi, mid)
    return 0.5 * (tlo + thi)


def quantize_by_llr(slices, params: QuantizerParams) -> DiscreteBMSC:
    Q = params.Q
    W0 = np.zeros(Q)
    W1 = np.zeros(Q)
    # evaluators with many capacity crossings per slice may relax the root
    # refinement; misplacement stays below one scan step times 2^-iters
    iters = getattr(slices, "bisect_iters", 60)
    labels, weights = slices.outer_nodes()
    for label, u in zip(labels, weights):
        if u == 0.0:
            continue
        lo, hi = slices.half_domain(label)
        scale = slices.scan_scale(label)
        nscan = int(np.clip(math.ceil((hi - lo) / scale * _OVERSAMPLE), 256, 400_000))
        ts = np.linspace(lo, hi, nscan + 1)
        p0, p1 = slices.pair_density(label, ts)
        g = _cap_coord(p0, p1)

        def g_at(t, _label=label):
            q0, q1 = slices.pair_density(_label, t)
            return _cap_coord(q0, q1)

        breaks = [np.array([lo, hi])]
        # LR=1 kinks (max/min swap) become segment boundaries
        diff = p0 - p1
        sw = np.nonzero(np.sign(diff[:-1]) * np.sign(diff[1:]) < 0)[0]
        if len(sw):
            kinks = _bisect_many(
                lambda t: slices.pair_density(label, t)[0] - slices.pair_density(label, t)[1],
                ts[sw],
                ts[sw + 1],
                diff[sw] > 0.0,
                iters=iters,
            )
            breaks.append(kinks)
        # capacity-boundary crossings; a cell may cross several levels
        b = np.minimum(np.floor(g * Q).astype(np.int64), Q - 1)
        jump = np.nonzero(b[:-1] != b[1:])[0]
        if len(jump):
            cell_lo, cell_hi, lev = [], [], []
            for j in jump:
                lo_b, hi_b = (b[j], b[j + 1]) if b[j] < b[j + 1] else (b[j + 1], b[j])
                for level in range(lo_b + 1, hi_b + 1):
                    cell_lo.append(ts[j])
                    cell_hi.append(ts[j + 1])
                    lev.append(level / Q)
            cell_lo = np.array(cell_lo)
            cell_hi = np.array(cell_hi)
            lev = np.array(lev)
            sign_lo = g_at(cell_lo) - lev > 0.0
            roots = _bisect_many(lambda t: g_at(t) - lev, cell_lo, cell_hi, sign_lo, iters=iters)
            breaks.append(roots)
        pts = np.unique(np.concatenate(breaks))
        pts = pts[(pts >= lo) & (pts <= hi)]
        # split long flat stretches so the per-segment rule stays accurate
        seg_lo, seg_hi = pts[:-1], pts[1:]
        width = seg_hi - seg_lo
        pieces = np.maximum(1, np.ceil(width / (_PANEL_FACTOR * scale)).astype(np.int64))
        starts = np.repeat(seg_lo, pieces)
        steps = np.repeat(width / pieces, pieces)
        offs = np.concatenate([np.arange(c) for c in pieces]) if len(pieces) else np.empty(0)
        sub_lo = starts + offs * steps
        sub_hi = sub_lo + steps
        if len(sub_lo) == 0:
            continue
        nodes, wts = gauss_legendre_segments(np.stack([sub_lo, sub_hi], axis=1), _GL_ORDER)
        q0, q1 = slices.pair_density(label, nodes.ravel())
        q0 = q0.reshape(nodes.shape)
        q1 = q1.reshape(nodes.shape)
        mid = 0.5 * (sub_lo + sub_hi)
        gm = g_at(mid)
        bins = np.minimum(np.floor(gm * Q).astype(np.int64), Q - 1)
        m0 = (np.maximum(q0, q1) * wts).sum(axis=1)
        m1 = (np.minimum(q0, q1) * wts).sum(axis=1)
        W0 += u * np.bincount(bins, weights=m0, minlength=Q)
        W1 += u * np.bincount(bins, weights=m1, minlength=Q)
    total = W0.sum() + W1.sum()
    if abs(total - 1.0) > MASS_CONTRACT_TOL:
        raise NumericalAccuracyError(
            f"slice masses sum to {total!r}; symmetry/normalization contract violated"
        )
    W0 /= total
    W1 /= total
    return degrading_merge(DiscreteBMSC.create(W0, W1), params.mu)
