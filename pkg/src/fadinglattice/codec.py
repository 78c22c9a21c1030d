"""Polar encoding, channel LLRs for both CSI modes, successive cancellation
decoding, and the seeded Monte Carlo link simulator."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .construction import PolarCodeSpec
from .fading import CDI, CSI, CdiMarginal, FadingChannelSpec, RAYLEIGH
from .numerics import wilson_interval

# LLR magnitudes are clipped here; large enough that clipping never flips a
# finite-SNR decision, small enough that f/g arithmetic stays NaN-free even
# for infinite inputs
LLR_CLIP = 700.0

ZEROS_FILL = "zeros"


@dataclass(frozen=True)
class CodewordFrame:
    u: np.ndarray  # (..., N) bits
    x: np.ndarray  # (..., N) symbols in {+1, -1}
    frozen_fill: object  # ZEROS_FILL or integer seed


def polar_transform(bits):
    """x = u G_N over GF(2), natural order (no bit reversal); involution."""
    x = np.array(bits, dtype=np.uint8, copy=True)
    n = x.shape[-1]
    if n & (n - 1):
        raise ValueError("length must be a power of two")
    L = n
    while L > 1:
        xv = x.reshape(x.shape[:-1] + (-1, L))
        xv[..., : L // 2] ^= xv[..., L // 2 :]
        L //= 2
    return x


def frozen_values(spec: PolarCodeSpec, frozen_fill=ZEROS_FILL):
    """Bit values forced at frozen positions (zeros or a seed-shared draw)."""
    vals = np.zeros(spec.n, dtype=np.uint8)
    if frozen_fill != ZEROS_FILL:
        seed = int(frozen_fill)
        rng = np.random.Generator(np.random.Philox(key=np.array([seed, 0], dtype=np.uint64)))
        draw = rng.integers(0, 2, size=spec.n, dtype=np.uint8)
        vals[spec.frozen] = draw[spec.frozen]
    return vals


def encode(spec: PolarCodeSpec, info_bits, frozen_fill=ZEROS_FILL) -> CodewordFrame:
    info_bits = np.asarray(info_bits, dtype=np.uint8)
    info = spec.info
    if info_bits.shape[-1] != len(info):
        raise ValueError(f"expected {len(info)} info bits, got {info_bits.shape[-1]}")
    u = np.zeros(info_bits.shape[:-1] + (spec.n,), dtype=np.uint8)
    u[..., spec.frozen] = frozen_values(spec, frozen_fill)[spec.frozen]
    u[..., info] = info_bits
    xb = polar_transform(u)
    return CodewordFrame(u=u, x=(1.0 - 2.0 * xb.astype(np.float64)), frozen_fill=frozen_fill)


def llr_csi(ch: FadingChannelSpec, y, h):
    """Natural-log LR for bit 0 (symbol +1): 2 y h / sigma^2, clipped."""
    y = np.asarray(y, dtype=float)
    h = np.asarray(h, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        raw = 2.0 * y * h / ch.sigma**2
    raw = np.nan_to_num(raw, nan=0.0, posinf=LLR_CLIP, neginf=-LLR_CLIP)
    return np.clip(raw, -LLR_CLIP, LLR_CLIP)


class CdiLlrTable:
    """Cubic-spline table of ln(W(y|+1)/W(y|-1)) for the CDI channel.

    The function is odd in y; the table covers [0, y_max] and is reflected.
    Queries beyond y_max clamp to the boundary value (evaluate() reports
    whether any clamping happened).
    """

    def __init__(self, ch: FadingChannelSpec, npoints=4097, npanels=96, order=12):
        if ch.csi != CDI:
            raise ValueError("LLR table is for the CDI mode")
        marg = CdiMarginal(ch, npanels=npanels, order=order)
        self.y_max = ch.dist.h_max() + 12.0 * ch.sigma
        grid = np.linspace(0.0, self.y_max, npoints)
        vals = marg.log_lr(grid)
        self._spline = CubicSpline(grid, vals)
        self._edge = float(vals[-1])

    def evaluate(self, y):
        y = np.asarray(y, dtype=float)
        ay = np.abs(y)
        saturated = ay > self.y_max
        out = np.where(saturated, self._edge, self._spline(np.minimum(ay, self.y_max)))
        out = np.sign(y) * out
        return np.clip(out, -LLR_CLIP, LLR_CLIP), bool(np.any(saturated))

    def __call__(self, y):
        return self.evaluate(y)[0]


def llr_cdi(table: CdiLlrTable, y):
    return table(y)


def _f_box(a, b):
    # exact LLR combiner ln((1 + e^{a+b}) / (e^a + e^b))
    return np.logaddexp(0.0, a + b) - np.logaddexp(a, b)


def sc_process(channel_llrs, decide):
    """Successive cancellation sweep with a pluggable bit rule.

    decide(i, llr) receives the decision LLR column (batch,) for position i
    and returns the chosen uint8 bits; the sweep feeds its choices back into
    later positions. Accepts (N,) or (batch, N) LLRs; returns u of the same
    leading shape.
    """
    llrs = np.asarray(channel_llrs, dtype=float)
    single = llrs.ndim == 1
    llrs = np.clip(np.atleast_2d(llrs), -LLR_CLIP, LLR_CLIP)
    n = llrs.shape[1]
    if n & (n - 1):
        raise ValueError("LLR length must be a power of two")

    def rec(block, start):
        n = block.shape[1]
        if n == 1:
            u = np.asarray(decide(start, block[:, 0]), dtype=np.uint8)
            return u[:, None], u[:, None]
        half = n // 2
        a, b = block[:, :half], block[:, half:]
        u1, x1 = rec(_f_box(a, b), start)
        u2, x2 = rec(b + (1.0 - 2.0 * x1) * a, start + half)
        return np.concatenate([u1, u2], axis=1), np.concatenate([x1 ^ x2, x2], axis=1)

    u, _ = rec(llrs, 0)
    return u[0] if single else u


def sc_decode(spec: PolarCodeSpec, channel_llrs, frozen_fill=ZEROS_FILL):
    """Successive cancellation decoding; accepts (N,) or (batch, N) LLRs.

    Returns decoded u of the same leading shape. Frozen positions are forced
    to the shared fill values.
    """
    if np.asarray(channel_llrs).shape[-1] != spec.n:
        raise ValueError("LLR length mismatch")
    fvals = frozen_values(spec, frozen_fill)
    fmask = np.zeros(spec.n, dtype=bool)
    fmask[spec.frozen] = True

    def decide(i, llr):
        if fmask[i]:
            return np.full(llr.shape[0], fvals[i], dtype=np.uint8)
        return (llr < 0.0).astype(np.uint8)

    return sc_process(channel_llrs, decide)


def _draw_trial(rng, dist, n, k, sigma):
    # draw order is mode independent so CSI/CDI share realizations per seed
    if dist.kind == RAYLEIGH:
        h = dist.sigma_h * np.sqrt(-2.0 * np.log1p(-rng.random(n)))
    else:
        h = np.hypot(dist.s + dist.sigma_h * rng.standard_normal(n), dist.sigma_h * rng.standard_normal(n))
    z = rng.standard_normal(n)
    bits = rng.integers(0, 2, size=k, dtype=np.uint8)
    return h, z, bits


def trial_rng(seed, trial):
    return np.random.Generator(
        np.random.Philox(key=np.array([seed & 0xFFFFFFFFFFFFFFFF, trial], dtype=np.uint64))
    )


def simulate_link(
    ch: FadingChannelSpec,
    spec: PolarCodeSpec,
    trials,
    seed,
    frozen_fill=ZEROS_FILL,
    batch=256,
    llr_table: CdiLlrTable | None = None,
):
    """Monte Carlo SC link simulation; deterministic in (seed, trial index).

    Returns a result dict matching the CSV row schema.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    n, k = spec.n, spec.k
    info = spec.info
    if ch.csi == CDI and llr_table is None and ch.sigma > 0.0:
        llr_table = CdiLlrTable(ch)
    frame_errors = 0
    bit_errors = 0
    done = 0
    while done < trials:
        b = min(batch, trials - done)
        hs = np.empty((b, n))
        zs = np.empty((b, n))
        bits = np.empty((b, k), dtype=np.uint8)
        for j in range(b):
            rng = trial_rng(seed, done + j)
            hs[j], zs[j], bits[j] = _draw_trial(rng, ch.dist, n, k, ch.sigma)
        frame = encode(spec, bits, frozen_fill)
        y = hs * frame.x + ch.sigma * zs
        if ch.csi == CSI:
            llrs = llr_csi(ch, y, hs)
        else:
            if ch.sigma == 0.0:
                llrs = np.where(y > 0.0, LLR_CLIP, np.where(y < 0.0, -LLR_CLIP, 0.0))
            else:
                llrs = llr_table(y)
        u_hat = sc_decode(spec, llrs, frozen_fill)
        wrong = u_hat[:, info] != bits
        frame_errors += int(np.any(wrong, axis=1).sum())
        bit_errors += int(wrong.sum())
        done += b
    fer = frame_errors / trials
    ber = bit_errors / (trials * k) if k else 0.0
    fer_lo, fer_hi = wilson_interval(frame_errors, trials)
    return {
        "N": n,
        "rate": spec.rate,
        "snr_db": 10.0 * math.log10(ch.dist.mean_square() / ch.sigma**2) if ch.sigma > 0 else math.inf,
        # semicolon separator keeps the field comma-free for plain CSV rows
        "dist": f"{ch.dist.kind}(sigma_h={ch.dist.sigma_h:.6g};s={ch.dist.s:.6g})",
        "csi_mode": ch.csi,
        "trials": trials,
        "frame_errors": frame_errors,
        "bit_errors": bit_errors,
        "fer": fer,
        "ber": ber,
        "fer_lo": fer_lo,
        "fer_hi": fer_hi,
        "seed": seed,
    }


SIM_CSV_COLUMNS = [
    "N",
    "rate",
    "snr_db",
    "dist",
    "csi_mode",
    "trials",
    "frame_errors",
    "bit_errors",
    "fer",
    "ber",
    "fer_lo",
    "fer_hi",
    "seed",
]


def sim_result_csv_row(res):
    return ",".join(str(res[c]) for c in SIM_CSV_COLUMNS)
