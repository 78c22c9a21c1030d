"""Finite-alphabet binary-input symmetric channels in conjugate-pair form,
and the greedy degrading merge that caps alphabet size."""

from __future__ import annotations

import hashlib
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .numerics import LOG2

log = logging.getLogger(__name__)

MASS_ATOL = 1e-12

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is an install-time extra
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap if not (args and callable(args[0])) else args[0]


@dataclass(frozen=True)
class DiscreteBMSC:
    """Symmetric binary-input channel stored as conjugate output pairs.

    w0[i] is the probability of the i-th representative output given input
    bit 0, w1[i] given input bit 1; the conjugate output has the masses
    swapped. erasure is the mass of the self-conjugate symbol (LR = 1).
    Pairs are sorted by strictly decreasing LR = w0/w1 and satisfy
    w0 >= w1 elementwise; sum(w0) + sum(w1) + erasure = 1.
    """

    w0: np.ndarray
    w1: np.ndarray
    erasure: float = 0.0

    @classmethod
    def create(cls, w0, w1, erasure=0.0, mass_atol=MASS_ATOL):
        w0, w1, erasure = canonical_pairs(w0, w1, erasure)
        ch = cls(w0, w1, erasure)
        total = ch.total_mass()
        if abs(total - 1.0) > mass_atol:
            raise ValueError(f"channel mass {total!r} differs from 1 beyond {mass_atol}")
        return ch

    def __post_init__(self):
        self.w0.setflags(write=False)
        self.w1.setflags(write=False)

    @property
    def npairs(self):
        return len(self.w0)

    @property
    def nsymbols(self):
        return 2 * len(self.w0) + (1 if self.erasure > 0.0 else 0)

    def total_mass(self):
        return float(self.w0.sum() + self.w1.sum() + self.erasure)

    def capacity(self):
        return float(np.sum(_mi_terms(self.w0, self.w1)))

    def bhattacharyya(self):
        return float(2.0 * np.sum(np.sqrt(self.w0 * self.w1)) + self.erasure)

    def validate(self):
        if np.any(self.w0 < 0.0) or np.any(self.w1 < 0.0) or self.erasure < 0.0:
            raise ValueError("negative mass")
        if np.any(self.w1 > self.w0):
            raise ValueError("pairs must satisfy w0 >= w1")
        if abs(self.total_mass() - 1.0) > MASS_ATOL:
            raise ValueError("total mass differs from 1")
        with np.errstate(divide="ignore"):
            r = self.w1 / self.w0
        if np.any(np.diff(r) <= 0.0):
            raise ValueError("pairs must be sorted by strictly decreasing LR")
        return self

    def content_hash(self):
        hsh = hashlib.sha256()
        hsh.update(self.w0.tobytes())
        hsh.update(self.w1.tobytes())
        hsh.update(np.float64(self.erasure).tobytes())
        return hsh.hexdigest()[:16]

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write(f"# erasure={float(self.erasure)!r} hash={self.content_hash()}\n")
            fh.write("w0,w1\n")
            for a, b in zip(self.w0, self.w1):
                fh.write(f"{float(a)!r},{float(b)!r}\n")

    @classmethod
    def from_csv(cls, path):
        with open(path) as fh:
            header = fh.readline()
            if not header.startswith("# erasure="):
                raise ValueError("missing channel header line")
            erasure = float(header.split("erasure=")[1].split()[0])
            body = fh.read()
        data = np.loadtxt(io.StringIO(body), delimiter=",", skiprows=1, ndmin=2)
        if data.size == 0:
            return cls.create(np.empty(0), np.empty(0), erasure)
        return cls.create(data[:, 0], data[:, 1], erasure)


def canonical_pairs(w0, w1, erasure=0.0):
    """Orient, prune, sort, and losslessly merge equal-LR pairs."""
    w0 = np.asarray(w0, dtype=float).ravel()
    w1 = np.asarray(w1, dtype=float).ravel()
    if w0.shape != w1.shape:
        raise ValueError("w0 and w1 must have equal length")
    if np.any(~np.isfinite(w0)) or np.any(~np.isfinite(w1)) or not np.isfinite(erasure):
        raise ValueError("masses must be finite")
    if np.any(w0 < 0.0) or np.any(w1 < 0.0) or erasure < 0.0:
        raise ValueError("masses must be nonnegative")
    hi = np.maximum(w0, w1)
    lo = np.minimum(w0, w1)
    keep = hi > 0.0
    hi, lo = hi[keep], lo[keep]
    tied = lo == hi  # LR exactly 1 belongs with the erasure mass
    erasure = float(erasure + hi[tied].sum() + lo[tied].sum())
    hi, lo = hi[~tied], lo[~tied]
    # sort by decreasing LR; r = lo/hi in [0,1) is monotone in 1/LR
    r = lo / hi
    order = np.argsort(r, kind="stable")
    hi, lo, r = hi[order], lo[order], r[order]
    if len(r) > 1:
        # exact-equal ratios merge without information loss
        new_group = np.empty(len(r), dtype=bool)
        new_group[0] = True
        new_group[1:] = r[1:] != r[:-1]
        idx = np.cumsum(new_group) - 1
        hi = np.bincount(idx, weights=hi)
        lo = np.bincount(idx, weights=lo)
    return hi, lo, erasure


def _mi_terms(w0, w1):
    """Per-pair mutual information contribution, in bits."""
    s = w0 + w1
    out = np.zeros(np.shape(s))
    m0 = w0 > 0.0
    out[m0] += w0[m0] * np.log2(2.0 * w0[m0] / s[m0])
    m1 = w1 > 0.0
    out[m1] += w1[m1] * np.log2(2.0 * w1[m1] / s[m1])
    return out


def bsc(p) -> DiscreteBMSC:
    if not 0.0 <= p <= 0.5:
        raise ValueError("crossover must be in [0, 1/2]")
    return DiscreteBMSC.create(np.array([1.0 - p]), np.array([p]))


def bec(e) -> DiscreteBMSC:
    if not 0.0 <= e <= 1.0:
        raise ValueError("erasure probability must be in [0, 1]")
    return DiscreteBMSC.create(np.array([1.0 - e]), np.array([0.0]), erasure=e)


def capacity(ch: DiscreteBMSC):
    return ch.capacity()


def bhattacharyya(ch: DiscreteBMSC):
    return ch.bhattacharyya()


@njit(cache=True)
def _mi_term_scalar(a, b):
    s = a + b
    if s <= 0.0:
        return 0.0
    out = 0.0
    if a > 0.0:
        out += a * math.log(2.0 * a / s)
    if b > 0.0:
        out += b * math.log(2.0 * b / s)
    return out / 0.6931471805599453


@njit(cache=True)
def _greedy_merge_core(hi, lo, target):
    """Greedy adjacent merge in LR order, minimizing per-step capacity loss.

    Identical merge sequence to the naive rescan-everything greedy: the heap
    orders candidates by (loss, left index), so equal losses break toward the
    leftmost pair, exactly like a first-minimum scan.
    """
    n = hi.shape[0]
    nxt = np.empty(n, np.int64)
    prv = np.empty(n, np.int64)
    stamp = np.zeros(n, np.int64)
    mi = np.empty(n)
    for i in range(n):
        nxt[i] = i + 1
        prv[i] = i - 1
        mi[i] = _mi_term_scalar(hi[i], lo[i])
    cap = 4 * n + 8
    hkey = np.empty(cap)
    hl = np.empty(cap, np.int64)
    hr = np.empty(cap, np.int64)
    hsl = np.empty(cap, np.int64)
    hsr = np.empty(cap, np.int64)
    hn = 0
    for i in range(n - 1):
        key = mi[i] + mi[i + 1] - _mi_term_scalar(hi[i] + hi[i + 1], lo[i] + lo[i + 1])
        # push (key, i, i+1, 0, 0)
        j = hn
        hkey[j] = key
        hl[j] = i
        hr[j] = i + 1
        hsl[j] = 0
        hsr[j] = 0
        hn += 1
        while j > 0:
            p = (j - 1) >> 1
            if hkey[j] < hkey[p] or (hkey[j] == hkey[p] and hl[j] < hl[p]):
                hkey[j], hkey[p] = hkey[p], hkey[j]
                hl[j], hl[p] = hl[p], hl[j]
                hr[j], hr[p] = hr[p], hr[j]
                hsl[j], hsl[p] = hsl[p], hsl[j]
                hsr[j], hsr[p] = hsr[p], hsr[j]
                j = p
            else:
                break
    count = n
    while count > target and hn > 0:
        # pop smallest (key, left)
        key = hkey[0]
        l = hl[0]
        r = hr[0]
        sl = hsl[0]
        sr = hsr[0]
        hn -= 1
        hkey[0] = hkey[hn]
        hl[0] = hl[hn]
        hr[0] = hr[hn]
        hsl[0] = hsl[hn]
        hsr[0] = hsr[hn]
        j = 0
        while True:
            a = 2 * j + 1
            b = a + 1
            smallest = j
            if a < hn and (
                hkey[a] < hkey[smallest] or (hkey[a] == hkey[smallest] and hl[a] < hl[smallest])
            ):
                smallest = a
            if b < hn and (
                hkey[b] < hkey[smallest] or (hkey[b] == hkey[smallest] and hl[b] < hl[smallest])
            ):
                smallest = b
            if smallest == j:
                break
            hkey[j], hkey[smallest] = hkey[smallest], hkey[j]
            hl[j], hl[smallest] = hl[smallest], hl[j]
            hr[j], hr[smallest] = hr[smallest], hr[j]
            hsl[j], hsl[smallest] = hsl[smallest], hsl[j]
            hsr[j], hsr[smallest] = hsr[smallest], hsr[j]
            j = smallest
        if stamp[l] != sl or stamp[r] != sr or nxt[l] != r:
            continue  # stale candidate
        # merge r into l
        hi[l] += hi[r]
        lo[l] += lo[r]
        mi[l] = _mi_term_scalar(hi[l], lo[l])
        stamp[l] += 1
        stamp[r] += 1
        rn = nxt[r]
        nxt[l] = rn
        if rn < n:
            prv[rn] = l
        count -= 1
        # fresh candidates with both neighbors
        lp = prv[l]
        for a_idx, b_idx in ((lp, l), (l, rn)):
            if a_idx < 0 or b_idx >= n:
                continue
            key = mi[a_idx] + mi[b_idx] - _mi_term_scalar(
                hi[a_idx] + hi[b_idx], lo[a_idx] + lo[b_idx]
            )
            j = hn
            hkey[j] = key
            hl[j] = a_idx
            hr[j] = b_idx
            hsl[j] = stamp[a_idx]
            hsr[j] = stamp[b_idx]
            hn += 1
            while j > 0:
                p = (j - 1) >> 1
                if hkey[j] < hkey[p] or (hkey[j] == hkey[p] and hl[j] < hl[p]):
                    hkey[j], hkey[p] = hkey[p], hkey[j]
                    hl[j], hl[p] = hl[p], hl[j]
                    hr[j], hr[p] = hr[p], hr[j]
                    hsl[j], hsl[p] = hsl[p], hsl[j]
                    hsr[j], hsr[p] = hsr[p], hsr[j]
                    j = p
                else:
                    break
    out_hi = np.empty(count)
    out_lo = np.empty(count)
    i = 0
    k = 0
    while i < n:
        out_hi[k] = hi[i]
        out_lo[k] = lo[i]
        k += 1
        i = nxt[i]
    return out_hi, out_lo


def degrading_merge(ch: DiscreteBMSC, mu, return_loss=False):
    """Cap the alphabet at mu symbols by greedy adjacent merging in LR order.

    The erasure mass participates as a virtual LR=1 pair (splitting it in
    half is a valid stochastic degradation); if it survives unmerged it is
    folded back into the erasure slot.
    """
    if mu < 2:
        raise ValueError("mu must be at least 2")
    if ch.nsymbols <= mu:
        return (ch, 0.0) if return_loss else ch
    hi = ch.w0.copy()
    lo = ch.w1.copy()
    if ch.erasure > 0.0:
        hi = np.append(hi, 0.5 * ch.erasure)
        lo = np.append(lo, 0.5 * ch.erasure)
    target = max(1, mu // 2)
    out_hi, out_lo = _greedy_merge_core(hi, lo, target)
    merged = DiscreteBMSC.create(out_hi, out_lo, 0.0, mass_atol=1e-9)
    loss = ch.capacity() - merged.capacity()
    log.debug("degrading_merge: %d -> %d symbols, capacity loss %.3e", ch.nsymbols, merged.nsymbols, loss)
    return (merged, loss) if return_loss else merged


def degrading_merge_reference(ch: DiscreteBMSC, mu):
    """Naive greedy oracle: rescan all adjacent losses every iteration."""
    if ch.nsymbols <= mu:
        return ch
    hi = list(ch.w0)
    lo = list(ch.w1)
    if ch.erasure > 0.0:
        hi.append(0.5 * ch.erasure)
        lo.append(0.5 * ch.erasure)
    target = max(1, mu // 2)
    while len(hi) > target:
        best = None
        best_key = math.inf
        for i in range(len(hi) - 1):
            key = (
                _mi_term_scalar(hi[i], lo[i])
                + _mi_term_scalar(hi[i + 1], lo[i + 1])
                - _mi_term_scalar(hi[i] + hi[i + 1], lo[i] + lo[i + 1])
            )
            if key < best_key:
                best_key = key
                best = i
        hi[best] += hi[best + 1]
        lo[best] += lo[best + 1]
        del hi[best + 1], lo[best + 1]
    return DiscreteBMSC.create(np.array(hi), np.array(lo), 0.0, mass_atol=1e-9)
