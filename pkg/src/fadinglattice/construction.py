"""Channel polarization over finite symmetric channels: synthetic-channel
evolution, Bhattacharyya tracking, and frozen-set selection."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass

import numpy as np

from .bmsc import DiscreteBMSC, canonical_pairs, degrading_merge

log = logging.getLogger(__name__)

# once a node's Z is this extremal, its subtree is filled with the erasure
# recursion (z-, z+) = (2z - z^2, z^2), which upper-bounds the true values
Z_GOOD_DEFAULT = 1e-9
Z_BAD_DEFAULT = 1e-9

# refuse product alphabets beyond this many entries per node (memory guard)
MAX_PRODUCT_ENTRIES = 80_000_000


def polarize_step(w: DiscreteBMSC, mu=None):
    """One Arikan step: returns (w_minus, w_plus), each merged to mu symbols.

    mu=None keeps the exact product alphabets (exponential growth; only for
    tiny inputs/tests).
    """
    w0, w1, e = w.w0, w.w1, w.erasure
    npairs = len(w0)
    m_all = 2 * npairs + 1
    if npairs * m_all > MAX_PRODUCT_ENTRIES:
        raise MemoryError(f"product alphabet {npairs}x{m_all} exceeds the per-node budget")
    # all symbols, representatives first, then conjugates, then erasure
    p0 = np.concatenate([w0, w1, [e]])
    p1 = np.concatenate([w1, w0, [e]])
    # one representative per conjugate orbit: rows j over representative
    # symbols, columns k over the full alphabet; remaining orbits (erasure
    # row) are LR=1 and contribute e - e^2 + e^2 = e of erasure mass
    q0m = 0.5 * (np.outer(w0, p0) + np.outer(w1, p1)).ravel()
    q1m = 0.5 * (np.outer(w1, p0) + np.outer(w0, p1)).ravel()
    hi, lo, er = canonical_pairs(q0m, q1m, e)
    w_minus = DiscreteBMSC(hi, lo, er)

    q0p = np.concatenate(
        [0.5 * np.outer(w0, p0).ravel(), 0.5 * np.outer(w1, p0).ravel(), 0.5 * e * w0, 0.5 * e * w0]
    )
    q1p = np.concatenate(
        [0.5 * np.outer(w1, p1).ravel(), 0.5 * np.outer(w0, p1).ravel(), 0.5 * e * w1, 0.5 * e * w1]
    )
    hi, lo, er = canonical_pairs(q0p, q1p, e * e)
    w_plus = DiscreteBMSC(hi, lo, er)

    for ch in (w_minus, w_plus):
        total = ch.total_mass()
        if abs(total - 1.0) > 1e-9:
            raise ArithmeticError(f"polarize_step mass drift {total - 1.0:.3e}")
    if mu is not None:
        w_minus = degrading_merge(w_minus, mu)
        w_plus = degrading_merge(w_plus, mu)
    return w_minus, w_plus


def construct(w: DiscreteBMSC, m, mu, z_good=Z_GOOD_DEFAULT, z_bad=Z_BAD_DEFAULT):
    """Evolve w through m polarization levels; returns N=2^m Bhattacharyya
    upper bounds indexed in decoding order (first half = minus branch).

    z_good/z_bad: extremal thresholds beyond which a subtree is filled by
    the erasure recursion (still an upper bound). Pass 0 to disable.
    """
    if m < 0:
        raise ValueError("m must be nonnegative")
    # each node is ("ch", channel) or ("bec", z)
    level = [("ch", w)]
    for depth in range(m):
        nxt = []
        for kind, node in level:
            if kind == "bec":
                z = node
                nxt.append(("bec", 2.0 * z - z * z))
                nxt.append(("bec", z * z))
                continue
            z = node.bhattacharyya()
            if z <= z_good or z >= 1.0 - z_bad:
                nxt.append(("bec", 2.0 * z - z * z))
                nxt.append(("bec", z * z))
                continue
            try:
                wm, wp = polarize_step(node, mu)
            except MemoryError as exc:
                raise MemoryError(f"construction out of memory at level {depth}: {exc}") from exc
            nxt.append(("ch", wm))
            nxt.append(("ch", wp))
        level = nxt
        log.debug("construct: level %d, %d live channels", depth + 1, sum(1 for k, _ in level if k == "ch"))
    out = np.empty(len(level))
    for i, (kind, node) in enumerate(level):
        out[i] = node if kind == "bec" else node.bhattacharyya()
    return np.minimum(out, 1.0)


@dataclass(frozen=True)
class PolarCodeSpec:
    """Frozen-set description of a length-2^m polar code."""

    m: int
    z_values: np.ndarray
    frozen: np.ndarray  # sorted indices
    rate: float
    union_bound: float
    beta: float | None = None

    def __post_init__(self):
        self.z_values.setflags(write=False)
        self.frozen.setflags(write=False)

    @property
    def n(self):
        return 1 << self.m

    @property
    def info(self):
        mask = np.ones(self.n, dtype=bool)
        mask[self.frozen] = False
        return np.nonzero(mask)[0]

    @property
    def k(self):
        return self.n - len(self.frozen)

    def validate(self):
        n = self.n
        if len(self.z_values) != n:
            raise ValueError("z_values length mismatch")
        if np.any((self.frozen < 0) | (self.frozen >= n)) or len(np.unique(self.frozen)) != len(self.frozen):
            raise ValueError("frozen set malformed")
        if abs(self.rate - self.k / n) > 1e-12:
            raise ValueError("rate inconsistent with frozen set")
        if abs(float(self.z_values[self.info].sum()) - self.union_bound) > 1e-12:
            raise ValueError("stored union bound inconsistent")
        return self


def select_frozen(z_values, rate=None, budget=None, beta=None) -> PolarCodeSpec:
    """Pick the information set, by target rate or by block-error budget.

    Rate mode keeps the floor(rate*N) smallest-Z indices. Budget mode keeps
    the largest low-Z prefix whose Z-sum stays within budget; an infeasible
    budget yields the rate-0 spec (with a logged diagnostic).
    """
    z = np.asarray(z_values, dtype=float)
    n = len(z)
    m = int(n).bit_length() - 1
    if n != 1 << m:
        raise ValueError("z_values length must be a power of two")
    if (rate is None) == (budget is None):
        raise ValueError("exactly one of rate/budget must be given")
    order = np.lexsort((np.arange(n), z))
    if rate is not None:
        if not 0.0 <= rate <= 1.0:
            raise ValueError("rate must be in [0, 1]")
        k = int(np.floor(rate * n))
    else:
        if budget <= 0.0:
            raise ValueError("budget must be positive")
        csum = np.cumsum(z[order])
        k = int(np.searchsorted(csum, budget, side="right"))
        if k == 0:
            log.warning("select_frozen: budget %.3e infeasible (best single index has Z=%.3e); rate-0 code", budget, z[order[0]])
    info = np.sort(order[:k])
    mask = np.ones(n, dtype=bool)
    mask[info] = False
    frozen = np.nonzero(mask)[0]
    return PolarCodeSpec(
        m=m,
        z_values=z,
        frozen=frozen,
        rate=k / n,
        union_bound=float(z[info].sum()),
        beta=beta,
    )


def enforce_nesting(specs):
    """Intersect info sets from the last (best) level downward so that each
    earlier code's info set is contained in the next one's.

    Returns (new_specs, corrections) where corrections counts indices moved
    to frozen.
    """
    corrections = 0
    new_specs = list(specs)
    allowed = None
    for idx in range(len(specs) - 1, -1, -1):
        sp = new_specs[idx]
        info = set(sp.info.tolist())
        if allowed is not None:
            kept = info & allowed
            corrections += len(info) - len(kept)
            if kept != info:
                n = sp.n
                mask = np.zeros(n, dtype=bool)
                mask[list(kept)] = True
                frozen = np.nonzero(~mask)[0]
                sp = PolarCodeSpec(
                    m=sp.m,
                    z_values=sp.z_values,
                    frozen=frozen,
                    rate=len(kept) / n,
                    union_bound=float(sp.z_values[list(sorted(kept))].sum()) if kept else 0.0,
                    beta=sp.beta,
                )
                new_specs[idx] = sp
            info = kept
        allowed = info
    if corrections:
        log.info("enforce_nesting: moved %d indices to frozen", corrections)
    return new_specs, corrections


def save_code_spec(spec: PolarCodeSpec, path, mu=None, channel_hash=None):
    doc = {
        "m": spec.m,
        "mu": mu,
        "channel_hash": channel_hash,
        "z_values": [float(z) for z in spec.z_values],
        "frozen": [int(i) for i in spec.frozen],
        "rate": spec.rate,
        "union_bound": spec.union_bound,
        "beta": spec.beta,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_code_spec(path):
    with open(path) as fh:
        doc = json.load(fh)
    spec = PolarCodeSpec(
        m=doc["m"],
        z_values=np.array(doc["z_values"], dtype=float),
        frozen=np.array(doc["frozen"], dtype=np.int64),
        rate=doc["rate"],
        union_bound=doc["union_bound"],
        beta=doc.get("beta"),
    )
    return spec, {"mu": doc.get("mu"), "channel_hash": doc.get("channel_hash")}


def construct_cached(w: DiscreteBMSC, m, mu, cache_dir=None, **kwargs):
    """construct() with a JSON disk cache keyed by (channel hash, m, mu)."""
    if cache_dir is None:
        cache_dir = os.environ.get("FADINGLATTICE_CACHE")
    if not cache_dir:
        return construct(w, m, mu, **kwargs)
    os.makedirs(cache_dir, exist_ok=True)
    key = f"zvals_{w.content_hash()}_m{m}_mu{mu}.json"
    path = os.path.join(cache_dir, key)
    if os.path.exists(path):
        with open(path) as fh:
            doc = json.load(fh)
        if doc["m"] == m and doc["mu"] == mu and doc["channel_hash"] == w.content_hash():
            return np.array(doc["z_values"], dtype=float)
    z = construct(w, m, mu, **kwargs)
    doc = {
        "m": m,
        "mu": mu,
        "channel_hash": w.content_hash(),
        "z_values": [float(v) for v in z],
        "frozen": [],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
    return z
