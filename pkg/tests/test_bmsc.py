"""Discrete symmetric-channel representation: canonical form, the two
channel functionals, and degrading merges."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from fadinglattice.bmsc import (
    DiscreteBMSC,
    bec,
    bsc,
    canonical_pairs,
    degrading_merge,
    degrading_merge_reference,
)
from fadinglattice.numerics import binary_entropy


def random_channel(draw_weights, erasure_frac):
    """Normalize raw weights into a valid channel with given erasure share."""
    w = np.abs(np.asarray(draw_weights, dtype=float)) + 1e-9
    w = w / w.sum() * (1.0 - erasure_frac)
    half = len(w) // 2
    return DiscreteBMSC.create(w[:half], w[half : 2 * half], erasure_frac)


channels = st.builds(
    random_channel,
    hnp.arrays(np.float64, st.integers(min_value=2, max_value=40).map(lambda k: 2 * k),
               elements=st.floats(min_value=0.0, max_value=1.0)),
    st.floats(min_value=0.0, max_value=0.3),
)


def test_bsc_functionals_closed_form():
    ch = bsc(0.11)
    assert ch.capacity() == pytest.approx(1.0 - binary_entropy(0.11), abs=1e-12)
    assert ch.bhattacharyya() == pytest.approx(2.0 * np.sqrt(0.11 * 0.89), abs=1e-12)


def test_bec_functionals_closed_form():
    ch = bec(0.37)
    assert ch.capacity() == pytest.approx(0.63, abs=1e-12)
    assert ch.bhattacharyya() == pytest.approx(0.37, abs=1e-12)


def test_create_canonicalizes_order_and_orientation():
    # swapped orientation and shuffled order must normalize identically
    w0 = np.array([0.30, 0.02, 0.10])
    w1 = np.array([0.05, 0.28, 0.10])
    a = DiscreteBMSC.create(w0, w1, 0.15)
    b = DiscreteBMSC.create(w1[::-1], w0[::-1], 0.15)
    assert a.content_hash() == b.content_hash()
    a.validate()
    assert np.all(a.w0 >= a.w1)
    # the LR = 1 pair lands in the erasure mass
    assert a.erasure == pytest.approx(0.15 + 0.20, abs=1e-12)


def test_create_rejects_bad_mass():
    with pytest.raises(ValueError):
        DiscreteBMSC.create(np.array([0.5]), np.array([0.4]))


@given(channels)
def test_channel_mass_and_functional_ranges(ch):
    assert ch.total_mass() == pytest.approx(1.0, abs=1e-9)
    c, z = ch.capacity(), ch.bhattacharyya()
    assert -1e-12 <= c <= 1.0 + 1e-12
    assert -1e-12 <= z <= 1.0 + 1e-12


@given(channels)
def test_capacity_bhattacharyya_inequalities(ch):
    # standard two-sided relation between the functionals
    c, z = ch.capacity(), ch.bhattacharyya()
    assert c >= np.log2(2.0 / (1.0 + z)) - 1e-9
    assert c <= np.sqrt(max(0.0, 1.0 - z * z)) + 1e-9


@settings(deadline=None)
@given(channels, st.integers(min_value=2, max_value=16))
def test_degrading_merge_degrades(ch, mu):
    merged = degrading_merge(ch, mu)
    merged.validate()
    assert merged.nsymbols <= max(mu, 2) + 1  # erasure symbol rides along
    assert merged.capacity() <= ch.capacity() + 1e-9
    assert merged.bhattacharyya() >= ch.bhattacharyya() - 1e-9


@settings(deadline=None)
@given(channels, st.integers(min_value=2, max_value=24))
def test_degrading_merge_matches_reference(ch, mu):
    fast = degrading_merge(ch, mu)
    ref = degrading_merge_reference(ch, mu)
    assert fast.npairs == ref.npairs
    assert np.allclose(fast.w0, ref.w0, atol=1e-12)
    assert np.allclose(fast.w1, ref.w1, atol=1e-12)
    assert fast.erasure == pytest.approx(ref.erasure, abs=1e-12)


def test_degrading_merge_reports_loss_bound():
    rng = np.random.default_rng(5)
    w = rng.random(60)
    ch = random_channel(w, 0.1)
    merged, loss = degrading_merge(ch, 8, return_loss=True)
    assert loss >= ch.capacity() - merged.capacity() - 1e-12
    assert loss >= 0.0


def test_csv_round_trip(tmp_path):
    rng = np.random.default_rng(11)
    ch = random_channel(rng.random(30), 0.07)
    path = tmp_path / "chan.csv"
    ch.to_csv(path)
    back = DiscreteBMSC.from_csv(path)
    assert back.content_hash() == ch.content_hash()
    assert np.array_equal(back.w0, ch.w0)
    assert np.array_equal(back.w1, ch.w1)


def test_content_hash_distinguishes_channels():
    assert bsc(0.1).content_hash() != bsc(0.1000001).content_hash()
