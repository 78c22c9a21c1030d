"""Encoder/decoder behavior: transform algebra, an exhaustive-marginalization
decoding oracle at small N, LLR formulas, and simulator determinism."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import expit

from fadinglattice.codec import (
    LLR_CLIP,
    CdiLlrTable,
    encode,
    frozen_values,
    llr_cdi,
    llr_csi,
    polar_transform,
    sc_decode,
    sc_process,
    sim_result_csv_row,
    simulate_link,
    SIM_CSV_COLUMNS,
    trial_rng,
)
from fadinglattice.construction import select_frozen
from fadinglattice.fading import CDI, CSI, CdiMarginal, FadingChannelSpec


@st.composite
def bit_blocks(draw):
    m = draw(st.integers(min_value=0, max_value=6))
    n = 1 << m
    return np.array(draw(st.lists(st.integers(0, 1), min_size=n, max_size=n)), dtype=np.uint8)


@settings(deadline=None)
@given(bit_blocks())
def test_polar_transform_is_involution(u):
    assert np.array_equal(polar_transform(polar_transform(u)), u)


def test_polar_transform_small_cases():
    assert polar_transform([0, 1]).tolist() == [1, 1]
    assert polar_transform([1, 0]).tolist() == [1, 0]
    assert polar_transform([1, 1]).tolist() == [0, 1]
    # batch rows match independent single-row calls
    rng = np.random.default_rng(7)
    block = rng.integers(0, 2, size=(5, 16), dtype=np.uint8)
    batch = polar_transform(block)
    for j in range(5):
        assert np.array_equal(batch[j], polar_transform(block[j]))


def test_polar_transform_rejects_bad_length():
    with pytest.raises(ValueError):
        polar_transform([0, 1, 1])


def test_frozen_values_modes(z10_csi):
    spec = select_frozen(z10_csi, rate=0.5)
    zeros = frozen_values(spec)
    assert not zeros.any()
    seeded = frozen_values(spec, frozen_fill=11)
    again = frozen_values(spec, frozen_fill=11)
    assert np.array_equal(seeded, again)
    assert not seeded[spec.info].any()
    assert seeded[spec.frozen].any()


def test_encode_shapes_and_mapping(z10_csi):
    spec = select_frozen(z10_csi, rate=0.5)
    rng = np.random.default_rng(3)
    bits = rng.integers(0, 2, size=spec.k, dtype=np.uint8)
    frame = encode(spec, bits)
    assert np.array_equal(frame.u[spec.info], bits)
    assert not frame.u[spec.frozen].any()
    xb = polar_transform(frame.u)
    assert np.array_equal(frame.x, 1.0 - 2.0 * xb)
    with pytest.raises(ValueError):
        encode(spec, bits[:-1])


@pytest.mark.parametrize("fill", ["zeros", 11])
def test_sc_decode_noiseless_round_trip(z10_csi, fill):
    spec = select_frozen(z10_csi, rate=0.5)
    rng = np.random.default_rng(5)
    bits = rng.integers(0, 2, size=(4, spec.k), dtype=np.uint8)
    frame = encode(spec, bits, frozen_fill=fill)
    u_hat = sc_decode(spec, 50.0 * frame.x, frozen_fill=fill)
    assert np.array_equal(u_hat, frame.u)


def brute_force_sc(llrs, frozen_mask):
    """Position-by-position exhaustive-marginalization decoder.

    At step i it computes the exact posterior of u_i given the channel and
    the bits already decided, with all later bits uniform, which is the
    quantity the f/g recursion evaluates.
    """
    n = len(llrs)
    p0 = expit(np.asarray(llrs, dtype=float))
    p1 = 1.0 - p0
    u = np.zeros(n, dtype=np.uint8)
    for i in range(n):
        if frozen_mask[i]:
            continue
        scores = np.zeros(2)
        for b in (0, 1):
            u[i] = b
            total = 0.0
            for suffix in range(1 << (n - i - 1)):
                for j in range(n - i - 1):
                    u[i + 1 + j] = (suffix >> j) & 1
                x = polar_transform(u)
                total += float(np.prod(np.where(x, p1, p0)))
            scores[b] = total
        u[i + 1 :] = 0
        u[i] = 0 if scores[0] >= scores[1] else 1
    return u


@pytest.mark.parametrize("trial", range(6))
def test_sc_decode_matches_exhaustive_marginalization(trial):
    rng = np.random.default_rng(100 + trial)
    n = 8
    llrs = rng.normal(0.0, 2.0, size=n)
    frozen_mask = rng.random(n) < 0.4
    frozen_mask[0] = True  # keep at least one frozen position in play

    def decide(i, col):
        if frozen_mask[i]:
            return np.zeros(col.shape[0], dtype=np.uint8)
        return (col < 0.0).astype(np.uint8)

    got = sc_process(llrs, decide)
    want = brute_force_sc(llrs, frozen_mask)
    assert np.array_equal(got, want)


def test_sc_process_visits_positions_in_order():
    seen = []

    def decide(i, col):
        seen.append(i)
        return np.zeros(col.shape[0], dtype=np.uint8)

    sc_process(np.zeros(16), decide)
    assert seen == list(range(16))


def test_llr_csi_formula(csi_channel):
    y = np.array([0.3, -1.2, 0.0, 900.0])
    h = np.array([1.1, 0.4, 2.0, 3.0])
    got = llr_csi(csi_channel, y, h)
    want = np.clip(2.0 * y * h / csi_channel.sigma**2, -LLR_CLIP, LLR_CLIP)
    assert np.allclose(got, want, atol=0.0)
    assert got[3] == LLR_CLIP
    assert llr_csi(csi_channel, 1.0, 0.0) == 0.0


def test_cdi_llr_table_matches_marginal(cdi_channel):
    table = CdiLlrTable(cdi_channel, npoints=2049)
    marg = CdiMarginal(cdi_channel)
    y = np.array([0.13, 0.71, 1.9, 3.3, 5.5])
    got, saturated = table.evaluate(y)
    assert not saturated
    assert np.allclose(got, marg.log_lr(y), atol=1e-6)
    # odd symmetry and clamped tail
    assert np.allclose(table(-y), -table(y), atol=0.0)
    far, saturated = table.evaluate(np.array([table.y_max + 5.0]))
    assert saturated
    assert np.allclose(llr_cdi(table, y), got, atol=0.0)


def test_cdi_llr_table_rejects_csi(csi_channel):
    with pytest.raises(ValueError):
        CdiLlrTable(csi_channel)


def test_simulate_link_deterministic(csi_channel, z10_csi):
    spec = select_frozen(z10_csi, rate=0.45)
    a = simulate_link(csi_channel, spec, trials=24, seed=9)
    b = simulate_link(csi_channel, spec, trials=24, seed=9)
    assert a == b
    # batch boundaries must not change the draws
    c = simulate_link(csi_channel, spec, trials=24, seed=9, batch=7)
    assert a == c
    assert list(a) == SIM_CSV_COLUMNS
    assert a["fer_lo"] <= a["fer"] <= a["fer_hi"]
    row = sim_result_csv_row(a)
    assert row.count(",") == len(SIM_CSV_COLUMNS) - 1


def test_simulate_link_noiseless_is_error_free(dist5, z10_csi):
    spec = select_frozen(z10_csi, rate=0.5)
    clean = FadingChannelSpec(dist5, 0.0, CDI)
    res = simulate_link(clean, spec, trials=8, seed=2)
    assert res["frame_errors"] == 0
    assert res["snr_db"] == np.inf


def test_simulate_link_rejects_zero_trials(csi_channel, z10_csi):
    spec = select_frozen(z10_csi, rate=0.5)
    with pytest.raises(ValueError):
        simulate_link(csi_channel, spec, trials=0, seed=1)


def test_trial_rng_streams_are_stable():
    a = trial_rng(5, 0).random(3)
    b = trial_rng(5, 0).random(3)
    c = trial_rng(5, 1).random(3)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
