"""Fading distributions, BPSK channel densities, and the capacity routes."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from fadinglattice.fading import (
    CDI,
    CSI,
    CdiMarginal,
    FadingChannelSpec,
    bpsk_conditional_capacity,
    capacity_cdi,
    capacity_csi,
    dist_from_snr_db,
    ergodic_capacity_power,
    likelihood_ratio_csi,
    poltyrev_capacity,
    poltyrev_capacity_mc,
    rayleigh,
    rician,
    transition_pdf_cdi,
    transition_pdf_csi,
)

sigma_hs = st.floats(min_value=0.2, max_value=4.0)


@settings(deadline=None, max_examples=25)
@given(sigma_hs, st.floats(min_value=0.0, max_value=3.0))
def test_gain_pdf_normalizes(sigma_h, s):
    dist = rician(sigma_h, s) if s else rayleigh(sigma_h)
    total, err = integrate.quad(dist.pdf, 0.0, np.inf, limit=200)
    assert total == pytest.approx(1.0, abs=1e-9)


def test_rician_zero_line_of_sight_is_rayleigh():
    h = np.linspace(0.0, 8.0, 200)
    a = rician(1.3, 0.0).pdf(h)
    b = rayleigh(1.3).pdf(h)
    assert np.allclose(a, b, atol=1e-12, rtol=0.0)


@settings(deadline=None, max_examples=25)
@given(sigma_hs, st.floats(min_value=0.0, max_value=2.5), st.floats(min_value=0.1, max_value=6.0))
def test_gain_cdf_integrates_pdf(sigma_h, s, h):
    dist = rician(sigma_h, s) if s else rayleigh(sigma_h)
    want, err = integrate.quad(dist.pdf, 0.0, h, limit=200)
    assert dist.cdf(h) == pytest.approx(want, abs=1e-8)


@given(sigma_hs, st.floats(min_value=0.0, max_value=3.0))
def test_mean_square_closed_form(sigma_h, s):
    dist = rician(sigma_h, s)
    want = integrate.quad(lambda h: h * h * dist.pdf(h), 0.0, np.inf, limit=300)[0]
    assert dist.mean_square() == pytest.approx(want, rel=1e-6)


@given(sigma_hs, st.floats(min_value=1e-9, max_value=1e-3))
def test_h_max_leaves_at_most_tail_mass(sigma_h, tail):
    dist = rayleigh(sigma_h)
    assert 1.0 - dist.cdf(dist.h_max(tail)) <= tail * (1.0 + 1e-9)


def test_snr_conventions():
    dist = dist_from_snr_db(5.0)
    # quoted dB figure is E[H^2]/sigma^2
    assert dist.sigma_h == pytest.approx(math.sqrt(10.0 ** 0.5 / 2.0), rel=1e-12)
    assert dist.sigma_h == pytest.approx(1.2575, abs=1e-4)
    # the spec field ratio is sigma_h^2/sigma^2
    ch = FadingChannelSpec(dist, 2.0, CSI)
    assert ch.snr() == dist.sigma_h**2 / 4.0


@settings(deadline=None, max_examples=10)
@given(st.floats(min_value=0.4, max_value=2.0), st.floats(min_value=0.5, max_value=2.0))
def test_transition_pdf_csi_is_joint_density(h, sigma):
    # over y alone the joint integrates to the gain density at h
    ch = FadingChannelSpec(rayleigh(1.0), sigma, CSI)
    total = integrate.quad(lambda y: transition_pdf_csi(ch, y, h, 1.0), -np.inf, np.inf)[0]
    assert total == pytest.approx(ch.dist.pdf(h), rel=1e-9)
    y = np.linspace(-4.0, 4.0, 33)
    assert np.allclose(
        transition_pdf_csi(ch, y, h, 1.0), transition_pdf_csi(ch, -y, h, -1.0), rtol=1e-12
    )


def test_likelihood_ratio_csi_matches_density_ratio():
    ch = FadingChannelSpec(rayleigh(1.2), 0.8, CSI)
    y = np.linspace(-3.0, 3.0, 25)
    want = transition_pdf_csi(ch, y, 1.4, 1.0) / transition_pdf_csi(ch, y, 1.4, -1.0)
    lr, log_lr = likelihood_ratio_csi(ch, y, 1.4)
    assert np.allclose(lr, want, rtol=1e-9)
    assert np.allclose(log_lr, np.log(want), rtol=1e-9, atol=1e-12)


def test_transition_pdf_cdi_normalizes_and_conjugates():
    ch = FadingChannelSpec(dist_from_snr_db(5.0), 1.0, CDI)
    total = integrate.quad(lambda y: transition_pdf_cdi(ch, y, 1.0), -np.inf, np.inf, limit=300)[0]
    assert total == pytest.approx(1.0, abs=1e-6)
    y = np.linspace(-5.0, 5.0, 41)
    assert np.allclose(transition_pdf_cdi(ch, y, 1.0), transition_pdf_cdi(ch, -y, -1.0), rtol=1e-10)


def test_cdi_marginal_integrates_joint_over_gain():
    ch = FadingChannelSpec(dist_from_snr_db(5.0), 1.0, CDI)
    marg = CdiMarginal(ch)
    y = np.linspace(-4.0, 4.0, 17)
    want = np.array(
        [
            integrate.quad(
                lambda h, yy=yy: transition_pdf_csi(ch, yy, h, 1.0),
                0.0,
                ch.dist.h_max(),
                limit=300,
            )[0]
            for yy in y
        ]
    )
    assert np.allclose(marg.density(y), want, rtol=1e-6, atol=1e-12)


def test_bpsk_conditional_capacity_limits():
    assert bpsk_conditional_capacity(0.0, 1.0) == pytest.approx(0.0, abs=1e-12)
    assert bpsk_conditional_capacity(30.0, 1.0) == pytest.approx(1.0, abs=1e-9)
    caps = [bpsk_conditional_capacity(h, 1.0) for h in (0.3, 0.8, 1.5, 3.0)]
    assert all(0.0 < c < 1.0 for c in caps)
    assert caps == sorted(caps)


def test_capacity_csi_dominates_cdi(csi_channel, cdi_channel):
    c_csi = capacity_csi(csi_channel)
    c_cdi = capacity_cdi(cdi_channel)
    assert 0.0 < c_cdi < c_csi < 1.0


def test_capacity_monotone_in_snr():
    caps = [capacity_csi(FadingChannelSpec(dist_from_snr_db(db), 1.0, CSI)) for db in (0.0, 5.0, 10.0)]
    assert caps[0] < caps[1] < caps[2]


def test_rician_capacity_exceeds_rayleigh_at_equal_scale(csi_channel, rician_channel):
    assert capacity_csi(rician_channel) > capacity_csi(csi_channel)


def test_poltyrev_capacity_against_monte_carlo():
    dist = dist_from_snr_db(5.0)
    exact = poltyrev_capacity(dist, 1.0)
    mc, se = poltyrev_capacity_mc(dist, 1.0, draws=200_000, seed=3)
    assert exact == pytest.approx(mc, abs=4.0 * se)


def test_ergodic_capacity_monotone_in_power():
    dist = dist_from_snr_db(5.0)
    vals = [ergodic_capacity_power(dist, 1.0, p) for p in (1.0, 4.0, 9.0, 16.0)]
    assert all(a < b for a, b in zip(vals, vals[1:]))
