"""Capacity-bin quantization: parameter guards, the closed-form BPSK route,
and the generic slice engine against a quadrature oracle."""

import math

import numpy as np
import pytest
from scipy import integrate

from fadinglattice.bmsc import DiscreteBMSC
from fadinglattice.fading import CSI, CdiBpskSlices, CsiBpskSlices, FadingChannelSpec, capacity_cdi, capacity_csi, dist_from_snr_db
from fadinglattice.numerics import binary_entropy
from fadinglattice.quantize import QuantizerParams, bin_boundaries, quantize_by_llr, quantize_fading_bpsk


def biawgn_capacity(sigma):
    """Quadrature oracle: BPSK over plain AWGN, no fading."""

    def integrand(y):
        p = math.exp(-0.5 * ((y - 1.0) / sigma) ** 2) / math.sqrt(2 * math.pi * sigma**2)
        m = math.exp(-0.5 * ((y + 1.0) / sigma) ** 2) / math.sqrt(2 * math.pi * sigma**2)
        tot = 0.5 * (p + m)
        return p * math.log2(p / tot) if p > 0 else 0.0

    val, _ = integrate.quad(integrand, -np.inf, np.inf, limit=400)
    return val


class UnitGainSlices:
    """Single deterministic gain of 1: the plain BPSK AWGN channel."""

    def __init__(self, sigma):
        self.sigma = sigma

    def outer_nodes(self):
        return np.array([1.0]), np.array([1.0])

    def half_domain(self, h):
        return 0.0, 1.0 + 14.0 * self.sigma

    def scan_scale(self, h):
        return self.sigma

    def pair_density(self, h, t):
        g = lambda m: np.exp(-0.5 * ((t - m) / self.sigma) ** 2) / math.sqrt(2 * math.pi * self.sigma**2)
        return g(1.0), g(-1.0)


def test_params_defaults_and_guards():
    p = QuantizerParams(Q=64)
    assert p.mu == 128
    with pytest.raises(ValueError):
        QuantizerParams(Q=0)
    with pytest.raises(ValueError):
        QuantizerParams(Q=4, mu=1)


def test_bin_boundaries_shape_and_capacity_relation():
    Q, sigma = 16, 0.9
    d = bin_boundaries(Q, sigma)
    assert d[0] == 0.0 and d[-1] == math.inf
    assert np.all(np.diff(d) > 0.0)
    # crossing boundary j, the conditional entropy h2(1/(1+e^{2d/sigma^2}))
    # equals 1 - j/Q by construction
    for j in (1, 5, 10, 15):
        p = 1.0 / (1.0 + math.exp(2.0 * d[j] / sigma**2))
        assert binary_entropy(p) == pytest.approx(1.0 - j / Q, abs=1e-10)


def test_quantize_bpsk_mass_and_alphabet(w5_csi, params_q128):
    assert w5_csi.total_mass() == pytest.approx(1.0, abs=1e-9)
    assert w5_csi.nsymbols <= params_q128.mu + 1
    w5_csi.validate()


def test_quantized_capacity_below_exact_within_bin_width(csi_channel):
    c_exact = capacity_csi(csi_channel)
    for Q in (16, 64):
        wq = quantize_fading_bpsk(csi_channel, QuantizerParams(Q=Q, mu=4 * Q))
        gap = c_exact - wq.capacity()
        assert -1e-6 <= gap <= 1.0 / Q


def test_quantized_capacity_improves_with_q(csi_channel):
    caps = [
        quantize_fading_bpsk(csi_channel, QuantizerParams(Q=Q, mu=4 * Q)).capacity()
        for Q in (8, 32, 128)
    ]
    assert caps[0] < caps[1] < caps[2]


def test_quantize_rejects_wrong_mode_and_zero_noise(cdi_channel, dist5):
    with pytest.raises(ValueError):
        quantize_fading_bpsk(cdi_channel, QuantizerParams(Q=8))
    with pytest.raises(ValueError):
        quantize_fading_bpsk(FadingChannelSpec(dist5, 0.0, CSI), QuantizerParams(Q=8))


def test_slice_engine_matches_closed_form_route(csi_channel, params_q128, w5_csi):
    # same channel through the generic engine and the CDF-difference route
    wq = quantize_by_llr(CsiBpskSlices(csi_channel), params_q128)
    assert wq.capacity() == pytest.approx(w5_csi.capacity(), abs=2e-4)
    assert wq.bhattacharyya() == pytest.approx(w5_csi.bhattacharyya(), abs=2e-4)


def test_slice_engine_unit_gain_matches_awgn_oracle():
    sigma = 0.8
    wq = quantize_by_llr(UnitGainSlices(sigma), QuantizerParams(Q=96, mu=192))
    c = biawgn_capacity(sigma)
    assert 0.0 <= c - wq.capacity() <= 1.0 / 96 + 1e-6


def test_cdi_slices_capacity_gap(cdi_channel, w5_cdi):
    c_exact = capacity_cdi(cdi_channel)
    gap = c_exact - w5_cdi.capacity()
    assert -1e-6 <= gap <= 1.0 / 128


def test_cdi_quantized_below_csi_quantized(w5_csi, w5_cdi):
    assert w5_cdi.capacity() < w5_csi.capacity()
