"""Shared fixtures: the 5 dB reference channels, their quantized forms, and
the four-level partition chain most tests reuse. Session scope keeps the
expensive quantize/construct work to one run each."""

import pytest

from fadinglattice.construction import construct
from fadinglattice.fading import CDI, CSI, CdiBpskSlices, FadingChannelSpec, dist_from_snr_db, rician
from fadinglattice.partitions import PartitionChain
from fadinglattice.quantize import QuantizerParams, quantize_by_llr, quantize_fading_bpsk

SNR_DB = 5.0


def pytest_addoption(parser):
    parser.addoption(
        "--runslow",
        action="store_true",
        default=False,
        help="also run tests marked slow (hour-scale jobs)",
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(scope="session")
def dist5():
    return dist_from_snr_db(SNR_DB)


@pytest.fixture(scope="session")
def csi_channel(dist5):
    return FadingChannelSpec(dist5, 1.0, CSI)


@pytest.fixture(scope="session")
def cdi_channel(dist5):
    return FadingChannelSpec(dist5, 1.0, CDI)


@pytest.fixture(scope="session")
def rician_channel():
    return FadingChannelSpec(rician(dist_from_snr_db(SNR_DB).sigma_h, 1.0), 1.0, CSI)


@pytest.fixture(scope="session")
def params_q128():
    return QuantizerParams(Q=128, mu=256)


@pytest.fixture(scope="session")
def w5_csi(csi_channel, params_q128):
    return quantize_fading_bpsk(csi_channel, params_q128)


@pytest.fixture(scope="session")
def w5_cdi(cdi_channel, params_q128):
    return quantize_by_llr(CdiBpskSlices(cdi_channel), params_q128)


@pytest.fixture(scope="session")
def z10_csi(w5_csi):
    """Bhattacharyya profile of the CSI reference channel at N=2^10."""
    return construct(w5_csi, 10, 256)


@pytest.fixture(scope="session")
def chain_r4(dist5):
    n = 1 << 14
    return PartitionChain(1.0, 4, h_l=dist5.h_max(), h_s=n**-0.25, delta=0.25)


@pytest.fixture()
def cache_env(tmp_path, monkeypatch):
    monkeypatch.setenv("FADINGLATTICE_CACHE", str(tmp_path / "cache"))
    return str(tmp_path / "cache")
