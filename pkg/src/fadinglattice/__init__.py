"""Polar coding toolkit for independent fading channels.

Submodules cover fading distributions and their BPSK capacities, discrete
symmetric-channel quantization, polar code construction and SC decoding,
one-dimensional partition chains, multilevel lattice assembly, and
Gaussian-shaped lattice transmission.  The command line entry point lives
in :mod:`fadinglattice.cli`.
"""

__version__ = "0.1.0"

from .numerics import (
    NumericalAccuracyError,
    binary_entropy,
    inv_binary_entropy,
    wilson_interval,
    wrapped_gaussian_entropy,
    wrapped_gaussian_pdf,
)
from .fading import (
    CDI,
    CSI,
    RAYLEIGH,
    RICIAN,
    FadingChannelSpec,
    FadingDistribution,
    capacity_cdi,
    capacity_csi,
    dist_from_snr_db,
    ergodic_capacity_power,
    poltyrev_capacity,
    rayleigh,
    rician,
)
from .bmsc import DiscreteBMSC, bec, bsc, bhattacharyya, capacity, degrading_merge
from .quantize import QuantizerParams, quantize_by_llr, quantize_fading_bpsk
from .construction import (
    PolarCodeSpec,
    construct,
    construct_cached,
    select_frozen,
)
from .codec import (
    CdiLlrTable,
    encode,
    llr_cdi,
    llr_csi,
    polar_transform,
    sc_decode,
    simulate_link,
    trial_rng,
)
from .partitions import (
    LevelFadingChannel,
    PartitionChain,
    design_chain,
    level_capacity,
    mod_capacity,
)
from .lattice import (
    PolarLattice,
    build_lattice,
    encode_lattice,
    lattice_report,
    multistage_decode,
    simulate_lattice,
    union_bound,
    vnr_gap,
)
from .shaping import (
    LatticeGaussianSpec,
    MmseParams,
    ShapedPolarLattice,
    build_shaped_lattice,
    discrete_gaussian_pmf,
    empirical_power,
    flatness_factor,
    mi_lower_bound,
    shaped_encode,
    shaped_multistage_decode,
    shaped_rate_for_bound,
    shaped_union_bound,
)

__all__ = [
    "__version__",
    "NumericalAccuracyError",
    "binary_entropy",
    "inv_binary_entropy",
    "wilson_interval",
    "wrapped_gaussian_entropy",
    "wrapped_gaussian_pdf",
    "CDI",
    "CSI",
    "RAYLEIGH",
    "RICIAN",
    "FadingChannelSpec",
    "FadingDistribution",
    "capacity_cdi",
    "capacity_csi",
    "dist_from_snr_db",
    "ergodic_capacity_power",
    "poltyrev_capacity",
    "rayleigh",
    "rician",
    "DiscreteBMSC",
    "bec",
    "bsc",
    "bhattacharyya",
    "capacity",
    "degrading_merge",
    "QuantizerParams",
    "quantize_by_llr",
    "quantize_fading_bpsk",
    "PolarCodeSpec",
    "construct",
    "construct_cached",
    "select_frozen",
    "CdiLlrTable",
    "encode",
    "llr_cdi",
    "llr_csi",
    "polar_transform",
    "sc_decode",
    "simulate_link",
    "trial_rng",
    "LevelFadingChannel",
    "PartitionChain",
    "design_chain",
    "level_capacity",
    "mod_capacity",
    "PolarLattice",
    "build_lattice",
    "encode_lattice",
    "lattice_report",
    "multistage_decode",
    "simulate_lattice",
    "union_bound",
    "vnr_gap",
    "LatticeGaussianSpec",
    "MmseParams",
    "ShapedPolarLattice",
    "build_shaped_lattice",
    "discrete_gaussian_pmf",
    "empirical_power",
    "flatness_factor",
    "mi_lower_bound",
    "shaped_encode",
    "shaped_multistage_decode",
    "shaped_rate_for_bound",
    "shaped_union_bound",
]
