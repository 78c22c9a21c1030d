"""Command-line front end: experiment configs, orchestration, and artifacts.

Every emitted number comes from a module operation; this layer parses and
validates configs, dispatches, and formats. Each run writes CSV artifacts
(fixed column order, 12 significant digits) plus a JSON manifest echoing the
config, so identical (config, seed, version) reruns produce byte-identical
CSV files.

Exit codes: 0 success, 1 configuration/usage error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__
from .bmsc import DiscreteBMSC
from .codec import simulate_link, SIM_CSV_COLUMNS
from .construction import construct_cached, select_frozen
from .fading import (
    CDI,
    CSI,
    RAYLEIGH,
    RICIAN,
    CdiBpskSlices,
    CsiBpskSlices,
    FadingChannelSpec,
    FadingDistribution,
    capacity_cdi,
    capacity_csi,
    dist_from_snr_db,
    ergodic_capacity_power,
)
from .lattice import (
    LATTICE_CSV_COLUMNS,
    LEVEL_CSV_COLUMNS,
    LEVEL_SIM_CSV_COLUMNS,
    build_lattice,
    lattice_report,
    simulate_lattice,
    simulate_level,
)
from .numerics import NumericalAccuracyError
from .partitions import (
    LevelChannelSlices,
    LevelFadingChannel,
    PartitionChain,
    design_chain,
    level_capacity,
)
from .quantize import QuantizerParams, quantize_by_llr
from .shaping import (
    SHAPED_CSV_COLUMNS,
    SHAPED_LEVEL_CSV_COLUMNS,
    LatticeGaussianSpec,
    build_shaped_lattice,
    empirical_power,
    level_mutual_information,
    shaped_level_channel,
    shaped_report,
)

EXIT_CONFIG = 1
EXIT_NUMERICAL = 2

M_CAP_DEFAULT = 14
M_CAP_LONG = 20

CAPACITY_CSV_COLUMNS = ["kind", "csi", "snr_db", "sigma_h", "s", "sigma", "capacity"]
QUANTIZE_CSV_COLUMNS = ["kind", "csi", "snr_db", "Q", "mu", "c_exact", "c_quantized"]
CONSTRUCT_CSV_COLUMNS = ["N", "mu", "k", "rate", "z_sum", "channel_hash"]
LATTICE_SIM_CSV_COLUMNS = [
    "N",
    "r",
    "R_C",
    "sigma",
    "trials",
    "frame_errors",
    "fer",
    "fer_lo",
    "fer_hi",
    "level_frame_errors",
    "integer_frame_errors",
    "seed",
]
MI_CSV_COLUMNS = ["level", "mi"]

FIGURE_IDS = ("fig3", "fig4", "fig5", "fig6", "fig8", "fig9")


class ConfigError(ValueError):
    """Invalid experiment configuration (exit code 1)."""


@dataclass
class ExperimentConfig:
    """One experiment: channel, quantizer, code geometry, run control.

    Fields not used by a given kind are ignored by it; validation only
    checks the fields the kind consumes.
    """

    kind: str = ""
    # channel
    dist: str = RAYLEIGH
    snr_db: float = 5.0
    sigma_h: float | None = None  # explicit scale wins over snr_db calibration
    s: float = 0.0
    sigma: float = 1.0
    csi: str = CSI
    # quantizer / construction
    Q: int = 128
    mu: int = 256
    m: int = 10
    m_list: tuple = ()
    rate: float | None = None
    rates: tuple = ()
    budget: float | None = None
    beta: float | None = None
    target: float | None = None
    # lattice geometry
    top_scale: float | None = None
    r: int | None = None
    delta: float = 0.25
    eps1: float = 1e-3
    pe: float = 1e-5
    sigma_s: float = 3.0
    # run control
    trials: int = 1000
    seed: int = 1
    zspan: int = 2
    power_frames: int = 16
    emit_z: bool = False
    emit_mi: bool = False
    long: bool = False
    output: str = "run"
    cache_dir: str | None = None

    def distribution(self) -> FadingDistribution:
        if self.sigma_h is not None:
            return FadingDistribution(self.dist, self.sigma_h, self.s)
        return dist_from_snr_db(self.snr_db, self.sigma, self.dist, self.s)

    def channel(self) -> FadingChannelSpec:
        return FadingChannelSpec(self.distribution(), self.sigma, self.csi)

    def quantizer(self) -> QuantizerParams:
        return QuantizerParams(Q=self.Q, mu=self.mu)

    def chain(self, dist) -> PartitionChain:
        if self.top_scale is not None and self.r is not None:
            # explicit geometry; design points default to the chain checks'
            # reference gains for the requested block length
            n = 1 << self.m
            return PartitionChain(self.top_scale, self.r, h_l=dist.h_max(), h_s=n ** -self.delta, delta=self.delta)
        return design_chain(dist, self.sigma, 1 << self.m, self.delta, self.eps1, self.pe)


def _positive(cfg, name):
    v = getattr(cfg, name)
    if v is None or not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
        raise ConfigError(f"{name} must be positive and finite, got {v!r}")


def _m_in_range(cfg, m):
    cap = M_CAP_LONG if cfg.long else M_CAP_DEFAULT
    if not (isinstance(m, int) and 1 <= m <= cap):
        raise ConfigError(
            f"m={m!r} outside [1, {cap}] (block lengths beyond 2^{M_CAP_DEFAULT} need --long)"
        )


def validate(cfg: ExperimentConfig):
    if cfg.dist not in (RAYLEIGH, RICIAN):
        raise ConfigError(f"dist must be {RAYLEIGH!r} or {RICIAN!r}, got {cfg.dist!r}")
    if cfg.csi not in (CSI, CDI):
        raise ConfigError(f"csi must be {CSI!r} or {CDI!r}, got {cfg.csi!r}")
    if cfg.dist == RAYLEIGH and cfg.s != 0.0:
        raise ConfigError("s (line of sight) requires dist=rician")
    if cfg.s < 0.0 or not math.isfinite(cfg.s):
        raise ConfigError(f"s must be nonnegative and finite, got {cfg.s!r}")
    if not math.isfinite(cfg.snr_db):
        raise ConfigError(f"snr_db must be finite, got {cfg.snr_db!r}")
    _positive(cfg, "sigma")
    if cfg.sigma_h is not None:
        _positive(cfg, "sigma_h")
    if cfg.Q < 2 or cfg.mu < 2:
        raise ConfigError(f"quantizer needs Q >= 2 and mu >= 2, got Q={cfg.Q}, mu={cfg.mu}")
    _m_in_range(cfg, cfg.m)
    for m in cfg.m_list:
        _m_in_range(cfg, m)
    if cfg.rate is not None and not 0.0 < cfg.rate < 1.0:
        raise ConfigError(f"rate must lie in (0, 1), got {cfg.rate!r}")
    for r in cfg.rates:
        if not 0.0 <= r < 1.0:
            raise ConfigError(f"per-level rates must lie in [0, 1), got {r!r}")
    if cfg.budget is not None:
        _positive(cfg, "budget")
    if cfg.target is not None and not 0.0 < cfg.target < 1.0:
        raise ConfigError(f"target must lie in (0, 1), got {cfg.target!r}")
    if cfg.beta is not None and not 0.0 < cfg.beta < 0.5:
        raise ConfigError(f"beta must lie in (0, 0.5), got {cfg.beta!r}")
    if cfg.top_scale is not None:
        _positive(cfg, "top_scale")
    if (cfg.top_scale is None) != (cfg.r is None):
        raise ConfigError("top_scale and r must be given together")
    if cfg.r is not None and cfg.r < 1:
        raise ConfigError(f"r must be >= 1, got {cfg.r!r}")
    if not 0.0 < cfg.delta < 0.5:
        raise ConfigError(f"delta must lie in (0, 0.5), got {cfg.delta!r}")
    _positive(cfg, "eps1")
    _positive(cfg, "pe")
    _positive(cfg, "sigma_s")
    if cfg.trials < 1:
        raise ConfigError(f"trials must be >= 1, got {cfg.trials!r}")
    if cfg.seed < 0:
        raise ConfigError(f"seed must be nonnegative, got {cfg.seed!r}")
    if cfg.zspan < 0:
        raise ConfigError(f"zspan must be nonnegative, got {cfg.zspan!r}")
    if cfg.power_frames < 1:
        raise ConfigError(f"power_frames must be >= 1, got {cfg.power_frames!r}")
    if not cfg.output:
        raise ConfigError("output path must be nonempty")
    if cfg.output.endswith(".csv"):
        # output names a stem; artifacts append their own suffixes
        cfg.output = cfg.output[:-4]
    return cfg


# --- artifact formatting -------------------------------------------------------


def _fmt(v):
    if isinstance(v, float):
        return format(v, ".12g")
    if isinstance(v, (list, tuple, np.ndarray)):
        return ";".join(_fmt(x) for x in v)
    return str(v)


def write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            if isinstance(row, dict):
                row = [row[c] for c in columns]
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def write_manifest(cfg: ExperimentConfig, outputs, t0, extras=None):
    doc = {
        "kind": cfg.kind,
        "version": __version__,
        "config": asdict(cfg),
        "outputs": [os.path.basename(p) for p in outputs],
        "wall_time_s": round(time.time() - t0, 3),
    }
    if extras:
        doc["extras"] = extras
    path = cfg.output + ".manifest.json"
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return path


def _json_default(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"not JSON serializable: {type(v)!r}")


def _ensure_parent(path):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


# --- experiment runners --------------------------------------------------------


def _capacity_value(ch: FadingChannelSpec):
    return capacity_cdi(ch) if ch.csi == CDI else capacity_csi(ch)


def _quantized_capacity(ch: FadingChannelSpec, params: QuantizerParams):
    slices = CdiBpskSlices(ch) if ch.csi == CDI else CsiBpskSlices(ch)
    return quantize_by_llr(slices, params).capacity()


def run_capacity(cfg: ExperimentConfig):
    ch = cfg.channel()
    value = _capacity_value(ch)
    row = [cfg.dist, cfg.csi, cfg.snr_db, ch.dist.sigma_h, ch.dist.s, cfg.sigma, value]
    out = write_csv(cfg.output + ".csv", CAPACITY_CSV_COLUMNS, [row])
    print(f"capacity[{cfg.csi}] {cfg.dist} @ {_fmt(cfg.snr_db)} dB = {value:.6f}")
    return [out], {}


def run_quantize(cfg: ExperimentConfig):
    ch = cfg.channel()
    exact = _capacity_value(ch)
    quant = _quantized_capacity(ch, cfg.quantizer())
    row = [cfg.dist, cfg.csi, cfg.snr_db, cfg.Q, cfg.mu, exact, quant]
    out = write_csv(cfg.output + ".csv", QUANTIZE_CSV_COLUMNS, [row])
    print(f"C = {exact:.6f}, quantized = {quant:.6f} (Q={cfg.Q})")
    return [out], {}


def _quantized_channel(cfg: ExperimentConfig) -> DiscreteBMSC:
    ch = cfg.channel()
    slices = CdiBpskSlices(ch) if ch.csi == CDI else CsiBpskSlices(ch)
    return quantize_by_llr(slices, cfg.quantizer())


def run_construct(cfg: ExperimentConfig):
    if (cfg.rate is None) == (cfg.budget is None):
        raise ConfigError("construct needs exactly one of rate/budget")
    w = _quantized_channel(cfg)
    z = construct_cached(w, cfg.m, cfg.mu, cache_dir=cfg.cache_dir)
    spec = select_frozen(z, rate=cfg.rate, budget=cfg.budget, beta=cfg.beta)
    row = [spec.n, cfg.mu, spec.k, spec.rate, spec.union_bound, w.content_hash()]
    outputs = [write_csv(cfg.output + ".csv", CONSTRUCT_CSV_COLUMNS, [row])]
    code_doc = {
        "m": spec.m,
        "mu": cfg.mu,
        "channel_hash": w.content_hash(),
        "z_values": [float(v) for v in spec.z_values],
        "frozen": [int(i) for i in spec.frozen],
    }
    if cfg.emit_z:
        code_path = cfg.output + ".code.json"
        with open(code_path, "w") as fh:
            json.dump(code_doc, fh)
            fh.write("\n")
        outputs.append(code_path)
    print(f"N={spec.n} k={spec.k} rate={spec.rate:.6f} z_sum={spec.union_bound:.6e}")
    return outputs, {"channel_hash": w.content_hash()}


def run_simulate(cfg: ExperimentConfig):
    if (cfg.rate is None) == (cfg.budget is None):
        raise ConfigError("simulate needs exactly one of rate/budget")
    ch = cfg.channel()
    w = _quantized_channel(cfg)
    z = construct_cached(w, cfg.m, cfg.mu, cache_dir=cfg.cache_dir)
    spec = select_frozen(z, rate=cfg.rate, budget=cfg.budget, beta=cfg.beta)
    res = simulate_link(ch, spec, cfg.trials, cfg.seed)
    out = write_csv(cfg.output + ".csv", SIM_CSV_COLUMNS, [res])
    print(
        f"N={res['N']} rate={res['rate']:.4f} fer={res['fer']:.3e} "
        f"[{res['fer_lo']:.3e}, {res['fer_hi']:.3e}] ({res['trials']} trials)"
    )
    return [out], {"z_sum_bound": spec.union_bound}


def _build_lattice(cfg: ExperimentConfig):
    dist = cfg.distribution()
    chain = cfg.chain(dist)
    kwargs = {}
    if cfg.rates:
        kwargs["rates"] = list(cfg.rates)
    elif cfg.budget is not None:
        kwargs["budget"] = cfg.budget
    else:
        raise ConfigError("lattice build needs rates or budget")
    if len(cfg.rates) not in (0, chain.r):
        raise ConfigError(f"need {chain.r} per-level rates, got {len(cfg.rates)}")
    return build_lattice(chain, dist, cfg.sigma, cfg.m, cfg.mu, beta=cfg.beta, **kwargs)


def run_lattice_build(cfg: ExperimentConfig):
    L = _build_lattice(cfg)
    level_rows, lattice_row = lattice_report(L)
    outputs = [
        write_csv(cfg.output + ".levels.csv", LEVEL_CSV_COLUMNS, level_rows),
        write_csv(cfg.output + ".lattice.csv", LATTICE_CSV_COLUMNS, [lattice_row]),
    ]
    print(
        f"N={L.n} r={L.chain.r} R_C={L.total_rate:.4f} "
        f"vnr_gap={lattice_row[1]:.4f} bits, bound={lattice_row[5]:.3e}"
    )
    extras = {"level_capacities": [float(c) for c in L.capacities]}
    return outputs, extras


def run_lattice_sim(cfg: ExperimentConfig):
    L = _build_lattice(cfg)
    res = simulate_lattice(L, cfg.trials, cfg.seed, zspan=cfg.zspan)
    level_rows, lattice_row = lattice_report(L)
    outputs = [
        write_csv(cfg.output + ".levels.csv", LEVEL_CSV_COLUMNS, level_rows),
        write_csv(cfg.output + ".lattice.csv", LATTICE_CSV_COLUMNS, [lattice_row]),
        write_csv(cfg.output + ".sim.csv", LATTICE_SIM_CSV_COLUMNS, [res]),
    ]
    print(f"N={res['N']} R_C={res['R_C']:.4f} fer={res['fer']:.3e} ({res['trials']} trials)")
    extras = {"level_capacities": [float(c) for c in L.capacities]}
    return outputs, extras


def _shaped_geometry(cfg: ExperimentConfig):
    if cfg.top_scale is None or cfg.r is None:
        raise ConfigError("shaped-bound needs explicit top_scale and r")
    dist = cfg.distribution()
    n = 1 << (max(cfg.m_list) if cfg.m_list else cfg.m)
    chain = PartitionChain(cfg.top_scale, cfg.r, h_l=dist.h_max(), h_s=n ** -cfg.delta, delta=cfg.delta)
    gauss = LatticeGaussianSpec(cfg.top_scale, cfg.sigma_s)
    return dist, chain, gauss


def run_shaped_bound(cfg: ExperimentConfig):
    if (cfg.budget is None) == (cfg.target is None):
        raise ConfigError("shaped-bound needs exactly one of budget/target")
    dist, chain, gauss = _shaped_geometry(cfg)
    params = cfg.quantizer()
    m_list = list(cfg.m_list) if cfg.m_list else [cfg.m]
    channels = [
        shaped_level_channel(gauss, chain, ell, dist, cfg.sigma, params)
        for ell in range(1, chain.r + 1)
    ]
    total_rows = []
    level_rows = []
    outputs = []
    for m in m_list:
        S = build_shaped_lattice(
            chain, gauss, dist, cfg.sigma, m, params,
            budget=cfg.budget,
            target=cfg.target,
            channels=channels,
            cache_dir=cfg.cache_dir,
        )
        lv_rows, total_row = shaped_report(S)
        power = empirical_power(S, cfg.power_frames, cfg.seed)
        total_rows.append(total_row + [power])
        level_rows.extend([[S.n] + row for row in lv_rows])
        print(
            f"N={S.n} R={S.total_rate:.4f} bound={total_row[4]:.3e} power={power:.3f}"
        )
    outputs.append(
        write_csv(cfg.output + ".csv", SHAPED_CSV_COLUMNS + ["empirical_power"], total_rows)
    )
    outputs.append(
        write_csv(cfg.output + ".levels.csv", ["N"] + SHAPED_LEVEL_CSV_COLUMNS, level_rows)
    )
    extras = {
        "power": gauss.power,
        "ergodic_capacity": ergodic_capacity_power(dist, cfg.sigma, gauss.power),
    }
    if cfg.emit_mi:
        mi_rows = [
            [ell, level_mutual_information(gauss, chain, ell, dist, cfg.sigma)]
            for ell in range(1, chain.r + 1)
        ]
        outputs.append(write_csv(cfg.output + ".mi.csv", MI_CSV_COLUMNS, mi_rows))
    return outputs, extras


RUNNERS = {
    "capacity": run_capacity,
    "quantize": run_quantize,
    "construct": run_construct,
    "simulate": run_simulate,
    "lattice-build": run_lattice_build,
    "lattice-sim": run_lattice_sim,
    "shaped-bound": run_shaped_bound,
}


# --- figure bundles ------------------------------------------------------------


def reproduce(figure, out_dir, overrides):
    os.makedirs(out_dir, exist_ok=True)
    base = dict(overrides)
    base.setdefault("output", os.path.join(out_dir, figure))
    if figure == "fig3":
        return _reproduce_fig3(base)
    if figure in ("fig4", "fig5", "fig6"):
        return _reproduce_fer(figure, base)
    if figure == "fig8":
        return _reproduce_fig8(base)
    if figure == "fig9":
        return _reproduce_fig9(base)
    raise ConfigError(f"unknown figure id {figure!r}; choose from {', '.join(FIGURE_IDS)}")


def _reproduce_fig3(base):
    # quantized-vs-exact capacity across the SNR grid, both receiver modes
    cfg = validate(_config_from(dict(base, kind="quantize")))
    t0 = time.time()
    params = cfg.quantizer()
    rows = []
    for csi in (CSI, CDI):
        for snr in [float(v) for v in range(0, 11)]:
            point = _config_from(dict(base, kind="quantize", snr_db=snr, csi=csi))
            ch = point.channel()
            rows.append([point.dist, csi, snr, cfg.Q, cfg.mu, _capacity_value(ch), _quantized_capacity(ch, params)])
            print(f"fig3 {csi} {snr:.0f} dB: exact={rows[-1][-2]:.6f} quantized={rows[-1][-1]:.6f}")
    outputs = [write_csv(cfg.output + ".csv", QUANTIZE_CSV_COLUMNS, rows)]
    outputs.append(write_manifest(cfg, outputs, t0))
    return outputs


_FER_SETTINGS = {
    # figure id -> (dist, s, csi)
    "fig4": (RAYLEIGH, 0.0, CSI),
    "fig5": (RAYLEIGH, 0.0, CDI),
    "fig6": (RICIAN, 1.0, CSI),
}


def _reproduce_fer(figure, base):
    dist, s, csi = _FER_SETTINGS[figure]
    cfg = validate(_config_from(dict(base, kind="simulate", dist=dist, s=s, csi=csi)))
    t0 = time.time()
    m_list = list(cfg.m_list) if cfg.m_list else ([10, 12, 14] if cfg.long else [10, 12])
    rates = list(cfg.rates) if cfg.rates else [0.40, 0.45, 0.50, 0.55]
    ch = cfg.channel()
    w = _quantized_channel(cfg)
    rows = []
    for m in m_list:
        _m_in_range(cfg, m)
        z = construct_cached(w, m, cfg.mu, cache_dir=cfg.cache_dir)
        for rate in rates:
            spec = select_frozen(z, rate=rate)
            res = simulate_link(ch, spec, cfg.trials, cfg.seed)
            rows.append(res)
            print(f"{figure} N=2^{m} rate={rate:.2f}: fer={res['fer']:.3e}")
    outputs = [write_csv(cfg.output + ".csv", SIM_CSV_COLUMNS, rows)]
    outputs.append(write_manifest(cfg, outputs, t0))
    return outputs


def _reproduce_fig8(base):
    # per-quotient-level FER/BER curves; --rates are fractions of the level
    # capacity here so every level gets a comparable waterfall
    defaults = dict(
        kind="lattice-sim",
        sigma_h=1.2575,
        sigma=1.0,
        top_scale=1.0,
        r=4,
        m=12,
    )
    defaults.update(base)
    cfg = validate(_config_from(defaults))
    if cfg.long and "m" not in base:
        cfg.m = 14
    _m_in_range(cfg, cfg.m)
    fractions = list(cfg.rates) if cfg.rates else [0.70, 0.80, 0.90]
    t0 = time.time()
    dist = cfg.distribution()
    chain = cfg.chain(dist)
    params = cfg.quantizer()
    rows = []
    capacities = []
    for ell in range(1, chain.r + 1):
        lc = LevelFadingChannel(chain, ell, cfg.sigma, dist)
        cap = level_capacity(lc)
        capacities.append(cap)
        w = quantize_by_llr(LevelChannelSlices(lc), params)
        z = construct_cached(w, cfg.m, cfg.mu, cache_dir=cfg.cache_dir)
        for frac in fractions:
            spec = select_frozen(z, rate=frac * cap)
            res = simulate_level(chain, ell, cfg.sigma, dist, spec, cfg.trials, cfg.seed)
            rows.append(res)
            print(
                f"fig8 level {ell} rate={res['rate']:.4f} ({frac:.2f} of C={cap:.4f}):"
                f" fer={res['fer']:.3e}"
            )
    outputs = [write_csv(cfg.output + ".csv", LEVEL_SIM_CSV_COLUMNS, rows)]
    outputs.append(write_manifest(cfg, outputs, t0, {"level_capacities": capacities}))
    return outputs


def _reproduce_fig9(base):
    defaults = dict(
        kind="shaped-bound",
        sigma_h=1.2575,
        sigma=1.0,
        sigma_s=3.0,
        top_scale=1.0,
        r=5,
        target=1e-5,
        mu=128,
    )
    defaults.update(base)
    cfg = validate(_config_from(defaults))
    if not cfg.m_list:
        cfg.m_list = (10, 11, 12, 13, 14, 20) if cfg.long else (10, 11, 12, 13, 14)
        for m in cfg.m_list:
            _m_in_range(cfg, m)
    t0 = time.time()
    outputs, extras = run_shaped_bound(cfg)
    outputs.append(write_manifest(cfg, outputs, t0, extras))
    return outputs


# --- argument parsing ----------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    # usage problems are configuration errors, not numerical ones
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _add_common(p):
    p.add_argument("--config", help="JSON file of config fields; flags override it")
    p.add_argument("--output", help="artifact path stem (default: run)")
    p.add_argument("--cache-dir", dest="cache_dir", help="construction cache directory (default: $FADINGLATTICE_CACHE)")
    p.add_argument("--seed", type=int)
    p.add_argument("--long", action="store_true", default=None, help="allow block lengths up to 2^20")


def _add_channel(p):
    p.add_argument("--dist", choices=[RAYLEIGH, RICIAN])
    p.add_argument("--snr-db", dest="snr_db", type=float)
    p.add_argument("--sigma-h", dest="sigma_h", type=float, help="explicit gain scale (overrides --snr-db)")
    p.add_argument("--s", type=float, help="Rician line-of-sight amplitude")
    p.add_argument("--sigma", type=float)
    p.add_argument("--csi", choices=[CSI, CDI])


def _add_quantizer(p):
    p.add_argument("--Q", type=int)
    p.add_argument("--mu", type=int)


def _int_list(text):
    return tuple(int(v) for v in text.split(","))


def _float_list(text):
    return tuple(float(v) for v in text.split(","))


def build_parser():
    parser = _Parser(prog="fadinglattice", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="kind", required=True)

    p = sub.add_parser("capacity", help="exact channel capacity")
    _add_common(p)
    _add_channel(p)

    p = sub.add_parser("quantize", help="quantized vs exact capacity at one SNR")
    _add_common(p)
    _add_channel(p)
    _add_quantizer(p)

    p = sub.add_parser("construct", help="quantize, polarize, and select a code")
    _add_common(p)
    _add_channel(p)
    _add_quantizer(p)
    p.add_argument("--m", type=int)
    p.add_argument("--rate", type=float)
    p.add_argument("--budget", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--emit-z", dest="emit_z", action="store_true", default=None,
                   help="also write the code spec JSON artifact")

    p = sub.add_parser("simulate", help="Monte Carlo SC link simulation")
    _add_common(p)
    _add_channel(p)
    _add_quantizer(p)
    p.add_argument("--m", type=int)
    p.add_argument("--rate", type=float)
    p.add_argument("--budget", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--trials", type=int)

    for name in ("lattice-build", "lattice-sim"):
        p = sub.add_parser(name, help="multilevel lattice " + name.split("-")[1])
        _add_common(p)
        _add_channel(p)
        _add_quantizer(p)
        p.add_argument("--m", type=int)
        p.add_argument("--top-scale", dest="top_scale", type=float)
        p.add_argument("--r", type=int)
        p.add_argument("--delta", type=float)
        p.add_argument("--eps1", type=float)
        p.add_argument("--pe", type=float)
        p.add_argument("--rates", type=_float_list, help="comma-separated per-level rates")
        p.add_argument("--budget", type=float)
        p.add_argument("--beta", type=float)
        if name == "lattice-sim":
            p.add_argument("--trials", type=int)
            p.add_argument("--zspan", type=int)

    p = sub.add_parser("shaped-bound", help="shaped union bound across block lengths")
    _add_common(p)
    _add_channel(p)
    _add_quantizer(p)
    p.add_argument("--m", type=int)
    p.add_argument("--m-list", dest="m_list", type=_int_list, help="comma-separated exponents")
    p.add_argument("--top-scale", dest="top_scale", type=float)
    p.add_argument("--r", type=int)
    p.add_argument("--sigma-s", dest="sigma_s", type=float)
    p.add_argument("--budget", type=float)
    p.add_argument("--target", type=float, help="bound target; rate is maximized against it")
    p.add_argument("--power-frames", dest="power_frames", type=int)
    p.add_argument("--emit-mi", dest="emit_mi", action="store_true", default=None)

    p = sub.add_parser("reproduce", help="desk-scale figure bundles")
    p.add_argument("figure", choices=FIGURE_IDS)
    p.add_argument("--output-dir", dest="output_dir", default="artifacts")
    _add_common(p)
    p.add_argument("--trials", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--m-list", dest="m_list", type=_int_list)
    p.add_argument("--rates", type=_float_list)
    p.add_argument("--mu", type=int)
    return parser


def _config_from(values) -> ExperimentConfig:
    cfg = ExperimentConfig()
    for key, val in values.items():
        if not hasattr(cfg, key):
            raise ConfigError(f"unknown config field {key!r}")
        if val is not None:
            setattr(cfg, key, tuple(val) if isinstance(val, list) else val)
    return cfg


def _load_config_file(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc}")


def _assemble(args) -> ExperimentConfig:
    values = {}
    path = getattr(args, "config", None)
    if path:
        values.update(_load_config_file(path))
    for key, val in vars(args).items():
        if key in ("config", "figure", "output_dir") or val is None:
            continue
        values[key] = val
    return validate(_config_from(values))


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.kind == "reproduce":
            overrides = dict(_load_config_file(args.config)) if args.config else {}
            overrides.update(
                (k, v)
                for k, v in vars(args).items()
                if k not in ("kind", "config", "figure", "output_dir") and v is not None
            )
            outputs = reproduce(args.figure, args.output_dir, overrides)
            print("wrote " + ", ".join(outputs))
            return 0
        cfg = _assemble(args)
        _ensure_parent(cfg.output)
        t0 = time.time()
        runner = RUNNERS[cfg.kind]
        outputs, extras = runner(cfg)
        outputs.append(write_manifest(cfg, outputs, t0, extras))
        print("wrote " + ", ".join(outputs))
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalAccuracyError, ValueError, FloatingPointError, MemoryError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
