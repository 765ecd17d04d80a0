"""Experiment orchestration: config ingestion, Monte Carlo execution of the
non-coherent and coherent schemes, metric aggregation, and CSV persistence.

A (config, seed) pair reproduces a byte-identical CSV regardless of the
worker count: every trial owns the substream RngStream(seed, stream_id) and
aggregation reduces per-trial partial results in fixed index order.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from functools import partial
from typing import Optional

import numpy as np

from rislink import cds as cds_mod
from rislink import ncds as ncds_mod
from rislink import ris as ris_mod
from rislink import sep as sep_mod
from rislink.channel import CHANNEL_MODELS, ChannelRealization, Scenario, average_gains, gen_geometric, gen_iid
from rislink.mathkit import RngStream

SCHEMES = ("ncds", "cds", "both")

# stream-id layout: trial + point and scheme offsets keep every trial unique
_MAX_TRIALS = 1 << 20
_SCHEME_INDEX = {"ncds": 0, "cds": 1}

RECORD_FIELDS = (
    "scheme", "channel_model", "sweep_name", "sweep_value",
    "px_dbw", "m", "b", "speed_kmh", "constellation", "phase_bits",
    "sinr_db_analytic", "sinr_db_mc", "sinr_db_mc_stderr",
    "sep_analytic", "sep_mc", "sep_mc_stderr",
    "eta", "trials", "symbols", "seed", "status",
)

EFFICIENCY_FIELDS = ("m", "speed_kmh", "n_c", "eta_c")


@dataclass
class MetricsRecord:
    """One operating point's analytic and empirical metrics (one CSV row)."""

    scheme: str
    channel_model: str
    sweep_name: str
    sweep_value: float
    px_dbw: float
    m: int
    b: int
    speed_kmh: float
    constellation: int
    phase_bits: Optional[int]
    sinr_db_analytic: float
    sinr_db_mc: float
    sinr_db_mc_stderr: float
    sep_analytic: float
    sep_mc: float
    sep_mc_stderr: float
    eta: float
    trials: int
    symbols: int
    seed: int
    status: str = "ok"

    def row(self) -> list:
        return [getattr(self, name) for name in RECORD_FIELDS]


@dataclass
class ExperimentConfig:
    """Everything needed to run one sweep: scenario, scheme, sweep, seeding."""

    scenario: Scenario = field(default_factory=Scenario)
    scheme: str = "ncds"
    channel_model: str = "iid"
    constellation: int = 4
    phase_bits: Optional[int] = None
    sweep_name: str = "px_dbw"
    sweep_values: tuple = (0.0,)
    trials: int = 100
    seed: int = 1
    output_path: str = "results.csv"
    workers: int = 1
    ris_per_frame: bool = True
    ncds_domain: str = "time"
    iid_flat_in_k: bool = False
    signed_doppler: bool = False
    cds_data_symbols: int = 64
    cds_energy_penalty: bool = True
    cds_max_iters: int = 20
    cds_tol: float = 1e-6

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.channel_model not in CHANNEL_MODELS:
            raise ValueError(f"unknown channel model {self.channel_model!r}")
        if len(self.sweep_values) == 0:
            raise ValueError("sweep values must be non-empty")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


# config-file keys -> ExperimentConfig attributes (scenario.* keys map onto
# Scenario fields); anything else is a hard error
_CONFIG_KEYS = {
    "scheme": ("scheme", str),
    "channel": ("channel_model", str),
    "constellation": ("constellation", int),
    "phase_bits": ("phase_bits", int),
    "trials": ("trials", int),
    "seed": ("seed", int),
    "out": ("output_path", str),
    "workers": ("workers", int),
    "sweep.name": ("sweep_name", str),
    "sweep.values": ("sweep_values", "floats"),
    "ris.per_frame": ("ris_per_frame", bool),
    "ncds.domain": ("ncds_domain", str),
    "iid.flat_in_k": ("iid_flat_in_k", bool),
    "doppler.signed": ("signed_doppler", bool),
    "cds.data_symbols": ("cds_data_symbols", int),
    "cds.energy_penalty": ("cds_energy_penalty", bool),
    "cds.max_iters": ("cds_max_iters", int),
    "cds.tol": ("cds_tol", float),
}

_SCENARIO_FIELDS = {f.name: f for f in fields(Scenario)}


def _parse_value(raw: str, kind):
    raw = raw.strip()
    if kind is bool:
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if kind == "floats":
        return tuple(float(v) for v in raw.split(","))
    return kind(raw)


def parse_config_text(text: str, base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    """Parse the flat key=value experiment format (dotted section names).

    Unknown keys are hard errors so misspelled parameters never silently
    fall back to defaults.  '#' starts a comment.
    """
    cfg_kwargs = {}
    scenario_kwargs = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key.startswith("scenario."):
            name = key[len("scenario."):]
            if name not in _SCENARIO_FIELDS:
                raise ValueError(f"line {lineno}: unknown scenario field {name!r}")
            if name in ("bs_pos", "ris_pos", "ue_pos"):
                scenario_kwargs[name] = tuple(float(v) for v in raw.split(","))
            else:
                kind = type(getattr(Scenario(), name))
                scenario_kwargs[name] = _parse_value(raw, kind)
        elif key in _CONFIG_KEYS:
            attr, kind = _CONFIG_KEYS[key]
            cfg_kwargs[attr] = _parse_value(raw, kind)
        else:
            raise ValueError(f"line {lineno}: unknown configuration key {key!r}")

    if base is None:
        base = ExperimentConfig()
    scenario = replace(base.scenario, **scenario_kwargs) if scenario_kwargs else base.scenario
    return replace(base, scenario=scenario, **cfg_kwargs)


def load_config(path: str, base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read(), base)


def _near_square(n: int) -> tuple[int, int]:
    a = int(math.isqrt(n))
    while n % a:
        a -= 1
    return a, n // a


def apply_sweep(scenario: Scenario, name: str, value) -> Scenario:
    """Return the scenario moved to one sweep coordinate."""
    if name == "M":
        mh, mv = _near_square(int(value))
        return replace(scenario, M_h=mh, M_v=mv)
    if name == "B":
        bh, bv = _near_square(int(value))
        return replace(scenario, B_h=bh, B_v=bv)
    if name in {f.name for f in fields(Scenario)}:
        return replace(scenario, **{name: value})
    raise ValueError(f"unknown sweep parameter {name!r}")


def _stream_id(point_index: int, scheme: str, trial: int) -> int:
    return (point_index * len(_SCHEME_INDEX) + _SCHEME_INDEX[scheme]) * _MAX_TRIALS + trial


def _gen_channel(cfg: ExperimentConfig, scn: Scenario, rng: RngStream) -> ChannelRealization:
    if cfg.channel_model == "iid":
        return gen_iid(scn, rng, flat_in_k=cfg.iid_flat_in_k,
                       signed_doppler=cfg.signed_doppler)
    return gen_geometric(scn, rng, signed_doppler=cfg.signed_doppler)


def _db(x: float) -> float:
    if not (x > 0) or not math.isfinite(x):
        return math.nan
    return 10.0 * math.log10(x)


# ---------------------------------------------------------------------------
# NCDS execution

def _ncds_trial(cfg: ExperimentConfig, scn: Scenario, point_index: int, trial: int):
    """One frame: returns (errors, symbols, accumulator row inputs, geo moment fields)."""
    rng = RngStream(cfg.seed, _stream_id(point_index, "ncds", trial))
    channel = _gen_channel(cfg, scn, rng)
    ris_cfg = ris_mod.random_config(scn.M, scn.N, rng, per_frame=cfg.ris_per_frame)
    if cfg.phase_bits is not None:
        ris_cfg = ris_mod.quantize_config(ris_cfg, cfg.phase_bits)
    q = ris_mod.cascade_frame(channel.H, channel.g, ris_cfg)      # (K, N, B)

    const = ncds_mod.dpsk_constellation(cfg.constellation)
    idx = rng.generator.integers(0, cfg.constellation, size=(scn.K, scn.N))
    idx[:, 0] = 0
    s = const[idx]
    x = ncds_mod.diff_encode(s, scn.px, domain=cfg.ncds_domain)
    v = rng.generator.normal(size=(scn.K, scn.N, scn.B)) \
        + 1j * rng.generator.normal(size=(scn.K, scn.N, scn.B))
    v *= math.sqrt(scn.sigma_v2 / 2.0)
    y = q * x[:, :, None] + v

    z = ncds_mod.diff_decode_frame(y, scn.M, scn.B)
    dec, _ = ncds_mod.decide_psk_grid(z, cfg.constellation)
    errors = int(np.count_nonzero(dec != idx[:, 1:]))
    n_sym = dec.size

    i1, i2, i3, i4 = ncds_mod.decompose_terms(
        q[:, :-1], q[:, 1:], x[:, :-1], x[:, 1:], v[:, :-1], v[:, 1:])
    terms = (i1.ravel(), i2.ravel(), i3.ravel(), i4.ravel(), s[:, 1:].ravel())

    geo_fields = None
    if cfg.channel_model == "geometric":
        mg = ncds_mod.moments_geometric(channel, scn)
        geo_fields = np.array([mg.e_i1_sq, mg.e_i2_sq, mg.e_i3_sq, mg.e_i4_sq, mg.e_s_i1])
    return errors, n_sym, terms, geo_fields


def run_ncds_point(cfg: ExperimentConfig, point_value, point_index: int = 0) -> MetricsRecord:
    """Monte Carlo + closed-form metrics for the non-coherent scheme at one point."""
    scn = apply_sweep(cfg.scenario, cfg.sweep_name, point_value)
    sh2, sg2 = average_gains(scn, cfg.channel_model)
    gain = sh2 * sg2

    acc = ncds_mod.MomentAccumulator()
    errors = 0
    n_sym = 0
    geo_sum = np.zeros(5)
    outs = _run_trials(partial(_ncds_trial, cfg, scn, point_index),
                       cfg.trials, cfg.workers)
    for trial, (e, n, terms, geo_fields) in enumerate(outs):
        errors += e
        n_sym += n
        acc.add(trial, *terms)
        if geo_fields is not None:
            geo_sum += geo_fields

    emp = acc.finalize(scn.B, scn.M, scn.px, gain)
    sep_mc, sep_se = sep_mod.sep_from_counts(errors, n_sym)

    status = "ok"
    if cfg.channel_model == "iid":
        analytic = ncds_mod.moments_iid(scn.B, scn.M, sh2, sg2, scn.px, scn.sigma_v2)
    else:
        g1, g2, g3, g4, gs = geo_sum / cfg.trials
        analytic = ncds_mod.moments_from_fields(g1, g2, g3, g4, gs, scn.B, scn.M, gain)
    try:
        model = sep_mod.build_pdf_model(analytic, cfg.channel_model, scn.B, cfg.constellation)
        sep_an = sep_mod.sep_analytic(model).pe
    except ValueError:
        sep_an = math.nan
        status = "analytic_breakdown"
    if not math.isfinite(analytic.sinr):
        status = "analytic_breakdown"

    se_db = 10.0 / math.log(10.0) * emp.sinr_stderr / emp.sinr \
        if math.isfinite(emp.sinr) and emp.sinr > 0 else math.nan
    return MetricsRecord(
        scheme="ncds", channel_model=cfg.channel_model, sweep_name=cfg.sweep_name,
        sweep_value=point_value, px_dbw=scn.px_dbw, m=scn.M, b=scn.B,
        speed_kmh=scn.speed_kmh, constellation=cfg.constellation,
        phase_bits=cfg.phase_bits,
        sinr_db_analytic=_db(analytic.sinr), sinr_db_mc=_db(emp.sinr),
        sinr_db_mc_stderr=se_db, sep_analytic=sep_an, sep_mc=sep_mc,
        sep_mc_stderr=sep_se, eta=1.0, trials=cfg.trials, symbols=n_sym,
        seed=cfg.seed, status=status)


# ---------------------------------------------------------------------------
# CDS execution

def _cds_trial(cfg: ExperimentConfig, scn: Scenario, px_eff: float,
               point_index: int, trial: int):
    """One sounding + data frame of the coherent baseline."""
    rng = RngStream(cfg.seed, _stream_id(point_index, "cds", trial))
    channel = _gen_channel(cfg, scn, rng)
    est = cds_mod.sound_cascaded(channel, scn, rng)
    sol = cds_mod.optimize_frame(est, cfg.cds_max_iters, cfg.cds_tol, rng)
    phases = np.exp(1j * sol.psi)

    # true cascade under the chosen phases for the data portion of the frame
    q = np.einsum("kbm,knm,m->knb", channel.H, channel.g[:, scn.M:, :], phases,
                  optimize=True)                                   # (K, Nd, B)
    n_data = q.shape[1]
    const = ncds_mod.dpsk_constellation(cfg.constellation)
    idx = rng.generator.integers(0, cfg.constellation, size=(scn.K, n_data))
    x = math.sqrt(px_eff) * const[idx]
    v = rng.generator.normal(size=q.shape) + 1j * rng.generator.normal(size=q.shape)
    v *= math.sqrt(scn.sigma_v2 / 2.0)
    y = q * x[:, :, None] + v

    # equalize by the estimated post-coded channel
    d = np.einsum("kb,kmb,m->k", sol.w.conj(), est.c_hat, phases)   # (K,)
    zw = np.einsum("kb,knb->kn", sol.w.conj(), y)
    degenerate = np.abs(d) < 1e-300
    d_safe = np.where(degenerate, 1.0, d)
    z = zw / (math.sqrt(px_eff) * d_safe[:, None])
    dec, _ = ncds_mod.decide_psk_grid(z, cfg.constellation)
    errors = int(np.count_nonzero(dec != idx))

    # realized post-combining SNR against the true cascade at the first data symbol
    q0 = q[:, 0, :]
    wq = np.einsum("kb,kb->k", sol.w.conj(), q0)
    wn = np.linalg.norm(sol.w, axis=1)
    gain = np.abs(wq) ** 2 / np.maximum(wn, 1e-300) ** 2
    if scn.sigma_v2 == 0.0:
        return errors, dec.size, math.inf
    return errors, dec.size, float(np.mean((px_eff / scn.sigma_v2) * gain))


def run_cds_point(cfg: ExperimentConfig, point_value, point_index: int = 0) -> MetricsRecord:
    """Monte Carlo metrics for the coherent baseline at one sweep point.

    Sounding occupies the first M symbol periods; the efficiency factor from
    the coherence model is applied as an energy penalty on data symbols when
    configured.  A vanishing efficiency emits the saturated-error sentinel
    without simulating.
    """
    scn = apply_sweep(cfg.scenario, cfg.sweep_name, point_value)
    scn = replace(scn, N=scn.M + cfg.cds_data_symbols)
    n_c = cds_mod.calibrated_coherence_symbols(scn.speed_kmh)
    eta = cds_mod.scheme_efficiency("cds", scn.M, n_c)

    base = dict(
        scheme="cds", channel_model=cfg.channel_model, sweep_name=cfg.sweep_name,
        sweep_value=point_value, px_dbw=scn.px_dbw, m=scn.M, b=scn.B,
        speed_kmh=scn.speed_kmh, constellation=cfg.constellation,
        phase_bits=cfg.phase_bits, sinr_db_analytic=math.nan,
        sep_analytic=math.nan, eta=eta, trials=cfg.trials, seed=cfg.seed)
    if eta == 0.0:
        return MetricsRecord(sinr_db_mc=math.nan, sinr_db_mc_stderr=math.nan,
                             sep_mc=1.0, sep_mc_stderr=0.0, symbols=0,
                             status="no_coherence_window", **base)

    px_eff = scn.px * eta if cfg.cds_energy_penalty else scn.px
    errors = 0
    n_sym = 0
    snrs = np.zeros(cfg.trials)
    outs = _run_trials(partial(_cds_trial, cfg, scn, px_eff, point_index),
                       cfg.trials, cfg.workers)
    for trial, (e, n, snr) in enumerate(outs):
        errors += e
        n_sym += n
        snrs[trial] = snr

    sep_mc, sep_se = sep_mod.sep_from_counts(errors, n_sym)
    snr_mean = float(np.sum(snrs)) / cfg.trials
    if np.all(np.isfinite(snrs)) and snr_mean > 0:
        snr_se = float(np.std(snrs)) / math.sqrt(cfg.trials)
        se_db = 10.0 / math.log(10.0) * snr_se / snr_mean
    else:
        se_db = math.nan
    return MetricsRecord(sinr_db_mc=_db(snr_mean), sinr_db_mc_stderr=se_db,
                         sep_mc=sep_mc, sep_mc_stderr=sep_se, symbols=n_sym,
                         status="ok", **base)


# ---------------------------------------------------------------------------
# sweeps, CSV, reports

def _run_trials(fn, n_trials: int, workers: int) -> list:
    """Run fn(trial) for trial 0..n-1; results come back in trial order."""
    if workers <= 1:
        return [fn(t) for t in range(n_trials)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(n_trials)))


def run_sweep(cfg: ExperimentConfig) -> list[MetricsRecord]:
    """All (scheme x sweep value) records, persisted to the configured CSV."""
    _check_writable(cfg.output_path)
    schemes = ("ncds", "cds") if cfg.scheme == "both" else (cfg.scheme,)
    records = []
    for point_index, value in enumerate(cfg.sweep_values):
        for scheme in schemes:
            if scheme == "ncds":
                records.append(run_ncds_point(cfg, value, point_index))
            else:
                records.append(run_cds_point(cfg, value, point_index))
    write_records(cfg.output_path, records)
    return records


def _check_writable(path: str):
    parent = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(parent) or not os.access(parent, os.W_OK):
        raise ValueError(f"output path is not writable: {path}")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, np.integer):
        return str(int(x))
    return str(x)


def write_records(path: str, records: list[MetricsRecord]):
    """UTF-8 CSV with a header row and a fixed, documented column order."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RECORD_FIELDS)
        for rec in records:
            writer.writerow([_fmt(v) for v in rec.row()])


def write_efficiency_table(path: str, rows: Optional[list[dict]] = None) -> list[dict]:
    """Efficiency-factor grid as CSV (one row per (M, speed) cell)."""
    if rows is None:
        rows = cds_mod.efficiency_table()
    _check_writable(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(EFFICIENCY_FIELDS)
        for r in rows:
            writer.writerow([_fmt(r[k]) for k in EFFICIENCY_FIELDS])
    return rows


def validate_moments(cfg: ExperimentConfig, point_value=None) -> dict:
    """Closed-form vs Monte Carlo moment report at one operating point.

    Returns relative errors for every moment; purely diagnostic (the
    geometric closed forms are approximations outside their few-ray regime).
    """
    value = cfg.sweep_values[0] if point_value is None else point_value
    scn = apply_sweep(cfg.scenario, cfg.sweep_name, value)
    sh2, sg2 = average_gains(scn, cfg.channel_model)
    gain = sh2 * sg2

    acc = ncds_mod.MomentAccumulator()
    geo_sum = np.zeros(5)
    for trial in range(cfg.trials):
        _, _, terms, geo_fields = _ncds_trial(cfg, scn, 0, trial)
        acc.add(trial, *terms)
        if geo_fields is not None:
            geo_sum += geo_fields
    emp = acc.finalize(scn.B, scn.M, scn.px, gain)
    if cfg.channel_model == "iid":
        ana = ncds_mod.moments_iid(scn.B, scn.M, sh2, sg2, scn.px, scn.sigma_v2)
    else:
        ana = ncds_mod.moments_from_fields(*(geo_sum / cfg.trials), scn.B, scn.M, gain)

    def rel(a, b):
        return (a - b) / b if b else math.inf

    report = {"n_samples": emp.n_samples, "channel_model": cfg.channel_model}
    for name in ("e_i1_sq", "e_i2_sq", "e_i3_sq", "e_i4_sq", "e_s_i1", "sinr"):
        a = getattr(ana, name)
        e = getattr(emp, name)
        report[name + "_analytic"] = a
        report[name + "_mc"] = e
        report[name + "_rel_err"] = rel(e, a)
    return report
