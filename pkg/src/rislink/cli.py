"""Command-line interface for running sweeps, comparisons, and reports."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from rislink import harness


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="experiment config file (key = value format)")
    parser.add_argument("--seed", type=int, help="base RNG seed")
    parser.add_argument("--trials", type=int, help="Monte Carlo trials (frames) per point")
    parser.add_argument("--out", help="output CSV path")
    parser.add_argument("--channel", choices=("iid", "geometric"), help="channel model")
    parser.add_argument("--phase-bits", type=int, dest="phase_bits",
                        help="RIS phase quantization resolution in bits")
    parser.add_argument("--workers", type=int, help="worker processes over trials")


def _build_config(args: argparse.Namespace, scheme=None) -> harness.ExperimentConfig:
    cfg = harness.ExperimentConfig()
    if args.config:
        cfg = harness.load_config(args.config, cfg)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.out is not None:
        overrides["output_path"] = args.out
    if args.channel is not None:
        overrides["channel_model"] = args.channel
    if args.phase_bits is not None:
        overrides["phase_bits"] = args.phase_bits
    if args.workers is not None:
        overrides["workers"] = args.workers
    if scheme is not None:
        overrides["scheme"] = scheme
    if overrides:
        cfg = replace(cfg, **overrides)
    return cfg


def _print_records(records):
    for rec in records:
        print(f"{rec.scheme:>4} {rec.sweep_name}={rec.sweep_value:<8g} "
              f"sinr_mc={rec.sinr_db_mc:.2f}dB sep_mc={rec.sep_mc:.3e} "
              f"eta={rec.eta:.4f} [{rec.status}]")


def _cmd_sweep(args, scheme=None):
    cfg = _build_config(args, scheme)
    records = harness.run_sweep(cfg)
    _print_records(records)
    print(f"wrote {len(records)} records to {cfg.output_path}")


def _cmd_efficiency_table(args):
    out = args.out or "efficiency_table.csv"
    rows = harness.write_efficiency_table(out)
    speeds = sorted({r["speed_kmh"] for r in rows})
    sizes = sorted({r["m"] for r in rows})
    cells = {(r["m"], r["speed_kmh"]): r["eta_c"] for r in rows}
    header = "M\\v[km/h] " + " ".join(f"{v:>8g}" for v in speeds)
    print(header)
    for m in sizes:
        print(f"{m:<9d} " + " ".join(f"{cells[m, v]:>8.4f}" for v in speeds))
    print(f"wrote {len(rows)} cells to {out}")


def _cmd_validate_moments(args):
    cfg = _build_config(args)
    report = harness.validate_moments(cfg)
    print(f"channel={report['channel_model']} samples={report['n_samples']}")
    for name in ("e_s_i1", "e_i1_sq", "e_i2_sq", "e_i3_sq", "e_i4_sq", "sinr"):
        print(f"{name:>10}: analytic={report[name + '_analytic']:.6e} "
              f"mc={report[name + '_mc']:.6e} rel_err={report[name + '_rel_err']:+.3%}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rislink",
        description="RIS-assisted SIMO-OFDM uplink simulator: non-coherent DPSK "
                    "vs a coherent baseline, with closed-form cross-validation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sinr-sweep", help="SINR metrics over a parameter sweep")
    _add_common(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("sep-sweep", help="symbol-error-rate metrics over a sweep")
    _add_common(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("compare", help="run both schemes at every sweep point")
    _add_common(p)
    p.set_defaults(func=lambda a: _cmd_sweep(a, scheme="both"))

    p = sub.add_parser("efficiency-table",
                       help="training-efficiency grid over RIS size and UE speed")
    p.add_argument("--out", help="output CSV path")
    p.set_defaults(func=_cmd_efficiency_table)

    p = sub.add_parser("validate-moments",
                       help="closed-form vs Monte Carlo moment report")
    _add_common(p)
    p.set_defaults(func=_cmd_validate_moments)

    args = parser.parse_args(argv)
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
