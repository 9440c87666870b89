"""Command-line entry point: ``bidirmmse <subcommand> [options]``."""

import argparse
import sys
from dataclasses import replace

import numpy as np

from .harness import ConfigError, ExperimentConfig, load_config, run_analytical, run_experiment, run_sweep
from .signal import CooperativeConfig
from .validation import CRITERIA, quick_checks, run_criteria

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

DEFAULT_FADING_RATES = (0.001, 0.005, 0.01, 0.02)

PRESETS = {
    "sinr-vs-symbol": dict(algorithms=("mmse", "conv-rls", "diff-cg", "bidir-cg", "bidir-cg-mix")),
    "sinr-vs-fading": dict(
        algorithms=("conv-rls", "conv-cg", "diff-cg", "bidir-cg", "bidir-cg-mix"),
        fading_rates=DEFAULT_FADING_RATES,
        sweep="vs_fading_rate",
    ),
    "ber-vs-users": dict(algorithms=("mmse", "conv-rls", "diff-cg", "bidir-cg", "bidir-cg-mix"), sweep="vs_users"),
    "ber-vs-symbol": dict(algorithms=("mmse", "conv-rls", "diff-cg", "bidir-cg", "bidir-cg-mix"), ber_count_training=True),
    "cooperative": dict(
        algorithms=("mmse", "diff-cg", "bidir-cg", "bidir-cg-mix"),
        cooperative=CooperativeConfig(n_relays=2),
        ber_count_training=True,
    ),
    "analytical": dict(algorithms=("mmse", "bidir-nlms"), fading_rates=(0.001, 0.01)),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser():
    parser = _Parser(prog="bidirmmse", description="Adaptive DS-CDMA receiver experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in PRESETS:
        p = sub.add_parser(name, help=f"write the {name} CSV")
        p.add_argument("--config", help="flat key = value configuration file")
        p.add_argument("--seed", type=int)
        p.add_argument("--packets", type=int)
        p.add_argument("--out", help="output CSV path (default: stdout)")
        p.add_argument("--algorithms", help="comma-separated algorithm ids")
    v = sub.add_parser("validate", help="run the acceptance checks")
    v.add_argument("--quick", action="store_true", help="fast sanity checks only")
    v.add_argument("--criteria", help="comma-separated criterion numbers (default: all)")
    return parser


def _config(args):
    preset = dict(PRESETS[args.command])
    cfg = load_config(args.config, **preset) if args.config else ExperimentConfig(**preset)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.packets is not None:
        changes["n_packets"] = args.packets
    if args.algorithms:
        changes["algorithms"] = tuple(a.strip() for a in args.algorithms.split(",") if a.strip())
    if args.out:
        changes["output"] = args.out
    return replace(cfg, **changes)


def _analytical_csv(cfg):
    lines = ["fd_ts,symbol_index,algorithm_id,sinr_over_snr_db"]
    for fd in cfg.fading_rates:
        curve, run = run_analytical(cfg, fd)
        lines += [f"{fd},{i},analytical,{v:.6f}" for i, v in enumerate(curve)]
        for alg, s in run.series.items():
            lines += [f"{fd},{i},{alg},{v:.6f}" for i, v in enumerate(s.sinr_over_snr_db)]
    return "\n".join(lines) + "\n"


def _emit(text, path):
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _validate(args):
    if args.quick:
        results = quick_checks()
        for name, ok, detail in results:
            print(f"[{'PASS' if ok else 'FAIL'}] {name}{': ' + detail if detail else ''}")
        return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_FAIL
    if args.criteria:
        try:
            numbers = [int(n) for n in args.criteria.split(",")]
        except ValueError:
            print("--criteria expects comma-separated integers", file=sys.stderr)
            return EXIT_USAGE
        bad = [n for n in numbers if n not in CRITERIA]
        if bad:
            print(f"unknown criteria: {bad}", file=sys.stderr)
            return EXIT_USAGE
    else:
        numbers = None
    results = run_criteria(numbers, sys.stdout)
    return EXIT_OK if all(r.passed and r.within_budget for r in results) else EXIT_FAIL


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "validate":
        return _validate(args)
    try:
        cfg = _config(args)
        cfg.validate()
    except (ConfigError, OSError) as exc:
        print(f"bidirmmse: {exc}", file=sys.stderr)
        return EXIT_USAGE
    with np.errstate(divide="ignore", invalid="ignore"):
        if args.command == "analytical":
            text = _analytical_csv(cfg)
        elif cfg.sweep == "vs_symbol":
            text = run_experiment(cfg).to_csv()
        else:
            text = run_sweep(cfg).to_csv()
    _emit(text, cfg.output)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
