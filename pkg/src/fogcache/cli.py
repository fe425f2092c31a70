"""Command-line entry point: ``fogcache <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .baselines import sync_closed_form, uncoded_load
from .delivery import run_delivery
from .model import TRACE_HEADER, Config, ConfigError, RequestSchedule, as_fraction



def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=["expected", "sampled"], default=None)
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("-v", "--verbose", action="store_true")


def _sweep_args(p: argparse.ArgumentParser) -> None:
    _common(p)
    p.add_argument("--replicas", type=int, default=100)
    p.add_argument("--K", type=int, default=10)
    p.add_argument("--N", type=int, default=100)
    p.add_argument("--B", type=int, default=5)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--gnuplot", action="store_true", help="also write a gnuplot script next to --out")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fogcache", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("example1", help="print the trace of the four-F-AP worked example")
    _common(p)

    p = sub.add_parser("verify", help="diff the worked example against the golden tables")
    _common(p)

    p = sub.add_parser("run", help="run one instance from a JSON config")
    _common(p)
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--arrivals", choices=[harness.UNIFORM, harness.SEQUENTIAL], default=harness.UNIFORM)
    p.add_argument("--trace", action="store_true", help="print the transmission trace")

    p = sub.add_parser("sweep-m", help="load versus cache size")
    _sweep_args(p)
    p.add_argument("--delta-b", type=int, default=2)
    p.add_argument("--values", type=str, default="10,20,30,40,50,60,70,80,90")

    p = sub.add_parser("sweep-delay", help="load versus maximum request delay")
    _sweep_args(p)
    p.add_argument("--M", type=str, default="50")
    p.add_argument("--values", type=str, default=None, help="delta_b values (default 1..B)")
    return parser


def _print_trace(report, slots=None) -> None:
    print(TRACE_HEADER)
    for row in report.trace_rows(slots):
        print(row)


def cmd_example1(args) -> int:
    config = harness.example1_config(mode=args.mode or "expected")
    if config.mode == "sampled":
        config = config.replace(F=1 << 16, seed=args.seed)
    report = run_delivery(config, harness.example1_schedule())
    for slot in range(1, config.B + 1):
        print(f"# slot {slot}")
        _print_trace(report, [slot])
    print(f"# normalized load {report.normalized} ({float(report.normalized):.6f})")
    if args.out:
        args.out.write_text("\n".join([TRACE_HEADER, *report.trace_rows()]) + "\n")
    return 0


def cmd_verify(args) -> int:
    result = harness.verify_example1()
    if result.passed:
        print(f"PASS: worked example matches golden tables (load {result.report.normalized})")
        return 0
    print(f"FAIL: {result.first_divergence}")
    print("\n".join(result.diff))
    return 1


def cmd_run(args) -> int:
    config = Config.from_json(args.config.read_text())
    overrides = {}
    if args.mode:
        overrides["mode"] = args.mode
    if args.seed:
        overrides["seed"] = args.seed
    if overrides:
        config = config.replace(**overrides)
    rng = np.random.default_rng(config.seed)
    arrival = harness.sample_arrivals(config.K, config.B, rng,
                                      require_nonempty=config.K >= config.B, model=args.arrivals)
    schedule = RequestSchedule(arrival, harness.worst_case_demands(config.K, config.N))
    report = run_delivery(config, schedule)
    summary = {
        "config": config.to_dict(),
        "arrival_slots": list(arrival),
        "demands": list(schedule.demand),
        **report.summary(),
        "uncoded_load": str(uncoded_load(config.K, config.N, config.M)),
        "sync_closed_form_load": str(sync_closed_form(config.K, config.N, config.M)),
    }
    print(json.dumps(summary, indent=2))
    if args.trace:
        _print_trace(report)
    if args.out:
        args.out.write_text("\n".join([TRACE_HEADER, *report.trace_rows()]) + "\n")
    return 0


def _base_config(args, delta_b: int, M) -> Config:
    mode = args.mode or "expected"
    F = 10**9 if mode == "expected" else 1 << 20
    return Config(K=args.K, N=args.N, M=M, B=args.B, delta_b=delta_b, F=F, mode=mode, seed=args.seed)


def _run_sweep(args, spec: harness.ExperimentSpec) -> None:
    result = harness.sweep(spec)
    if args.out is None:
        sys.stdout.write(harness.csv_text(result))
    else:
        if args.gnuplot:
            args.out.with_suffix(".gp").write_text(harness.gnuplot_script(args.out, spec.sweep_var))
        for value in spec.values:
            print(f"{spec.sweep_var}={value}: async mean {float(result.mean(harness.ASYNC, value)):.6f}")


def cmd_sweep_m(args) -> int:
    values = [as_fraction(v) for v in args.values.split(",")]
    spec = harness.ExperimentSpec(
        base=_base_config(args, args.delta_b, values[0]), sweep_var="M", values=values,
        replicas=args.replicas, out=args.out, workers=args.workers)
    _run_sweep(args, spec)
    return 0


def cmd_sweep_delay(args) -> int:
    values = [int(v) for v in args.values.split(",")] if args.values else list(range(1, args.B + 1))
    spec = harness.ExperimentSpec(
        base=_base_config(args, values[0], as_fraction(args.M)), sweep_var="delta_b", values=values,
        replicas=args.replicas, out=args.out, workers=args.workers)
    _run_sweep(args, spec)
    return 0


COMMANDS = {
    "example1": cmd_example1,
    "verify": cmd_verify,
    "run": cmd_run,
    "sweep-m": cmd_sweep_m,
    "sweep-delay": cmd_sweep_delay,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
