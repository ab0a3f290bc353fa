"""Command-line entry point: ``bnsl {sample,ablate,cost,schedule,verify}``.

Exit codes: 0 success, 1 a verification check failed, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import ExperimentConfig, load_config, preset
from .experiments import METRIC_COLUMNS, MODES, cost_rows, run_ablation, run_sample, run_verify, write_csv
from .sampler import ConfigError
from .schedule import build_base_sigmas, export_schedule_csv, shift_schedule

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _load(args) -> ExperimentConfig:
    if args.config and args.preset:
        raise ConfigError("pass either --config or --preset, not both")
    if args.config:
        cfg = load_config(args.config)
    elif args.preset:
        cfg = preset(args.preset)
    else:
        raise ConfigError("one of --config or --preset is required")
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if getattr(args, "runs", None) is not None:
        cfg = replace(cfg, runs=args.runs)
    return cfg


def _common(p: argparse.ArgumentParser, out_required=False):
    p.add_argument("--config", help="experiment config (JSON)")
    p.add_argument("--preset", help="built-in preset name")
    p.add_argument("--out", required=out_required, help="output directory")
    p.add_argument("--seed", type=int, help="base seed (u64)")
    p.add_argument("--runs", type=int, help="number of seeded runs")


def cmd_sample(args) -> int:
    cfg = _load(args)
    manifests = run_sample(cfg, args.out)
    for m in manifests:
        counts = "/".join(str(c) for c in m["eval_counts"])
        print(f"seed {m['seed']}: evaluations {counts}, attention {m['attention_flops_T']:.6g} TFLOPs")
    print(f"wrote {len(manifests)} run(s) to {args.out}")
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = _load(args)
    modes = MODES if args.modes == "all" else [m.strip() for m in args.modes.split(",") if m.strip()]
    runs = args.runs if args.runs is not None else 3
    base = cfg.pipeline.seed
    rows = run_ablation(cfg, modes, seeds=range(base, base + runs), out_dir=args.out)
    sys.stdout.write(write_csv(None, METRIC_COLUMNS, rows))
    return EXIT_OK


def cmd_cost(args) -> int:
    cfg = _load(args)
    rows = cost_rows(cfg)
    width = max(len(r[0]) for r in rows + [("method", 0, 0)])
    print(f"{'method':<{width}}  {'attention FLOPs (T)':>20}  {'speedup':>8}")
    for name, tf, sp in rows:
        print(f"{name:<{width}}  {tf:>20.6g}  {sp:>7.2f}x")
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        write_csv(Path(args.out) / "cost.csv", ("method", "flops_T", "speedup"), rows)
    return EXIT_OK


def cmd_schedule(args) -> int:
    shifts = [float(s) for s in args.shifts.split(",")]
    base = build_base_sigmas(args.steps)
    text = export_schedule_csv([shift_schedule(base, s) for s in shifts])
    if args.out:
        Path(args.out).write_text(text, newline="")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_verify(args) -> int:
    checks = run_verify(velocity_scale=args.perturb_velocity)
    lines = []
    for c in checks:
        line = f"{'PASS' if c.passed else 'FAIL'}  {c.name:<16} {c.measured}  (need {c.threshold}, {c.seconds:.1f}s)"
        lines.append(line)
        print(line)
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n")
    return EXIT_OK if all(c.passed for c in checks) else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bnsl", description="High-low-high resolution flow sampling on Gaussian fields")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="run a pipeline and write tensors, previews and metrics")
    _common(p, out_required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("ablate", help="compare sampling modes over seeds")
    _common(p)
    p.add_argument("--modes", default="all", help=f"comma list from {','.join(MODES)} or 'all'")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("cost", help="attention FLOPs table")
    _common(p)
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("schedule", help="export shifted sigma schedules as CSV")
    p.add_argument("--shifts", default="1,3,5,7")
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--out", help="CSV path (stdout when omitted)")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("verify", help="run the velocity and integrator oracle checks")
    p.add_argument("--out", help="also write the report here")
    p.add_argument("--perturb-velocity", type=float, default=1.0, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
