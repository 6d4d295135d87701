"""Command-line entry point.

Subcommands: surface, bench-h2, optimize, oracle, anneal,
simulate-bubble. Each experiment reads an optional YAML config (strictly
validated), writes CSV data files plus a manifest into --out, and exits
nonzero with a diagnostic on any failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import yaml

from .encoding import parse_qubo_text
from .experiments import (
    BenchH2Config,
    BubbleSimConfig,
    ConfigError,
    OptimizeConfig,
    SurfaceConfig,
    run_bench_h2,
    run_optimize,
    run_simulate_bubble,
    run_surface,
)
from .samplers import AnnealSchedule, brute_force_min, default_schedule, simulated_anneal


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    doc = yaml.safe_load(Path(path).read_text())
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must be a mapping, got {type(doc).__name__}")
    return {k: tuple(v) if isinstance(v, list) else v for k, v in doc.items()}


def _cmd_surface(args) -> int:
    config = SurfaceConfig.from_mapping(_load_config(args.config))
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.lambda_sr is not None:
        config = replace(config, lambda_sr=args.lambda_sr)
    if args.warm_start:
        config = replace(config, warm_start=True)
    outputs = run_surface(config, args.out)
    print(f"surface: wrote {len(outputs)} files to {args.out}")
    return 0


def _cmd_bench_h2(args) -> int:
    config = BenchH2Config.from_mapping(_load_config(args.config))
    if args.seed is not None:
        config = replace(config, seeds=(args.seed,))
    if args.standard_r2:
        config = replace(config, standard_r2=True)
    outputs = run_bench_h2(config, args.out)
    print(f"bench-h2: wrote {len(outputs)} files to {args.out}")
    return 0


def _cmd_optimize(args) -> int:
    config = OptimizeConfig.from_mapping(_load_config(args.config))
    if args.seed is not None:
        config = replace(config, seeds=(args.seed,))
    if args.lambda_sr is not None:
        config = replace(config, lambda_sr=args.lambda_sr)
    if args.warm_start:
        config = replace(config, warm_start=True)
    outputs = run_optimize(config, args.out)
    print(f"optimize: wrote {len(outputs)} files to {args.out}")
    return 0


def _cmd_oracle(args) -> int:
    q = parse_qubo_text(Path(args.qubo_file).read_text())
    x, energy = brute_force_min(q)
    print("bits:", "".join(str(int(b)) for b in x))
    print("energy:", repr(energy))
    return 0


def _cmd_anneal(args) -> int:
    q = parse_qubo_text(Path(args.qubo_file).read_text())
    if args.beta_start is not None and args.beta_end is not None:
        schedule = AnnealSchedule(args.beta_start, args.beta_end, args.sweeps, args.reads, args.seed)
    elif args.beta_start is None and args.beta_end is None:
        schedule = default_schedule(q, sweeps=args.sweeps, reads=args.reads, seed=args.seed)
    else:
        raise ConfigError("provide both --beta-start and --beta-end, or neither")
    result = simulated_anneal(q, schedule)
    lines = ["bits,energy,count"]
    for x, e, c in zip(result.states, result.energies, result.counts):
        lines.append(f"{''.join(str(int(b)) for b in x)},{float(e)!r},{int(c)}")
    text = "\n".join(lines) + "\n"
    if args.out is not None:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "samples.csv").write_text(text)
        print(f"anneal: wrote samples.csv to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_simulate_bubble(args) -> int:
    config = BubbleSimConfig.from_mapping(_load_config(args.config))
    outputs = run_simulate_bubble(config, args.out)
    print(f"simulate-bubble: wrote {len(outputs)} files to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fmanneal",
        description="Factorization-machine annealing toolkit for continuous-variable black-box optimization",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, seed=True):
        p.add_argument("--config", help="YAML config file")
        p.add_argument("--out", default="out", help="output directory (default: out)")
        if seed:
            p.add_argument("--seed", type=int, help="override the config seed")

    p = sub.add_parser("surface", help="surrogate-surface study on a 2-variable objective")
    add_common(p)
    p.add_argument("--lambda-sr", type=float, help="smoothing regularization strength")
    p.add_argument("--warm-start", action="store_true", help="carry FM parameters across steps")
    p.set_defaults(func=_cmd_surface)

    p = sub.add_parser("bench-h2", help="generalization sweep on the interacting toy objective")
    add_common(p)
    p.add_argument("--standard-r2", action="store_true", help="also report the conventional R^2")
    p.set_defaults(func=_cmd_bench_h2)

    p = sub.add_parser("optimize", help="multi-trial optimization study")
    add_common(p)
    p.add_argument("--lambda-sr", type=float, help="smoothing regularization strength")
    p.add_argument("--warm-start", action="store_true", help="carry FM parameters across steps")
    p.set_defaults(func=_cmd_optimize)

    p = sub.add_parser("oracle", help="brute-force minimum of a QUBO text file")
    p.add_argument("qubo_file")
    p.set_defaults(func=_cmd_oracle)

    p = sub.add_parser("anneal", help="simulated annealing on a QUBO text file")
    p.add_argument("qubo_file")
    p.add_argument("--out", help="write samples.csv here instead of stdout")
    p.add_argument("--sweeps", type=int, default=1000)
    p.add_argument("--reads", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--beta-start", type=float)
    p.add_argument("--beta-end", type=float)
    p.set_defaults(func=_cmd_anneal)

    p = sub.add_parser("simulate-bubble", help="integrate the bubble model and emit the trajectory")
    add_common(p, seed=False)
    p.set_defaults(func=_cmd_simulate_bubble)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
