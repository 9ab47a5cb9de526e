"""Command line entry point: ``msoksq --preset fig4 --seeds 10``."""

from __future__ import annotations

import argparse
import sys
import time

from .config import ExperimentConfig, parse_config, parse_seeds
from .errors import ConfigurationError, DataError


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="msoksq", description="Online kernel learning with learned sensor quantizers.")
    p.add_argument("--preset", help="named experiment (fig4 ... fig9)")
    p.add_argument("--config", help="key = value config file")
    seeds = p.add_mutually_exclusive_group()
    seeds.add_argument("--seed", type=int, help="single seed")
    seeds.add_argument("--seeds", help="seed count ('10' runs 0-9) or list ('0-4', '1,3,5')")
    p.add_argument("--sensors", type=int, help="number of sensors M")
    p.add_argument("--bits", type=int, help="bits per quantizer")
    p.add_argument("--select-mprime", type=int, dest="M_prime", help="sensors left enabled after selection")
    p.add_argument("--steps", type=int, help="time horizon N")
    p.add_argument("--dataset", choices=("synthetic", "iris"))
    p.add_argument("--c1", type=float, help="synthetic noise level")
    p.add_argument("--variant", help="full, no_w, no_P_no_w, deterministic_quantizer, norma, random_selection")
    p.add_argument("--out", help="output directory (default runs)")
    p.add_argument("--emit-svg", action="store_true", help="also write an SVG plot of ACR(n)")
    p.add_argument("--workers", type=int, help="parallel worker processes")
    return p


def _seed_arg(text: str) -> list[int]:
    text = text.strip()
    if text.isdigit():
        count = int(text)
        if count < 1:
            raise ConfigurationError("--seeds needs a positive count")
        return list(range(count))
    return parse_seeds(text)


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    cfg = parse_config(args.config) if args.config else ExperimentConfig()
    if args.preset:
        if cfg.preset is not None and cfg.preset != args.preset:
            raise ConfigurationError(f"--preset {args.preset} conflicts with preset {cfg.preset} in the config file")
        cfg.preset = args.preset
        clash = [f for f, v in (("--sensors", args.sensors), ("--bits", args.bits), ("--select-mprime", args.M_prime),
                                ("--variant", args.variant), ("--dataset", args.dataset)) if v is not None]
        if clash:
            raise ConfigurationError(f"preset {args.preset!r} fixes {', '.join(clash)}; drop them or the preset")
    for key, val in (("M", args.sensors), ("bits", args.bits), ("M_prime", args.M_prime),
                     ("N", args.steps), ("variant", args.variant)):
        if val is not None:
            cfg.trainer[key] = val
    if args.dataset is not None:
        cfg.stream["source"] = args.dataset
    if args.c1 is not None:
        cfg.stream["c1"] = args.c1
    if args.seed is not None:
        cfg.seeds = [args.seed]
    elif args.seeds is not None:
        cfg.seeds = _seed_arg(args.seeds)
    if args.out is not None:
        cfg.out = args.out
    if args.emit_svg:
        cfg.svg = True
    if args.workers is not None:
        cfg.workers = args.workers
    return cfg.validate()


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    from .experiments import run_experiment, summarize

    try:
        cfg = config_from_args(args)
        t0 = time.perf_counter()
        outdir = run_experiment(cfg)
    except (ConfigurationError, DataError, OSError) as exc:
        print(f"msoksq: error: {exc}", file=sys.stderr)
        return 2
    for row in summarize(outdir):
        print(f"{row['arm']:<24} ACR(N) = {float(row['final_acr_mean']):.4f} +- {float(row['final_acr_std']):.4f}"
              f"  ({row['n_seeds']} seeds)")
    print(f"wrote {outdir} in {time.perf_counter() - t0:.1f} s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
