"""Command line entry point: ``prism-harness {run,sweep,probe} CONFIG``."""

from __future__ import annotations

import argparse
import logging
import sys

from .harness import ConfigError, load_config, override, run_experiment, sweep, probe


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prism-harness", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("run", "run every grid cell and write metrics.csv + summary.json"),
        ("sweep", "run the grid and write a ranked sweep.csv"),
        ("probe", "run with spectral probing and write probe.csv"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="TOML experiment file")
        p.add_argument("--out", help="output directory (default: config 'output')")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--exact-polar", action="store_true",
                       help="use the exact eigen-based polar factor instead of Newton-Schulz")
        p.add_argument("--threads", type=int, default=1, help="grid cells to run concurrently")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = override(load_config(args.config), seed=args.seed,
                       exact_polar=args.exact_polar, output=args.out)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2

    if args.command == "run":
        result = run_experiment(cfg, out_dir=cfg.output, threads=args.threads)
        for r in result.runs:
            status = f"diverged at step {r.diverged_step}" if r.diverged else f"final loss {r.final_loss:.6g}"
            print(f"{r.run_id} gamma={r.gamma:g} lr_max={r.lr_max:g}: {status}")
    elif args.command == "sweep":
        try:
            table = sweep(cfg, out_dir=cfg.output, threads=args.threads)
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        for row in table:
            print(f"#{row['rank']:<3d} {row['run_id']} gamma={row['gamma']:g} lr_max={row['lr_max']:g} "
                  f"final={row['final_loss']:.6g}{' (diverged)' if row['diverged'] else ''}")
    else:
        try:
            rows = probe(cfg, out_dir=cfg.output, threads=args.threads)
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        print(f"{len(rows)} probe rows")
    print(f"outputs in {cfg.output}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
