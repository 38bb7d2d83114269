"""``collapsar <experiment> --config PATH`` command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 a threshold check failed under ``--check``.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import config, experiments
from .evolution import NumericalFailure

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_CHECK = 4


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="collapsar",
                                 description="Semirelativistic Hartree experiments.")
    ap.add_argument("experiment", choices=config.EXPERIMENTS)
    ap.add_argument("--config", required=True, type=Path, help="key = value config file")
    ap.add_argument("--jobs", type=int, default=1, help="parallel runs (reg-sweep only)")
    ap.add_argument("--output-dir", type=Path, help="overrides output_dir from the config")
    ap.add_argument("--seed", type=int, help="overrides seed from the config")
    ap.add_argument("--check", action="store_true",
                    help="exit with status 4 if any acceptance threshold fails")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config.load(args.config)
        if cfg.experiment != args.experiment:
            raise config.ConfigError(
                f"config describes '{cfg.experiment}', command asked for '{args.experiment}'")
        if args.seed is not None:
            if args.seed < 0:
                raise config.ConfigError("--seed must be non-negative")
            cfg = cfg.with_(seed=args.seed)
        if args.jobs < 1:
            raise config.ConfigError("--jobs must be at least 1")
        out = args.output_dir or cfg.output_dir
        report = experiments.run(cfg, out, args.jobs)
    except config.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, FloatingPointError, experiments.SweepAborted) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    checks = report.get("checks", {})
    for name, ok in sorted(checks.items()):
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    print(f"wrote {Path(out)}")
    if args.check and not all(checks.values()):
        return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
