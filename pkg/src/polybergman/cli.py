"""Command-line experiment runner.

Exit codes: 0 success, 1 configuration error, 2 numerical refusal
(ill-conditioned Gram matrix or failed sampler), 3 I/O failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from typing import Optional, Sequence

from .bergman import ConditioningError
from .experiment import (
    ConfigError,
    convergence_table,
    load_config,
    run_experiment,
    run_sampling,
    write_envelope,
)
from .stochastic import SamplingError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polybergman", description="Weighted Bergman kernel experiments.")
    p.add_argument("--seed", type=int, default=None, help="override stochastic.seed")
    sub = p.add_subparsers(dest="command", required=True)
    for name, text in (("run", "write per-k CSV tables and summary.csv"),
                       ("table", "print the convergence table"),
                       ("sample", "draw eigenvalue and zero batches into samples.csv"),
                       ("envelope", "write the equilibrium profile to envelope.csv")):
        sp = sub.add_parser(name, help=text)
        sp.add_argument("config")
        sp.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="override stochastic.seed")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, UnicodeDecodeError) as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    try:
        if args.command == "run":
            results = run_experiment(cfg)
            for r in results:
                print(f"k={r.k} dim={r.dim} dim_residual={r.dim_residual:.3g} l1_error={r.l1_error:.6g}")
        elif args.command == "table":
            print(convergence_table(cfg))
        elif args.command == "sample":
            for line in run_sampling(cfg):
                print(line)
        else:
            print(write_envelope(cfg))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConditioningError, SamplingError) as exc:
        print(f"numerical refusal: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
