"""Command line entry point: ``faslab <experiment> [options]``.

Exit codes: 0 on success, 1 on usage or configuration errors, 2 when a
result violates an exact invariant.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
from dataclasses import replace

from .experiments import KINDS, ConfigError, ExperimentSpec, InvariantViolation, load_config, run

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INVARIANT = 2

SEED_ENV = "FASLAB_SEED"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for invariant failures
    def error(self, message):
        raise _UsageError(f"{self.prog}: error: {message}")


def _non_negative(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return value


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="faslab", description="Fluid-antenna channel estimation experiments.")
    parser.add_argument("experiment", choices=KINDS)
    parser.add_argument("--config", metavar="PATH", help="INI file with experiment parameters")
    parser.add_argument("--seed", type=_non_negative, help=f"master seed (fallback: ${SEED_ENV}, then 0)")
    parser.add_argument("--trials", type=_positive)
    parser.add_argument("--jobs", type=_positive, help="worker processes for independent trials")
    parser.add_argument("--out", metavar="DIR", help="output directory (default: results)")
    return parser


def resolve_spec(argv=None, environ=None) -> ExperimentSpec:
    """Parse ``argv`` into a spec.

    Precedence: command-line flags, then the config file, then
    ``$FASLAB_SEED`` for the seed, then the experiment defaults.
    """
    environ = os.environ if environ is None else environ
    args = build_parser().parse_args(argv)
    if args.config:
        try:
            spec = load_config(args.config, args.experiment)
            config_has_seed = _config_sets_seed(args.config)
        except OSError as exc:
            raise _UsageError(f"faslab: cannot read config: {exc}") from None
    else:
        spec = ExperimentSpec.defaults(args.experiment)
        config_has_seed = False
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    elif not config_has_seed and environ.get(SEED_ENV, "") != "":
        raw = environ[SEED_ENV]
        try:
            overrides["seed"] = _non_negative(raw)
        except (ValueError, argparse.ArgumentTypeError):
            raise _UsageError(f"faslab: {SEED_ENV} must be a non-negative integer, got {raw!r}") from None
    for name in ("trials", "jobs", "out"):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    return replace(spec, **overrides)


def _config_sets_seed(path) -> bool:
    parser = configparser.ConfigParser(interpolation=None)
    parser.read(path, encoding="utf-8")
    return parser.has_option("run", "seed")


def main(argv=None) -> int:
    try:
        spec = resolve_spec(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"faslab: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    try:
        sidecar = run(spec)
    except InvariantViolation as exc:
        print(f"faslab: invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except OSError as exc:
        print(f"faslab: cannot write output: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for name in sidecar["files"]:
        print(os.path.join(spec.out, name))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
