"""Command line entry point: ``graphscatter <subcommand> --config FILE``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import experiments as ex
from .config import Experiment, load_config
from .errors import BoundViolation, ConfigError, DataError, GraphScatterError

EXIT_OK, EXIT_CONFIG, EXIT_BOUND, EXIT_DATA = 0, 2, 3, 4

SUBCOMMANDS = {
    "stability-sweep": Experiment.STABILITY_SWEEP,
    "source-loc": Experiment.SOURCE_LOCALIZATION,
    "authorship": Experiment.AUTHORSHIP,
    "bound-check": Experiment.BOUND_CHECK,
    "dump-kernels": Experiment.DUMP_KERNELS,
    "wan-build": Experiment.WAN_BUILD,
}

PLOT_METRICS = {
    Experiment.STABILITY_SWEEP: ("rel_error", "theorem_bound"),
    Experiment.SOURCE_LOCALIZATION: ("accuracy",),
    Experiment.AUTHORSHIP: ("accuracy",),
    Experiment.BOUND_CHECK: ("rep_diff", "rep_bound"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graphscatter", description="Graph scattering stability experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="key = value config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="output directory (overrides output_dir)")
        p.add_argument("--threads", type=int, default=1, help="worker threads for independent cells")
    return parser


def run(args) -> int:
    experiment = SUBCOMMANDS[args.command]
    cfg = load_config(args.config, seed=args.seed, output_dir=args.out, experiment=experiment)
    out = Path(cfg.output_dir)
    if experiment is Experiment.DUMP_KERNELS:
        for path in ex.run_dump_kernels(cfg, out):
            print(path)
        return EXIT_OK
    if experiment is Experiment.WAN_BUILD:
        print(ex.run_wan_build(cfg, out))
        return EXIT_OK
    runner = {
        Experiment.STABILITY_SWEEP: ex.run_stability_sweep,
        Experiment.SOURCE_LOCALIZATION: ex.run_source_localization,
        Experiment.BOUND_CHECK: ex.run_bound_check,
    }.get(experiment)
    if runner is None:
        result = ex.run_authorship(cfg, threads=args.threads)
    else:
        result = runner(cfg, threads=args.threads)
    ex.check_finite(result.records)
    ex.write_outputs(result, out, experiment.value, PLOT_METRICS[experiment])
    if result.skipped:
        print(f"warning: {result.skipped} cells skipped", file=sys.stderr)
    if result.violations:
        raise BoundViolation(f"{len(result.violations)} bound violations, first: {result.violations[0]}", result.violations[0])
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BoundViolation as exc:
        print(f"bound violation: {exc}", file=sys.stderr)
        return EXIT_BOUND
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except GraphScatterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
