"""Command-line interface.

Subcommands: ``run <config>``, ``summarize <glob> --grid <step>``,
``validate <config>``, ``bench-list``.  Exit codes: 0 success, 1 validation
error (bad config, bad arguments, bad inputs), 2 runtime error.  The
MFMES_OUTPUT_DIR environment variable overrides the config's output
directory.
"""

from __future__ import annotations

import argparse
import glob
import json
import sys

from .benchmarks import list_benchmarks
from .config import config_hash, load_config
from .errors import ConfigError, InputError
from .experiment import (
    OUTPUT_DIR_ENV,
    manifest_path,
    resolve_output_dir,
    run,
    summarize,
)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_RUNTIME = 2


class _Parser(argparse.ArgumentParser):
    """Argparse with usage errors mapped onto the validation exit code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"error: {message}\n")


def build_parser():
    parser = _Parser(
        prog="mfmes",
        description=(
            "Multi-fidelity max-value entropy search: run seeded benchmark "
            "experiments and aggregate their regret traces."
        ),
        epilog=f"Set {OUTPUT_DIR_ENV} to override the output directory.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser(
        "run", help="execute every seed of a config and write trace CSVs"
    )
    p_run.add_argument("config", help="path to a YAML experiment config")

    p_sum = sub.add_parser(
        "summarize", help="aggregate trace CSVs onto a cumulative-cost grid"
    )
    p_sum.add_argument("pattern", help="glob matching trace CSV files")
    p_sum.add_argument(
        "--grid",
        type=float,
        required=True,
        metavar="STEP",
        help="cost-grid step for the step-interpolated quartiles",
    )

    p_val = sub.add_parser("validate", help="check a config file and print its hash")
    p_val.add_argument("config", help="path to a YAML experiment config")

    sub.add_parser("bench-list", help="list the registered benchmark functions")
    return parser


def _cmd_run(args):
    config = load_config(args.config)
    paths = run(config)
    out = resolve_output_dir(config)
    with open(manifest_path(out), "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    failed = {
        seed: entry["error"]
        for seed, entry in manifest["per_seed"].items()
        if "error" in entry
    }
    for path in paths:
        print(path)
    if failed:
        for seed, message in sorted(failed.items(), key=lambda kv: int(kv[0])):
            print(f"error: seed {seed} failed: {message}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def _cmd_summarize(args):
    paths = sorted(glob.glob(args.pattern))
    if not paths:
        raise InputError(f"no trace files match {args.pattern!r}")
    table = summarize(paths, args.grid)
    for line in table.lines():
        print(line)
    return EXIT_OK


def _cmd_validate(args):
    config = load_config(args.config)
    print(f"ok: {args.config} (config hash {config_hash(config)})")
    return EXIT_OK


def _cmd_bench_list(args):
    for entry in list_benchmarks():
        costs = ",".join("%g" % c for c in entry["costs"])
        pooled = "pooled" if entry["pooled"] else "continuous"
        print(
            f"{entry['name']}  d={entry['d']}  fidelities={entry['fidelities']}"
            f"  costs=({costs})  {pooled}"
        )
    return EXIT_OK


_COMMANDS = {
    "run": _cmd_run,
    "summarize": _cmd_summarize,
    "validate": _cmd_validate,
    "bench-list": _cmd_bench_list,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, InputError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INVALID
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except Exception as err:  # runtime failures map onto exit code 2
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
