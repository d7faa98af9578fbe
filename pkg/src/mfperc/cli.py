"""Command-line entry point ``mfperc``.

Usage::

    mfperc run --spec experiment.cfg [--seed S] [--threads K] [--out DIR] [--override key=value ...]
    mfperc <suite> [--spec FILE] [flags as above]
    mfperc schema <suite>

Precedence is defaults < spec file < ``--override`` < explicit flags.  Exit
codes: 0 all gated checks pass, 1 a gated check failed, 2 configuration
error, 3 unexpected failure (partial outputs are kept).
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
import time
import traceback
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import SUITES, ConfigError, canonical, convert, document_schema, load, parse_lines
from .lattice import VertexCapError
from .report import RunWriter, config_hash
from .suites import SUITE_FUNCS, validate

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_CRASH = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", help="experiment configuration file")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--threads", type=int, help="worker threads (results do not depend on this)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="set a configuration key (repeatable)")
    p = argparse.ArgumentParser(prog="mfperc", description="Mean-field percolation verification suites.")
    p.add_argument("--version", action="version", version=f"mfperc {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="run the suite named in the spec file")
    for s in SUITES:
        sub.add_parser(s, parents=[common], help=f"run the {s} suite")
    sch = sub.add_parser("schema", help="print the configuration keys of a suite")
    sch.add_argument("suite", choices=SUITES)
    return p


def _resolve(args) -> dict:
    if args.command == "run" and not args.spec:
        raise ConfigError("'run' needs --spec", None, None, "command line")
    text, source = "", "<defaults>"
    if args.spec:
        try:
            text = Path(args.spec).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read spec file ({exc.strerror})", None, None, args.spec) from None
        source = args.spec
    overrides = list(args.override)
    implicit = {}
    if args.command != "run":
        raw = parse_lines(text, source)
        if "suite" in raw and convert(raw["suite"][0], "str") != args.command:
            raise ConfigError(f"spec file names suite {raw['suite'][0]!r} but the command is {args.command!r}",
                              raw["suite"][1], "suite", source)
        implicit = {"suite": args.command, "schema_version": "1"}
    for flag, value, low in (("--seed", args.seed, 0), ("--threads", args.threads, 1)):
        if value is not None and value < low:
            raise ConfigError(f"must be at least {low}", None, flag.lstrip("-"), flag)
    flags = []
    if args.seed is not None:
        flags.append(f"seed={args.seed}")
    if args.threads is not None:
        flags.append(f"threads={args.threads}")
    if args.out is not None:
        flags.append(f"output.dir={args.out}")
    return load(text, overrides + flags, source, implicit)


def _manifest(cfg: dict, argv) -> dict:
    text = canonical(cfg)
    return {"schema_version": 1, "suite": cfg["suite"], "package_version": __version__,
            "config": {k: list(v) if isinstance(v, tuple) else v for k, v in sorted(cfg.items())},
            "config_hash": config_hash(text), "seed": cfg["seed"], "threads": cfg["threads"],
            "argv": list(argv), "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__}


def run_suite(cfg: dict, argv=(), stream=None) -> int:
    """Run one configured suite, writing its outputs; returns the exit code."""
    stream = sys.stdout if stream is None else stream
    writer = RunWriter(cfg["output.dir"], cfg["output.prefix"], _manifest(cfg, argv))
    t0 = time.perf_counter()
    with writer:
        for records, verdicts in SUITE_FUNCS[cfg["suite"]](cfg):
            writer.add_records(records)
            writer.add_verdicts(verdicts)
            for v in verdicts:
                if v.gated:
                    print(f"{'PASS' if v.passed else 'FAIL'}  {v.check_id}", file=stream)
        elapsed = time.perf_counter() - t0
        code = writer.finish({"elapsed_seconds": round(elapsed, 3)})
    if cfg["suite"] == "plot-data":
        _write_plot_table(writer)
    gated = [v for v in writer.verdicts if v.gated]
    failed = [v for v in gated if not v.passed]
    print(f"{cfg['suite']}: {len(gated) - len(failed)}/{len(gated)} gated checks passed; outputs in "
          f"{writer.out}", file=stream)
    if failed:
        print(json.dumps([v.to_json() for v in failed], indent=2), file=sys.stderr)
    return code


def _write_plot_table(writer: RunWriter):
    import csv

    table = writer.verdicts[0].detail["table"]
    path = writer.out / f"{writer.prefix}.series.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(("series", "x", "y", "yerr"))
        for series, x, y, yerr in table:
            w.writerow((series, x, y, yerr))


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    if args.command == "schema":
        print(document_schema(args.suite))
        return EXIT_OK
    try:
        cfg = _resolve(args)
        validate(cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return run_suite(cfg, argv)
    except (VertexCapError, KeyError, ConfigError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception:
        traceback.print_exc()
        return EXIT_CRASH


if __name__ == "__main__":
    sys.exit(main())
