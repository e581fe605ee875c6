"""Command-line front end: ``holonomy list-systems | run <config> | verify``.

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .errors import ConfigError, HolonomyError
from .jobs import FORMATS, JobFailure, JobReport, parse_config, run_job, with_overrides
from .model import FAMILIES, FAMILY_CONSTANTS, make_family

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2


def worker_count(n_jobs: int) -> int:
    """Threads to use: ``HOLONOMY_THREADS`` if set, else the CPU count, at most one per job."""
    raw = os.environ.get("HOLONOMY_THREADS")
    cap = os.cpu_count() or 1
    if raw:
        try:
            cap = max(1, int(raw))
        except ValueError:
            raise ConfigError([f"HOLONOMY_THREADS must be a positive integer, got {raw!r}"]) from None
    return max(1, min(cap, n_jobs))


def report_json(report: JobReport) -> str:
    return json.dumps({**report.payload(), "wall_time_s": report.wall_time}, indent=2)


def write_outputs(report: JobReport, outdir: Path, fmt: str) -> list[Path]:
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt in ("report", "both"):
        path = outdir / f"{report.name}.json"
        path.write_text(report_json(report) + "\n")
        written.append(path)
    if fmt in ("csv", "both"):
        for table, (header, rows) in report.tables.items():
            path = outdir / f"{report.name}_{table}.csv"
            with path.open("w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(header)
                writer.writerows(rows)
            written.append(path)
    return written


def cmd_list_systems(args) -> int:
    for name in FAMILIES:
        fam = make_family(name)
        consts = ", ".join(FAMILY_CONSTANTS[name]) or "none"
        print(f"{name}: dim={fam.dim}, params=({', '.join(fam.params)}), constants={consts}")
        if fam.description and not args.quiet:
            print(f"    {fam.description}")
    return EXIT_OK


def cmd_run(args) -> int:
    path = args.config_path or args.config
    if path is None:
        print("error: no config given (positional path or --config)", file=sys.stderr)
        return EXIT_CONFIG
    try:
        text = Path(path).read_text()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        config = with_overrides(parse_config(text), seed=args.seed, steps=args.steps)
        workers = worker_count(len(config.jobs))
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG

    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(run_job, job) for job in config.jobs]
    status = EXIT_OK
    outdir = Path(args.output) if args.output else None
    # report assembly follows config order
    for job, fut in zip(config.jobs, futures):
        try:
            report = fut.result()
        except (JobFailure, HolonomyError) as exc:
            print(f"numerical error: {exc}", file=sys.stderr)
            status = EXIT_NUMERICAL
            continue
        fmt = args.format or job["format"]
        if outdir is not None:
            for p in write_outputs(report, outdir, fmt):
                if not args.quiet:
                    print(f"wrote {p}")
        elif not args.quiet:
            print(report_json(report))
    return status


def cmd_verify(args) -> int:
    from .acceptance import run_all

    results = run_all(quick=args.quick)
    width = max(len(r.title) for r in results)
    for r in results:
        print(f"{r.number:>2}  {r.title:<{width}}  {'PASS' if r.passed else 'FAIL'}  {r.seconds:7.2f}s  {r.detail}")
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} criteria passed")
    return EXIT_OK if failed == 0 else EXIT_NUMERICAL


class _Parser(argparse.ArgumentParser):
    # usage errors are configuration errors, not argparse's default exit code 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="holonomy", description=__doc__.splitlines()[0])
    parser.add_argument("--quiet", action="store_true", help="suppress normal output")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("list-systems", help="list the registered Hamiltonian families")
    p.set_defaults(func=cmd_list_systems)

    p = sub.add_parser("run", help="run the jobs in a config file")
    p.add_argument("config_path", nargs="?", help="config file")
    p.add_argument("--config", help="config file (alternative to the positional path)")
    p.add_argument("--output", help="directory for reports and CSV tables (default: print to stdout)")
    p.add_argument("--format", choices=FORMATS, help="override every job's output format")
    p.add_argument("--seed", type=_u64, help="override every job's seed")
    p.add_argument("--steps", type=_positive, help="override every job's step count")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="run the built-in acceptance suite")
    p.add_argument("--quick", action="store_true", help="skip the slow Monte Carlo criterion")
    p.set_defaults(func=cmd_verify)

    for p in sub.choices.values():
        p.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS, help=argparse.SUPPRESS)
    return parser


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
