"""Command-line front end: ``nongibbs run|validate|list``.

Exit status: 0 success, 1 validation failure, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .parallel import default_jobs
from .scenarios import ValidationError, catalog, load_scenario, run_scenario

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


def _load(path: str):
    try:
        return load_scenario(path), Path(path).read_text()
    except OSError as exc:
        print(f"{path}: cannot read: {exc.strerror}", file=sys.stderr)
    except ValidationError as exc:
        print(f"{path}: invalid: {exc}", file=sys.stderr)
    return None, None


def cmd_validate(args) -> int:
    scenario, _ = _load(args.file)
    if scenario is None:
        return EXIT_INVALID
    print(f"{args.file}: ok ({scenario.kind} '{scenario.name}')")
    return EXIT_OK


def cmd_run(args) -> int:
    scenario, text = _load(args.file)
    if scenario is None:
        return EXIT_INVALID
    if args.jobs is not None and args.jobs < 1:
        print("--jobs must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    out = Path(args.out or scenario.output or Path("results") / scenario.name)
    result = run_scenario(scenario, text, out, args.jobs or default_jobs())
    for p in result.outputs:
        print(p)
    print(out / "manifest.json")
    for f in result.failures:
        print(f"failed: {f['cell']}: {f['error']}", file=sys.stderr)
    return EXIT_OK if result.ok else EXIT_RUNTIME


def cmd_list(args) -> int:
    print(catalog())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nongibbs", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="validate and execute a scenario file")
    run.add_argument("file")
    run.add_argument("--jobs", type=int, default=None, help="worker processes (default: available cores)")
    run.add_argument("--out", default=None, help="output directory (default: results/<name>)")
    run.set_defaults(func=cmd_run)
    val = sub.add_parser("validate", help="check a scenario file without running it")
    val.add_argument("file")
    val.set_defaults(func=cmd_validate)
    lst = sub.add_parser("list", help="show scenario kinds and shipped examples")
    lst.set_defaults(func=cmd_list)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors; a bad invocation counts as invalid input here
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
