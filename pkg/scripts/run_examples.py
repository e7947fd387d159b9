"""Run every shipped example scenario into results/<name>/ and report exit codes."""
import argparse
import sys
from pathlib import Path

from nongibbs.cli import main as cli
from nongibbs.scenarios import example_files


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results")
    parser.add_argument("--jobs", type=int, default=None)
    args = parser.parse_args()
    worst = 0
    for path in example_files():
        argv = ["run", str(path), "--out", str(Path(args.out) / path.stem)]
        if args.jobs:
            argv += ["--jobs", str(args.jobs)]
        code = cli(argv)
        print(f"{path.name}: exit {code}", file=sys.stderr)
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
