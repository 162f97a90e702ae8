import argparse
import logging
import sys
import traceback
from pathlib import Path
from typing import List, Optional

from .pipelines import run_pipeline
from .report import emit_report
from .scenario import Scenario, bundled_scenarios, resolve_config

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="splitting-kit",
        description="Run a scenario (splitting, sigma, theta, roughness, fine-structure or pde) and write its report.",
    )
    parser.add_argument("--config", help="Scenario file (.yaml, .yml, .json) or the name of a bundled scenario.")
    parser.add_argument(
        "--overlay",
        action="append",
        default=[],
        metavar="FILE",
        help="Scenario overlay merged over --config; may be repeated.",
    )
    parser.add_argument("--out", help="Output directory; overrides [output] dir of the scenario.")
    parser.add_argument("--threads", type=int, default=None, help="Worker threads for independent solves.")
    parser.add_argument("--list-scenarios", action="store_true", help="List bundled scenarios and exit.")
    parser.add_argument("-v", "--verbose", action="store_true", help="Log progress at INFO level.")
    return parser


def _origin(error: BaseException) -> str:
    """Module where the error was raised."""
    frames = traceback.extract_tb(error.__traceback__)
    return Path(frames[-1].filename).stem if frames else "unknown"


def run_scenario(
    config: str | Path,
    out: Optional[str | Path] = None,
    threads: Optional[int] = None,
    overlays: Optional[List[str | Path]] = None,
) -> int:
    """Parse, run and report one scenario; returns the process exit status."""
    try:
        scn = Scenario.from_file(resolve_config(config), overlays)
    except (FileNotFoundError, ValueError) as error:
        print(f"Error: {error}", file=sys.stderr)
        return EXIT_USAGE
    if out is not None:
        scn.output.dir = str(out)

    print(f"Running scenario {scn.name} ({scn.pipeline} pipeline)")
    try:
        result = run_pipeline(scn, threads)
    except (RuntimeError, ValueError) as error:
        print(f"Error: {scn.pipeline} pipeline failed in {_origin(error)}: {error}", file=sys.stderr)
        return EXIT_FAILURE

    try:
        written = emit_report(scn, result, scn.output.dir)
    except RuntimeError as error:
        print(f"Error: {error}", file=sys.stderr)
        return EXIT_FAILURE

    failed = result.checks.failed()
    print(f"Report written to: {scn.output.dir} ({len(written)} files)")
    print(f"{len(result.checks)} checks, {len(failed)} failed")
    for check in failed:
        print(f"  FAIL {check.name}: measured {check.measured:.6g}, bound {check.bound:.6g}")
    return EXIT_OK if result.passed else EXIT_FAILURE


def handle_list(args: argparse.Namespace) -> int:
    for name in bundled_scenarios():
        print(name)
    return EXIT_OK


def handle_run(args: argparse.Namespace) -> int:
    if args.threads is not None and args.threads < 1:
        print(f"Error: --threads must be at least 1, got {args.threads}", file=sys.stderr)
        return EXIT_USAGE
    return run_scenario(args.config, out=args.out, threads=args.threads, overlays=args.overlay)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )

    if args.list_scenarios:
        return handle_list(args)
    if not args.config:
        parser.print_usage(sys.stderr)
        print("Error: --config is required unless --list-scenarios is given", file=sys.stderr)
        return EXIT_USAGE
    return handle_run(args)


if __name__ == "__main__":
    sys.exit(main())
