import argparse
import logging
import os
import sys

from laneless import __version__, commands
from laneless.constants import paths
from laneless.scenario import EXAMPLES
from laneless.utils.core import FullPaths, at_least_one, is_path

# Levels accepted by the SIM_LOG environment variable
LOG_LEVELS = {"error": logging.ERROR, "warning": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


def log_level(debug):
    """
    Pick the log level from -d or SIM_LOG, falling back to info.

    """
    if debug is not None:
        return debug
    return LOG_LEVELS.get(os.environ.get("SIM_LOG", "info").lower(), logging.INFO)


def build_parser():
    argparser = argparse.ArgumentParser(
        prog="sim",
        description="Lane-less formation simulator",
        formatter_class=argparse.RawTextHelpFormatter,
    )
    argparser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    argparser.add_argument(
        "-d",
        "--debug",
        help="Print debug statements, overrides SIM_LOG",
        action="store_const",
        dest="loglevel",
        const=logging.DEBUG,
        default=None,
    )
    subparsers = argparser.add_subparsers(dest="command", required=True)

    run = subparsers.add_parser("run", help="Simulate a scenario file, or every scenario in a directory")
    run.add_argument("scenario", action=FullPaths, type=is_path)
    run.add_argument("--dt", type=float, default=None, help="Override the integration step")
    run.add_argument("--t-end", type=float, default=None, dest="t_end", help="Override the end time")
    run.add_argument("--out", action=FullPaths, default=str(paths.OUTPUT), help="Output directory (default: output)")
    run.add_argument("--every", type=at_least_one, default=1, help="Record every N-th step (default: 1)")
    run.add_argument("--seed", type=int, default=None, help="Seed for randomized reference formations")
    run.add_argument("--workers", type=at_least_one, default=None, help="Parallel runs for a scenario directory")

    analyze = subparsers.add_parser("analyze", help="Write the stability report of a scenario")
    analyze.add_argument("scenario", action=FullPaths, type=is_path)
    analyze.add_argument("--out", action=FullPaths, default=str(paths.OUTPUT))

    plotdata = subparsers.add_parser("plotdata", help="Extract plot-ready columns from a trace")
    plotdata.add_argument("trace", action=FullPaths)
    plotdata.add_argument(
        "--kind",
        required=True,
        help=(
            "Table to extract\n"
            "xy-snapshot  - car positions at --t\n"
            "y-velocity   - Y velocity of every car over time\n"
            "x-trajectory - X position of every car over time\n"
        ),
    )
    plotdata.add_argument("--t", type=float, default=None, help="Snapshot time for xy-snapshot")
    plotdata.add_argument("--out", action=FullPaths, default=None, help="Output directory (default: next to trace)")

    example = subparsers.add_parser("example", help="Write a bundled scenario file")
    example.add_argument("name", choices=EXAMPLES + ["all"])
    example.add_argument("--out", action=FullPaths, default=str(paths.OUTPUT))
    return argparser


def main(argv=None):
    """
    Parse the command line and dispatch, returning the exit code.

    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=log_level(args.loglevel), format="%(asctime)s %(levelname)s %(message)s", datefmt="%H:%M:%S"
    )
    if os.environ.get("SIM_LOG", "info").lower() not in LOG_LEVELS:
        logging.warning(f"Ignoring unknown SIM_LOG, expected one of {', '.join(LOG_LEVELS)}")

    try:
        return dispatch(args)
    except Exception:
        logging.exception(f"sim {args.command} failed")
        return commands.EXIT_INVALID


def dispatch(args):
    if args.command == "run":
        config = commands.RunConfig(args.scenario, args.out, args.dt, args.t_end, args.every, args.seed)
        return commands.cmd_run(config, args.workers)
    if args.command == "analyze":
        return commands.cmd_analyze(args.scenario, args.out)
    if args.command == "plotdata":
        return commands.cmd_plotdata(args.trace, args.kind, args.t, args.out)
    return commands.cmd_example(args.name, args.out)


def sim():
    """
    Run the lane-less formation simulator.

    """
    sys.exit(main())


if __name__ == "__main__":
    sim()
