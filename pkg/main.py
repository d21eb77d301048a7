import argparse
import logging
import sys

from config import LOG_LEVEL
from handlers.commute_handler import commute_handler
from handlers.dbn_handler import dbn_handler
from handlers.derive_handler import derive_handler
from handlers.error_handler import error_handler
from handlers.graph_handler import graph_handler
from handlers.simulate_handler import simulate_handler
from handlers.solve_handler import solve_handler
from handlers.stability_handler import stability_handler

HANDLERS = {
    "simulate": simulate_handler,
    "graph": graph_handler,
    "derive": derive_handler,
    "solve": solve_handler,
    "check-stability": stability_handler,
    "verify-commute": commute_handler,
    "dbn-study": dbn_handler,
}


def setup_logging():
    logging.basicConfig(
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
        level=getattr(logging, LOG_LEVEL.upper(), logging.INFO),
    )


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", required=True, help="Path to the scenario JSON file")
    common.add_argument("--out", default=None,
                        help="Output file (default: a file under DSCM_OUTPUT_DIR)")
    common.add_argument("--seed", type=int, default=None, help="Seed for random initial conditions")
    common.add_argument("--tol", type=float, default=None, help="Stability and solution tolerance")

    parser = argparse.ArgumentParser(
        description="Simulate causal ODE systems and check their dynamic structural causal models"
    )
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("simulate", parents=[common], help="Write the trajectory CSV")
    commands.add_parser("graph", parents=[common], help="Print the causal graph edge lists")
    commands.add_parser("derive", parents=[common], help="Derive the DSCM")
    commands.add_parser("solve", parents=[common], help="Solve the intervened DSCM")

    stability = commands.add_parser("check-stability", parents=[common],
                                    help="Check (structural) dynamic stability")
    stability.add_argument("--ics", type=int, default=None, help="Number of initial conditions")
    stability.add_argument("--trials", type=int, default=None,
                           help="Also run the structural check with this many trials per variable")

    commands.add_parser("verify-commute", parents=[common],
                        help="Check that deriving and intervening commute")

    study = commands.add_parser("dbn-study", parents=[common],
                                help="Euler discretization error table")
    study.add_argument("--deltas", type=float, nargs="+", default=None, help="Step sizes to study")
    return parser


def main(argv=None) -> int:
    setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return HANDLERS[args.command](args)
    except Exception as e:
        return error_handler(e)


if __name__ == "__main__":
    sys.exit(main())
