import logging

from services.dscm import derive_dscm, solve_dscm
from utils.report_formatting import bundle_to_document, format_bundle, output_path, write_json
from utils.scenario import load_scenario

logger = logging.getLogger(__name__)


def solve_handler(args) -> int:
    """Print the asymptotic signal of every variable of the intervened DSCM."""
    scenario = load_scenario(args.scenario)
    solution = solve_dscm(derive_dscm(scenario.ode()))
    print(format_bundle(solution))
    write_json({"solution": bundle_to_document(solution)},
               output_path(args.out, scenario.name, "-solution.json"))
    return 0
