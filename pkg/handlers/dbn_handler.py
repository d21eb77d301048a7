import logging

from services.dbn import discretization_study, observed_order
from services.errors import ScenarioError
from utils.report_formatting import (
    format_study,
    output_path,
    study_to_document,
    write_json,
    write_study_csv,
)
from utils.scenario import apply_overrides, load_scenario

logger = logging.getLogger(__name__)


def dbn_handler(args) -> int:
    """Euler-discretization error table over the requested step sizes."""
    deltas = tuple(args.deltas) if args.deltas else None
    scenario = apply_overrides(load_scenario(args.scenario), seed=args.seed, tol=args.tol,
                               deltas=deltas)
    if not scenario.run.deltas:
        raise ScenarioError("run.deltas", "dbn-study needs step sizes (or pass --deltas)")
    horizon = scenario.simulation.horizon
    if horizon is None:
        raise ScenarioError("simulation.horizon", "dbn-study needs an explicit horizon")

    try:
        rows = discretization_study(scenario.ode(), scenario.run.deltas, horizon)
    except ValueError as e:
        raise ScenarioError("run.deltas", str(e)) from e
    try:
        order = observed_order(rows)
    except ValueError:
        logger.warning("Not enough finite errors to estimate the convergence order")
        order = None

    print(format_study(rows, order))
    path = write_study_csv(rows, output_path(args.out, scenario.name, "-dbn.csv"))
    write_json(study_to_document(rows, order), path.with_suffix(".json"))
    return 0
