import logging

from services.dscm import verify_commutation
from utils.report_formatting import (
    commutation_report_to_document,
    format_commutation_report,
    output_path,
    write_json,
)
from utils.scenario import apply_overrides, load_scenario

logger = logging.getLogger(__name__)


def commute_handler(args) -> int:
    """
    Check that deriving and intervening commute for the scenario's
    interventions (outer_interventions are applied on both paths).
    Prints PASS or FAIL and exits 1 on FAIL.
    """
    scenario = apply_overrides(load_scenario(args.scenario), seed=args.seed, tol=args.tol)
    report = verify_commutation(
        scenario.base_ode(),
        scenario.interventions,
        scenario.outer_interventions,
        tol=scenario.run.tol,
        horizon=scenario.simulation.horizon,
        dt=scenario.simulation.dt,
    )
    print(format_commutation_report(report))
    write_json(commutation_report_to_document(report),
               output_path(args.out, scenario.name, "-commute.json"))
    return 0 if report.passed else 1
