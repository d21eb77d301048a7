import logging

from services.stability import check_dynamic_stability, check_structural_dynamic_stability
from utils.report_formatting import (
    format_stability_report,
    format_structural_report,
    output_path,
    stability_report_to_document,
    structural_report_to_document,
    write_json,
)
from utils.scenario import apply_overrides, load_scenario

logger = logging.getLogger(__name__)


def stability_handler(args) -> int:
    """
    Check dynamic stability of the intervened system. With --trials, also
    run the structural check against the scenario's dyn family.

    Returns:
        0 when every check passes, 1 otherwise
    """
    scenario = apply_overrides(load_scenario(args.scenario), seed=args.seed, tol=args.tol,
                               ics=args.ics, trials=args.trials)
    run = scenario.run
    ode = scenario.ode()
    report = check_dynamic_stability(ode, scenario.dyn, n_ics=run.ics,
                                     horizon=scenario.simulation.horizon, tol=run.tol,
                                     seed=run.seed, dt=scenario.simulation.dt)
    print(format_stability_report(report))
    document = {"dynamic": stability_report_to_document(report)}
    passed = report.stable

    if args.trials is not None:
        structural = check_structural_dynamic_stability(
            ode, scenario.dyn, trials=run.trials, seed=run.seed, tol=run.tol,
            horizon=scenario.simulation.horizon,
        )
        print(format_structural_report(structural))
        document["structural"] = structural_report_to_document(structural)
        passed = passed and structural.passed

    write_json(document, output_path(args.out, scenario.name, "-stability.json"))
    return 0 if passed else 1
