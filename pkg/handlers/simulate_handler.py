import logging

from services.integrator import simulate
from services.stability import settling_horizon
from utils.report_formatting import output_path, write_trajectory_csv
from utils.scenario import apply_overrides, load_scenario

logger = logging.getLogger(__name__)


def simulate_handler(args) -> int:
    """
    Integrate the scenario's intervened system and write the trajectory CSV.
    Without a horizon in the scenario, the run lasts long enough for the
    transient to settle below the tolerance.
    """
    scenario = apply_overrides(load_scenario(args.scenario), seed=args.seed, tol=args.tol)
    ode = scenario.ode()
    horizon = scenario.simulation.horizon
    if horizon is None:
        horizon, _ = settling_horizon(ode, scenario.run.tol)
    result = simulate(ode, horizon, scenario.simulation.dt)
    path = write_trajectory_csv(result, output_path(args.out, scenario.name, ".csv"))
    print(f"Wrote {len(result)} samples of {len(result.labels)} variables "
          f"(T={horizon:g}, dt={result.dt:g}) to {path}")
    return 0
