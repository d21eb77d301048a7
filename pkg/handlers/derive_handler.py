import logging

from services.dscm import derive_dscm, intervene_dscm
from utils.report_formatting import dscm_to_document, format_dscm, output_path, write_json
from utils.scenario import load_scenario

logger = logging.getLogger(__name__)


def derive_handler(args) -> int:
    """
    Derive the DSCM of the observational system, then apply the scenario's
    interventions to it.
    """
    scenario = load_scenario(args.scenario)
    dscm = intervene_dscm(derive_dscm(scenario.base_ode()), scenario.interventions)
    print(format_dscm(dscm))
    write_json(dscm_to_document(dscm), output_path(args.out, scenario.name, "-dscm.json"))
    return 0
