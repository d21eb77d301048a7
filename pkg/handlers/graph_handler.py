import logging

from services.ode_model import causal_graph, edge_list
from utils.report_formatting import format_edges, output_path, write_json
from utils.scenario import load_scenario

logger = logging.getLogger(__name__)


def graph_handler(args) -> int:
    """Print the causal graph before and after the scenario's interventions."""
    scenario = load_scenario(args.scenario)
    before = causal_graph(scenario.base_ode())
    after = causal_graph(scenario.ode())
    print(f"observational: {format_edges(before)}")
    print(f"intervened:    {format_edges(after)}")
    document = {
        "observational": [list(edge) for edge in edge_list(before)],
        "intervened": [list(edge) for edge in edge_list(after)],
    }
    write_json(document, output_path(args.out, scenario.name, "-graph.json"))
    return 0
