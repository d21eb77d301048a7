import json

import pytest

from services.errors import ScenarioError, SignalSyntaxError
from services.ode_model import ClampedMechanism
from services.trajectory import cosine
from utils.scenario import (
    LinearSystem,
    MassSpringSystem,
    apply_overrides,
    load_scenario,
    parse_scenario,
    save_scenario,
    scenario_from_dict,
    serialize_scenario,
)

SCENARIOS = ["fig3_omega3.json", "fig3_omega2.json", "forced_study.json", "chain2.json",
             "chain3_double.json", "clamped.json"]


def chain_document(**changes):
    document = {
        "name": "chain",
        "system": {"kind": "mass_spring", "masses": [1.0, 1.0], "dampings": [0.5, 0.5],
                   "springs": [1.0, 1.0, 1.0], "lengths": [1.0, 1.0, 1.0], "wall": 3.0},
    }
    document.update(changes)
    return document


@pytest.mark.parametrize("name", SCENARIOS)
def test_saved_scenarios_read_back_identically(data_dir, name):
    scenario = load_scenario(data_dir / name)
    text = serialize_scenario(scenario)
    again = parse_scenario(text)
    assert again == scenario
    assert serialize_scenario(again) == text


def test_awkward_numbers_survive_a_round_trip(tmp_path):
    document = chain_document(
        interventions={"1": "0.1 + 0.30000000000000004*cos(2.718281828459045*t - 1e-17)"},
        initial_conditions={"2": [2.0000000000000004, -3.3e-300]},
        run={"tol": 1.0e-3, "deltas": [0.1, 0.05]},
    )
    scenario = scenario_from_dict(document)
    path = save_scenario(scenario, tmp_path / "saved.json")
    assert load_scenario(path) == scenario
    assert load_scenario(path).initial_conditions[2] == (2.0000000000000004, -3.3e-300)


def test_mass_spring_scenario_builds_the_chain(data_dir):
    scenario = load_scenario(data_dir / "chain2.json")
    assert isinstance(scenario.system, MassSpringSystem)
    base = scenario.base_ode()
    assert base.mechanisms[2].constant == 3.0
    ode = scenario.ode()
    assert ode.clamped_labels == (1,)
    assert ode.mechanisms[1] == ClampedMechanism(cosine(0.5, 2.0, offset=1.0))


def test_linear_scenario(data_dir):
    scenario = load_scenario(data_dir / "fig3_omega3.json")
    assert isinstance(scenario.system, LinearSystem)
    ode = scenario.ode()
    assert ode.mechanisms[1].parent_weights == {2: 1.0}
    assert ode.initial_conditions[1] == (2.0, 0.0)
    assert scenario.dyn.frequencies == (3.0,)
    assert scenario.simulation.horizon is None


def test_unknown_intervention_target_names_the_field():
    with pytest.raises(ScenarioError) as excinfo:
        scenario_from_dict(chain_document(interventions={"7": "1.0"}))
    assert excinfo.value.field == "interventions.7"


def test_bad_signal_literal_names_the_field():
    with pytest.raises(SignalSyntaxError) as excinfo:
        scenario_from_dict(chain_document(interventions={"1": "1 + sin(t)"}))
    assert excinfo.value.field == "interventions.1"


@pytest.mark.parametrize("document, field", [
    ({"name": "x"}, "system"),
    (chain_document(system={"kind": "pendulum"}), "system.kind"),
    (chain_document(system={"kind": "mass_spring", "masses": [1.0], "dampings": [0.5],
                            "springs": [1.0, 1.0, 1.0], "lengths": [1.0, 1.0], "wall": 3.0}),
     "system"),
    (chain_document(system={"kind": "linear", "variables": {"1": {"mass": 1.0, "damping": 0.1}}}),
     "system.variables.1.stiffness"),
    (chain_document(system={"kind": "linear", "variables": {
        "1": {"mass": -1.0, "damping": 0.1, "stiffness": 1.0}}}), "system.variables.1"),
    (chain_document(initial_conditions={"1": [1.0]}), "initial_conditions.1"),
    (chain_document(dyn={"frequencies": [-1.0]}), "dyn"),
    (chain_document(run={"tol": 0}), "run.tol"),
    (chain_document(run={"ics": 1}), "run.ics"),
    (chain_document(simulation={"horizon": 1.0, "dt": 2.0}), "simulation.dt"),
    (chain_document(masses="heavy"), None),
    (chain_document(interventions={"1": "1.0"}, outer_interventions={"1": "2.0"}), "outer_interventions"),
])
def test_validation_errors(document, field):
    if field is None:
        # unknown top-level keys are ignored
        scenario_from_dict(document)
        return
    with pytest.raises(ScenarioError) as excinfo:
        scenario_from_dict(document)
    assert excinfo.value.field == field


def test_invalid_json_is_a_scenario_error():
    with pytest.raises(ScenarioError):
        parse_scenario("{not json")


def test_missing_file_is_a_scenario_error(tmp_path):
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "missing.json")


def test_overrides_take_precedence(data_dir):
    scenario = load_scenario(data_dir / "chain2.json")
    overridden = apply_overrides(scenario, seed=4, tol=1e-4, deltas=(0.1,))
    assert (overridden.run.seed, overridden.run.tol, overridden.run.deltas) == (4, 1e-4, (0.1,))
    assert overridden.run.ics == scenario.run.ics
    assert apply_overrides(scenario) is scenario
    with pytest.raises(ScenarioError):
        apply_overrides(scenario, ics=1)


def test_serialized_document_is_plain_json(data_dir):
    document = json.loads(serialize_scenario(load_scenario(data_dir / "chain3_double.json")))
    assert list(document) == ["name", "system", "initial_conditions", "interventions",
                              "outer_interventions", "dyn", "simulation", "run"]
    assert document["outer_interventions"]["3"].startswith("3.0")
