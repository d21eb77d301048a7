"""
Scenario files: one JSON document drives every subcommand.

    {
      "name": "forced-oscillator",
      "system": {"kind": "linear", "variables": {
          "1": {"mass": 1.0, "damping": 0.1, "stiffness": 1.0,
                "parents": {"2": 1.0}, "constant": 2.0, "forcing": "0.0"},
          "2": {"clamp": "2.0*cos(3.0*t)"}}},
      "initial_conditions": {"1": [2.0, 0.0]},
      "interventions": {},
      "outer_interventions": {},
      "dyn": {"frequencies": [3.0], "allow_constant": true},
      "simulation": {"horizon": null, "dt": null},
      "run": {"seed": 0, "tol": 0.001, "ics": 5, "trials": 3, "deltas": []}
    }

A mass-spring system is written as
`{"kind": "mass_spring", "masses": [...], "dampings": [...], "springs": [...],
"lengths": [...], "wall": L}`. Signals use the literal grammar of
utils.signal_literal. Floats are written with repr, so loading a saved
scenario gives back identical numbers.
"""
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

from config import DEFAULT_ICS, DEFAULT_SEED, DEFAULT_TOL, DEFAULT_TRIALS
from services.errors import ModelConstructionError, ScenarioError, UnknownVariableError
from services.ode_model import (
    CausalOde,
    ClampedMechanism,
    LinearMechanism,
    Mechanism,
    build_mass_spring,
    intervene,
    rest_positions,
)
from services.stability import DynSpec
from services.trajectory import ZERO, TrajectoryBundle
from utils.signal_literal import format_signal, parse_signal

logger = logging.getLogger(__name__)

SYSTEM_KINDS = ("mass_spring", "linear")


@dataclass(frozen=True)
class MassSpringSystem:
    masses: Tuple[float, ...]
    dampings: Tuple[float, ...]
    springs: Tuple[float, ...]
    lengths: Tuple[float, ...]
    wall: float

    @property
    def size(self) -> int:
        return len(self.masses)


@dataclass(frozen=True)
class LinearSystem:
    variables: Mapping[int, Mechanism] = field(hash=False)

    @property
    def size(self) -> int:
        return len(self.variables)


System = Union[MassSpringSystem, LinearSystem]


@dataclass(frozen=True)
class SimulationSettings:
    horizon: Optional[float] = None
    dt: Optional[float] = None


@dataclass(frozen=True)
class RunSettings:
    seed: int = DEFAULT_SEED
    tol: float = DEFAULT_TOL
    ics: int = DEFAULT_ICS
    trials: int = DEFAULT_TRIALS
    deltas: Tuple[float, ...] = ()


@dataclass
class Scenario:
    name: str
    system: System
    initial_conditions: Dict[int, Tuple[float, float]] = field(default_factory=dict)
    interventions: TrajectoryBundle = field(default_factory=dict)
    outer_interventions: TrajectoryBundle = field(default_factory=dict)
    dyn: DynSpec = field(default_factory=DynSpec)
    simulation: SimulationSettings = field(default_factory=SimulationSettings)
    run: RunSettings = field(default_factory=RunSettings)

    def base_ode(self) -> CausalOde:
        """The system before the scenario's interventions."""
        return _build_ode(self)

    def ode(self) -> CausalOde:
        """The system with the scenario's interventions applied."""
        return _wrap("interventions", lambda: intervene(self.base_ode(), self.interventions))


def _wrap(where: str, build):
    try:
        return build()
    except UnknownVariableError as e:
        raise ScenarioError(f"{where}.{e.label}", str(e)) from e
    except (ModelConstructionError, ValueError) as e:
        if isinstance(e, ScenarioError):
            raise
        raise ScenarioError(where, str(e)) from e


def _build_ode(scenario: Scenario) -> CausalOde:
    system = scenario.system
    if isinstance(system, MassSpringSystem):
        chain = _wrap("system", lambda: build_mass_spring(
            system.size, system.masses, system.dampings, system.springs, system.lengths,
            system.wall,
        ))
        mechanisms = chain.mechanisms
        conditions = dict(chain.initial_conditions)
    else:
        mechanisms = system.variables
        without_ics = _wrap("system", lambda: CausalOde(mechanisms))
        rest = rest_positions(without_ics) or {}
        conditions = {label: (rest.get(label, 0.0), 0.0) for label in without_ics.free_labels}
    conditions.update(scenario.initial_conditions)
    return _wrap("initial_conditions", lambda: CausalOde(mechanisms, conditions))


# Reading


def _require(data: Mapping[str, Any], key: str, where: str):
    if key not in data:
        raise ScenarioError(f"{where}.{key}" if where else key, "missing required field")
    return data[key]


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(where, f"expected a number, got {value!r}")
    number = float(value)
    if not math.isfinite(number):
        raise ScenarioError(where, f"expected a finite number, got {value!r}")
    return number


def _optional_number(value, where: str) -> Optional[float]:
    return None if value is None else _number(value, where)


def _integer(value, where: str, minimum: Optional[int] = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(where, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ScenarioError(where, f"must be at least {minimum}, got {value}")
    return value


def _numbers(value, where: str) -> Tuple[float, ...]:
    if not isinstance(value, list):
        raise ScenarioError(where, f"expected a list of numbers, got {value!r}")
    return tuple(_number(v, f"{where}[{i}]") for i, v in enumerate(value))


def _mapping(value, where: str) -> Mapping[str, Any]:
    if not isinstance(value, dict):
        raise ScenarioError(where, f"expected an object, got {value!r}")
    return value


def _label(key: str, where: str) -> int:
    try:
        label = int(key)
    except (TypeError, ValueError):
        raise ScenarioError(f"{where}.{key}", "variable labels must be integers") from None
    if label < 1:
        raise ScenarioError(f"{where}.{key}", "variable labels start at 1")
    return label


def _signals(value, where: str) -> TrajectoryBundle:
    bundle = {}
    for key, literal in _mapping(value or {}, where).items():
        bundle[_label(key, where)] = parse_signal(literal, f"{where}.{key}")
    return dict(sorted(bundle.items()))


def _read_system(data: Mapping[str, Any]) -> System:
    kind = _require(data, "kind", "system")
    if kind == "mass_spring":
        return MassSpringSystem(
            masses=_numbers(_require(data, "masses", "system"), "system.masses"),
            dampings=_numbers(_require(data, "dampings", "system"), "system.dampings"),
            springs=_numbers(_require(data, "springs", "system"), "system.springs"),
            lengths=_numbers(_require(data, "lengths", "system"), "system.lengths"),
            wall=_number(_require(data, "wall", "system"), "system.wall"),
        )
    if kind != "linear":
        raise ScenarioError("system.kind", f"expected one of {SYSTEM_KINDS}, got {kind!r}")

    variables: Dict[int, Mechanism] = {}
    for key, entry in _mapping(_require(data, "variables", "system"), "system.variables").items():
        where = f"system.variables.{key}"
        label = _label(key, "system.variables")
        entry = _mapping(entry, where)
        if "clamp" in entry:
            variables[label] = ClampedMechanism(parse_signal(entry["clamp"], f"{where}.clamp"))
            continue
        parents = {
            _label(p, f"{where}.parents"): _number(w, f"{where}.parents.{p}")
            for p, w in _mapping(entry.get("parents", {}), f"{where}.parents").items()
        }
        forcing = entry.get("forcing")
        variables[label] = _wrap(where, lambda: LinearMechanism(
            mass=_number(_require(entry, "mass", where), f"{where}.mass"),
            damping=_number(_require(entry, "damping", where), f"{where}.damping"),
            stiffness=_number(_require(entry, "stiffness", where), f"{where}.stiffness"),
            parent_weights=parents,
            constant=_number(entry.get("constant", 0.0), f"{where}.constant"),
            forcing=ZERO if forcing is None else parse_signal(forcing, f"{where}.forcing"),
        ))
    return LinearSystem(dict(sorted(variables.items())))


def _read_initial_conditions(value) -> Dict[int, Tuple[float, float]]:
    conditions = {}
    for key, pair in _mapping(value or {}, "initial_conditions").items():
        where = f"initial_conditions.{key}"
        if not isinstance(pair, list) or len(pair) != 2:
            raise ScenarioError(where, f"expected [position, velocity], got {pair!r}")
        conditions[_label(key, "initial_conditions")] = (
            _number(pair[0], f"{where}[0]"), _number(pair[1], f"{where}[1]"),
        )
    return dict(sorted(conditions.items()))


def _read_dyn(value) -> DynSpec:
    data = _mapping(value or {}, "dyn")
    per_label = {
        _label(key, "dyn.per_label"): _numbers(ws, f"dyn.per_label.{key}")
        for key, ws in _mapping(data.get("per_label", {}), "dyn.per_label").items()
    }
    allow_constant = data.get("allow_constant", True)
    if not isinstance(allow_constant, bool):
        raise ScenarioError("dyn.allow_constant", f"expected true or false, got {allow_constant!r}")
    frequencies = _numbers(data.get("frequencies", []), "dyn.frequencies")
    amplitude_bound = _optional_number(data.get("amplitude_bound"), "dyn.amplitude_bound")
    max_components = _integer(data.get("max_components", 3), "dyn.max_components", 1)
    return _wrap("dyn", lambda: DynSpec(frequencies, per_label, allow_constant, amplitude_bound,
                                        max_components))


def _read_simulation(value) -> SimulationSettings:
    data = _mapping(value or {}, "simulation")
    horizon = _optional_number(data.get("horizon"), "simulation.horizon")
    dt = _optional_number(data.get("dt"), "simulation.dt")
    if horizon is not None and not horizon > 0:
        raise ScenarioError("simulation.horizon", f"must be positive, got {horizon}")
    if dt is not None and not dt > 0:
        raise ScenarioError("simulation.dt", f"must be positive, got {dt}")
    if horizon is not None and dt is not None and not dt < horizon:
        raise ScenarioError("simulation.dt", f"must be smaller than the horizon, got {dt}")
    return SimulationSettings(horizon, dt)


def _read_run(value) -> RunSettings:
    data = _mapping(value or {}, "run")
    tol = _number(data.get("tol", DEFAULT_TOL), "run.tol")
    if not tol > 0:
        raise ScenarioError("run.tol", f"must be positive, got {tol}")
    deltas = _numbers(data.get("deltas", []), "run.deltas")
    if any(not d > 0 for d in deltas):
        raise ScenarioError("run.deltas", f"must be positive, got {list(deltas)}")
    return RunSettings(
        seed=_integer(data.get("seed", DEFAULT_SEED), "run.seed", 0),
        tol=tol,
        ics=_integer(data.get("ics", DEFAULT_ICS), "run.ics", 2),
        trials=_integer(data.get("trials", DEFAULT_TRIALS), "run.trials", 1),
        deltas=deltas,
    )


def scenario_from_dict(data: Mapping[str, Any]) -> Scenario:
    """
    Build and validate a Scenario. The system is constructed once with its
    interventions so that every construction rule is checked before any run.

    Raises:
        ScenarioError: naming the offending field
    """
    data = _mapping(data, "scenario")
    name = data.get("name", "scenario")
    if not isinstance(name, str):
        raise ScenarioError("name", f"expected a string, got {name!r}")
    scenario = Scenario(
        name=name,
        system=_read_system(_mapping(_require(data, "system", ""), "system")),
        initial_conditions=_read_initial_conditions(data.get("initial_conditions")),
        interventions=_signals(data.get("interventions"), "interventions"),
        outer_interventions=_signals(data.get("outer_interventions"), "outer_interventions"),
        dyn=_read_dyn(data.get("dyn")),
        simulation=_read_simulation(data.get("simulation")),
        run=_read_run(data.get("run")),
    )
    shared = set(scenario.interventions) & set(scenario.outer_interventions)
    if shared:
        raise ScenarioError("outer_interventions",
                            f"targets {sorted(shared)} are already intervened on")
    ode = scenario.ode()
    for label in scenario.outer_interventions:
        if label not in ode.mechanisms:
            raise ScenarioError(f"outer_interventions.{label}", f"unknown variable X{label}")
    logger.debug(f"Validated scenario {name!r} with {ode.size} variables")
    return scenario


def parse_scenario(text: str) -> Scenario:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError("scenario", f"invalid JSON at line {e.lineno}: {e.msg}") from e
    return scenario_from_dict(data)


def load_scenario(path: Union[str, Path]) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioError("scenario", f"cannot read {path}: {e.strerror}") from e
    logger.info(f"Loaded scenario file {path}")
    return parse_scenario(text)


# Writing


def _labelled(mapping: Mapping[int, Any], convert) -> Dict[str, Any]:
    return {str(label): convert(value) for label, value in sorted(mapping.items())}


def _write_system(system: System) -> Dict[str, Any]:
    if isinstance(system, MassSpringSystem):
        return {
            "kind": "mass_spring",
            "masses": list(system.masses),
            "dampings": list(system.dampings),
            "springs": list(system.springs),
            "lengths": list(system.lengths),
            "wall": system.wall,
        }
    variables: Dict[str, Any] = {}
    for label, mech in sorted(system.variables.items()):
        if isinstance(mech, ClampedMechanism):
            variables[str(label)] = {"clamp": format_signal(mech.signal)}
        else:
            variables[str(label)] = {
                "mass": mech.mass,
                "damping": mech.damping,
                "stiffness": mech.stiffness,
                "parents": _labelled(mech.parent_weights, float),
                "constant": mech.constant,
                "forcing": format_signal(mech.forcing),
            }
    return {"kind": "linear", "variables": variables}


def scenario_to_dict(scenario: Scenario) -> Dict[str, Any]:
    dyn = scenario.dyn
    run = scenario.run
    return {
        "name": scenario.name,
        "system": _write_system(scenario.system),
        "initial_conditions": _labelled(scenario.initial_conditions, list),
        "interventions": _labelled(scenario.interventions, format_signal),
        "outer_interventions": _labelled(scenario.outer_interventions, format_signal),
        "dyn": {
            "frequencies": list(dyn.frequencies),
            "per_label": _labelled(dyn.per_label, list),
            "allow_constant": dyn.allow_constant,
            "amplitude_bound": dyn.amplitude_bound,
            "max_components": dyn.max_components,
        },
        "simulation": {"horizon": scenario.simulation.horizon, "dt": scenario.simulation.dt},
        "run": {
            "seed": run.seed,
            "tol": run.tol,
            "ics": run.ics,
            "trials": run.trials,
            "deltas": list(run.deltas),
        },
    }


def serialize_scenario(scenario: Scenario) -> str:
    return json.dumps(scenario_to_dict(scenario), indent=2) + "\n"


def save_scenario(scenario: Scenario, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(serialize_scenario(scenario), encoding="utf-8")
    return path


def apply_overrides(scenario: Scenario, seed: Optional[int] = None, tol: Optional[float] = None,
                    ics: Optional[int] = None, trials: Optional[int] = None,
                    deltas: Optional[Tuple[float, ...]] = None) -> Scenario:
    """Scenario with command-line flags taking precedence over its run section."""
    changes = {name: value for name, value in
               (("seed", seed), ("tol", tol), ("ics", ics), ("trials", trials), ("deltas", deltas))
               if value is not None}
    if not changes:
        return scenario
    run = _read_run({**scenario_to_dict(scenario)["run"], **{
        k: list(v) if k == "deltas" else v for k, v in changes.items()
    }})
    return replace(scenario, run=run)
