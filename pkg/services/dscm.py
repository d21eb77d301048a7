"""
Dynamic structural causal models derived from damped linear mechanisms.

For a mechanism m x'' + b x' + a x = sum_j w_j x_j + c + forcing(t) with
b > 0 and a > 0, the asymptotic response to quasi-periodic parents is
again quasi-periodic:

  - constant part   (c + forcing offset + sum_j w_j offset_j) / a
  - a parent cosine (A, w, p) of X_j maps to (A |H_j(w)|, w, p + arg H_j(w))
    with H_j(w) = w_j / (a - m w^2 + i b w)
  - a forcing cosine maps through 1 / (a - m w^2 + i b w).

Structural equations keep the coefficient record (m, b, a, w, c, forcing)
rather than a closure, so two derivations can be compared exactly.
"""
import cmath
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from config import (
    COEFFICIENT_TOL,
    DEFAULT_TOL,
    FREQUENCY_MERGE_EPS,
    SINGULAR_EPS,
    SOLUTION_CHECK_TOL,
)
from services.errors import (
    InconsistentSolutionError,
    MissingParentError,
    ModelConstructionError,
    NoUniqueSolutionError,
    StabilityPreconditionError,
    UnderdeterminedDcError,
    UnknownVariableError,
)
from services.ode_model import (
    CausalOde,
    ClampedMechanism,
    LinearMechanism,
    intervene,
)
from services.stability import simulated_asymptotics
from services.trajectory import (
    CosComponent,
    QuasiPeriodicSignal,
    TrajectoryBundle,
    asymptotically_equal,
    bundles_distance,
    canonicalize,
    frequencies,
    merge_bundles,
    phasor_at,
    signal_distance,
)

logger = logging.getLogger(__name__)


def frequency_response(mass: float, damping: float, stiffness: float, weight: float,
                       omega: float) -> complex:
    """Complex gain weight / (a - m w^2 + i b w) of a damped linear mechanism."""
    return weight / complex(stiffness - mass * omega ** 2, damping * omega)


def amplitude_phase_transform(mass: float, damping: float, stiffness: float, weight: float,
                              amplitude: float, phase: float, omega: float) -> Tuple[float, float]:
    """
    Asymptotic (amplitude, phase) of the response to weight * A cos(w t + p):
    A' = |weight| A / sqrt((a - m w^2)^2 + (b w)^2),
    p' = p - atan2(b w, a - m w^2) (shifted by pi for negative weights).
    """
    gain = frequency_response(mass, damping, stiffness, weight, omega)
    return amplitude * abs(gain), phase + cmath.phase(gain)


@dataclass(frozen=True)
class StructuralEquation:
    owner: int
    mass: float
    damping: float
    stiffness: float
    parent_weights: Mapping[int, float] = field(default_factory=dict, hash=False)
    constant: float = 0.0
    forcing: QuasiPeriodicSignal = QuasiPeriodicSignal()

    @property
    def parents(self) -> Tuple[int, ...]:
        return tuple(self.parent_weights)

    def dc_gain(self, parent: int) -> float:
        return self.parent_weights[parent] / self.stiffness

    @property
    def dc_offset(self) -> float:
        return (self.constant + self.forcing.offset) / self.stiffness

    def gain(self, parent: int, omega: float) -> complex:
        return frequency_response(self.mass, self.damping, self.stiffness,
                                  self.parent_weights[parent], omega)

    def forcing_gain(self, omega: float) -> complex:
        return frequency_response(self.mass, self.damping, self.stiffness, 1.0, omega)


DscmEntry = Union[StructuralEquation, ClampedMechanism]


@dataclass(frozen=True)
class Dscm:
    entries: Mapping[int, DscmEntry] = field(hash=False)

    def __post_init__(self):
        object.__setattr__(self, "entries", dict(sorted(self.entries.items())))
        for label, entry in self.entries.items():
            if isinstance(entry, StructuralEquation):
                missing = [p for p in entry.parents if p not in self.entries]
                if missing:
                    raise UnknownVariableError(missing[0], f"parents of X{label}")

    @property
    def labels(self) -> Tuple[int, ...]:
        return tuple(self.entries)

    @property
    def equations(self) -> Dict[int, StructuralEquation]:
        return {l: e for l, e in self.entries.items() if isinstance(e, StructuralEquation)}

    @property
    def clamps(self) -> Dict[int, QuasiPeriodicSignal]:
        return {l: e.signal for l, e in self.entries.items() if isinstance(e, ClampedMechanism)}


@dataclass
class CommutationReport:
    path_a: Dscm
    path_b: Dscm
    coefficient_discrepancy: float
    solution_a: TrajectoryBundle
    solution_b: TrajectoryBundle
    simulated: TrajectoryBundle
    solution_discrepancy: float
    coefficient_tol: float = COEFFICIENT_TOL
    solution_tol: float = DEFAULT_TOL

    @property
    def passed(self) -> bool:
        return (self.coefficient_discrepancy <= self.coefficient_tol
                and self.solution_discrepancy <= self.solution_tol)


def derive_dscm(ode: CausalOde) -> Dscm:
    """
    Structural equations of every linear variable; clamped variables keep
    their signals.

    Raises:
        UnderdeterminedDcError: a linear mechanism has zero self-stiffness
        StabilityPreconditionError: zero damping or negative self-stiffness
    """
    entries: Dict[int, DscmEntry] = {}
    for label, mech in ode.mechanisms.items():
        if isinstance(mech, ClampedMechanism):
            entries[label] = ClampedMechanism(canonicalize(mech.signal))
            continue
        if mech.stiffness == 0:
            raise UnderdeterminedDcError(
                f"X{label} has zero self-stiffness; its constant response is undetermined"
            )
        if not mech.damping > 0:
            raise StabilityPreconditionError(
                f"X{label} is undamped (b={mech.damping}); its free oscillation never decays"
            )
        if mech.stiffness < 0:
            raise StabilityPreconditionError(
                f"X{label} has negative self-stiffness a={mech.stiffness}; it is unstable"
            )
        entries[label] = StructuralEquation(
            owner=label,
            mass=mech.mass,
            damping=mech.damping,
            stiffness=mech.stiffness,
            parent_weights=dict(mech.parent_weights),
            constant=mech.constant,
            forcing=canonicalize(mech.forcing),
        )
    logger.info(f"Derived DSCM with {len(entries)} entries")
    return Dscm(entries)


def apply_structural_equation(equation: StructuralEquation,
                              parents: Mapping[int, QuasiPeriodicSignal]) -> QuasiPeriodicSignal:
    """Image of the parent trajectories under F_i, canonicalized."""
    offset = equation.constant + equation.forcing.offset
    components: List[CosComponent] = []
    for parent, weight in equation.parent_weights.items():
        if parent not in parents:
            raise MissingParentError(equation.owner, parent)
        signal = canonicalize(parents[parent])
        offset += weight * signal.offset
        for comp in signal.components:
            z = comp.phasor * equation.gain(parent, comp.angular_frequency)
            components.append(CosComponent(abs(z), comp.angular_frequency, cmath.phase(z)))
    for comp in equation.forcing.components:
        z = comp.phasor * equation.forcing_gain(comp.angular_frequency)
        components.append(CosComponent(abs(z), comp.angular_frequency, cmath.phase(z)))
    return canonicalize(QuasiPeriodicSignal(offset / equation.stiffness, tuple(components)))


def intervene_dscm(dscm: Dscm, targets: TrajectoryBundle) -> Dscm:
    entries = dict(dscm.entries)
    for label, signal in targets.items():
        if label not in entries:
            raise UnknownVariableError(label, "intervention targets")
        entries[label] = ClampedMechanism(canonicalize(signal))
    return Dscm(entries)


def _active_frequencies(dscm: Dscm) -> List[float]:
    found = [0.0]
    for signal in dscm.clamps.values():
        found.extend(frequencies(signal))
    for equation in dscm.equations.values():
        found.extend(frequencies(equation.forcing))
    merged: List[float] = []
    for w in sorted(found):
        if merged and abs(w - merged[-1]) <= FREQUENCY_MERGE_EPS * max(1.0, w):
            continue
        merged.append(w)
    return merged


def solve_dscm(dscm: Dscm) -> TrajectoryBundle:
    """
    Unique solution of the DSCM: one complex linear system (Id - H(w)) z = b(w)
    per active frequency w, the real constant system at w = 0.

    Raises:
        NoUniqueSolutionError: some per-frequency system is (near) singular
    """
    clamps = {l: canonicalize(s) for l, s in dscm.clamps.items()}
    equations = dscm.equations
    free = list(equations)
    if not free:
        return clamps
    index = {label: k for k, label in enumerate(free)}
    n = len(free)

    offsets = np.zeros(n)
    phasors: Dict[int, List[Tuple[float, complex]]] = {label: [] for label in free}
    for omega in _active_frequencies(dscm):
        matrix = np.eye(n, dtype=complex)
        rhs = np.zeros(n, dtype=complex)
        for label, equation in equations.items():
            row = index[label]
            for parent in equation.parents:
                gain = equation.gain(parent, omega)
                if parent in index:
                    matrix[row, index[parent]] -= gain
                else:
                    rhs[row] += gain * phasor_at(clamps[parent], omega)
            rhs[row] += equation.forcing_gain(omega) * phasor_at(equation.forcing, omega)
            if omega == 0.0:
                rhs[row] += equation.constant / equation.stiffness
        condition = float(np.linalg.cond(matrix))
        if not math.isfinite(condition) or condition > 1.0 / SINGULAR_EPS:
            raise NoUniqueSolutionError(omega, condition)
        z = scipy.linalg.solve(matrix, rhs)
        if omega == 0.0:
            offsets = z.real
        else:
            for label in free:
                phasors[label].append((omega, z[index[label]]))

    solution: TrajectoryBundle = dict(clamps)
    for label in free:
        components = tuple(CosComponent(abs(z), w, cmath.phase(z)) for w, z in phasors[label])
        solution[label] = canonicalize(QuasiPeriodicSignal(float(offsets[index[label]]), components))
    solution = dict(sorted(solution.items()))

    for label, equation in equations.items():
        image = apply_structural_equation(equation, solution)
        if not asymptotically_equal(image, solution[label], SOLUTION_CHECK_TOL):
            raise InconsistentSolutionError(
                f"X{label} differs from F_{label} of its parents by "
                f"{signal_distance(image, solution[label], SOLUTION_CHECK_TOL):.3g}"
            )
    return solution


def coefficient_discrepancy(a: StructuralEquation, b: StructuralEquation) -> float:
    """Largest absolute difference of two coefficient records; inf when their structure differs."""
    if a.owner != b.owner or set(a.parents) != set(b.parents):
        return math.inf
    differences = [
        abs(a.mass - b.mass),
        abs(a.damping - b.damping),
        abs(a.stiffness - b.stiffness),
        abs(a.constant - b.constant),
        signal_distance(a.forcing, b.forcing, COEFFICIENT_TOL),
    ]
    differences.extend(abs(a.parent_weights[p] - b.parent_weights[p]) for p in a.parents)
    return max(differences)


def dscm_discrepancy(a: Dscm, b: Dscm) -> float:
    if a.labels != b.labels:
        return math.inf
    worst = 0.0
    for label in a.labels:
        left, right = a.entries[label], b.entries[label]
        if isinstance(left, StructuralEquation) and isinstance(right, StructuralEquation):
            worst = max(worst, coefficient_discrepancy(left, right))
        elif isinstance(left, ClampedMechanism) and isinstance(right, ClampedMechanism):
            worst = max(worst, signal_distance(left.signal, right.signal, COEFFICIENT_TOL))
        else:
            return math.inf
    return worst


def verify_commutation(ode: CausalOde, inner: TrajectoryBundle,
                       outer: Optional[TrajectoryBundle] = None, tol: float = DEFAULT_TOL,
                       horizon: Optional[float] = None,
                       dt: Optional[float] = None) -> CommutationReport:
    """
    Compare derive-then-intervene with intervene-then-derive, and both
    solutions with the simulated asymptotics of the intervened system.

    Args:
        ode: Source system
        inner: Intervention applied to the ODE before deriving on path B
        outer: Further intervention on disjoint labels, applied to the
            DSCM on both paths
        tol: Solution-level tolerance against simulation
        horizon: Simulation horizon, defaults to the settling horizon
        dt: Simulation step

    Returns:
        CommutationReport
    """
    outer = dict(outer or {})
    shared = set(inner) & set(outer)
    if shared:
        raise ValueError(f"outer intervention must avoid inner targets, both contain {sorted(shared)}")

    path_a = intervene_dscm(intervene_dscm(derive_dscm(ode), inner), outer)
    path_b = intervene_dscm(derive_dscm(intervene(ode, inner)), outer)
    coefficient_gap = dscm_discrepancy(path_a, path_b)

    solution_a = solve_dscm(path_a)
    solution_b = solve_dscm(path_b)
    target = intervene(ode, merge_bundles(inner, outer))
    simulated, _ = simulated_asymptotics(target, horizon=horizon, dt=dt, tol=tol)
    solution_gap = max(bundles_distance(solution_a, simulated, tol),
                       bundles_distance(solution_b, simulated, tol))

    report = CommutationReport(path_a, path_b, coefficient_gap, solution_a, solution_b,
                               simulated, solution_gap, COEFFICIENT_TOL, tol)
    logger.info(f"Commutation check {'PASS' if report.passed else 'FAIL'}: coefficients "
                f"{coefficient_gap:.3g}, solution vs simulation {solution_gap:.3g}")
    return report


def mass_spring_equilibrium_scm(spring_constants: Sequence[float], natural_lengths: Sequence[float],
                                wall_position: float,
                                clamps: Mapping[int, float]) -> Dict[int, float]:
    """
    Static SCM of the chain under constant interventions, solved simultaneously:
    X_i = (k_i [X_{i+1} - l_i] + k_{i-1} [X_{i-1} + l_{i-1}]) / (k_i + k_{i-1})
    with X_0 = 0 and X_{D+1} = L.
    """
    D = len(spring_constants) - 1
    if len(natural_lengths) != D + 1 or D < 1:
        raise ModelConstructionError("need D+1 spring constants and natural lengths")
    free = [i for i in range(1, D + 1) if i not in clamps]
    index = {label: k for k, label in enumerate(free)}
    matrix = np.zeros((len(free), len(free)))
    rhs = np.zeros(len(free))

    def known(label: int) -> Optional[float]:
        if label == 0:
            return 0.0
        if label == D + 1:
            return wall_position
        return clamps.get(label)

    for i in free:
        row = index[i]
        k_right, k_left = spring_constants[i], spring_constants[i - 1]
        matrix[row, row] = k_right + k_left
        rhs[row] = -k_right * natural_lengths[i] + k_left * natural_lengths[i - 1]
        for neighbour, k in ((i + 1, k_right), (i - 1, k_left)):
            value = known(neighbour)
            if value is None:
                matrix[row, index[neighbour]] -= k
            else:
                rhs[row] += k * value
    solution = dict(clamps)
    if free:
        for label, x in zip(free, np.linalg.solve(matrix, rhs)):
            solution[label] = float(x)
    return dict(sorted(solution.items()))
