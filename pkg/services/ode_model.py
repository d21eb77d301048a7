"""
Causal ODE systems built from linear second-order mechanisms and clamps.

Variable i with a LinearMechanism obeys

    m_i x_i'' + b_i x_i' + a_i x_i = sum_j w_ij x_j(t) + c_i + forcing_i(t)

and a ClampedMechanism forces X_i(t) = signal(t) for all t.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np

from config import SINGULAR_EPS
from services.errors import ModelConstructionError, UnknownVariableError
from services.trajectory import (
    ZERO,
    QuasiPeriodicSignal,
    TrajectoryBundle,
    canonicalize,
    constant,
    cosine,
    frequencies,
    scale,
    superpose_all,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LinearMechanism:
    mass: float
    damping: float
    stiffness: float
    parent_weights: Mapping[int, float] = field(default_factory=dict, hash=False)
    constant: float = 0.0
    forcing: QuasiPeriodicSignal = ZERO

    def __post_init__(self):
        if not self.mass > 0:
            raise ModelConstructionError(f"mass must be positive, got {self.mass}")
        if not self.damping >= 0:
            raise ModelConstructionError(f"damping must be non-negative, got {self.damping}")
        for name in ("stiffness", "constant"):
            if not math.isfinite(getattr(self, name)):
                raise ModelConstructionError(f"{name} must be finite")
        weights = {int(j): float(w) for j, w in sorted(self.parent_weights.items())}
        object.__setattr__(self, "parent_weights", weights)

    @property
    def parents(self) -> Tuple[int, ...]:
        return tuple(self.parent_weights)


@dataclass(frozen=True)
class ClampedMechanism:
    signal: QuasiPeriodicSignal


Mechanism = Union[LinearMechanism, ClampedMechanism]


@dataclass(frozen=True)
class CausalOde:
    """
    The system D: one mechanism per label 1..D, plus (position, velocity)
    initial conditions for the linear variables.
    """
    mechanisms: Mapping[int, Mechanism] = field(hash=False)
    initial_conditions: Mapping[int, Tuple[float, float]] = field(default_factory=dict, hash=False)

    def __post_init__(self):
        mechanisms = {int(label): mech for label, mech in sorted(self.mechanisms.items())}
        if not mechanisms:
            raise ModelConstructionError("a system needs at least one variable")
        if list(mechanisms) != list(range(1, len(mechanisms) + 1)):
            raise ModelConstructionError(
                f"variable labels must be 1..{len(mechanisms)}, got {list(mechanisms)}"
            )
        for label, mech in mechanisms.items():
            if isinstance(mech, LinearMechanism):
                for parent in mech.parents:
                    if parent == label:
                        raise ModelConstructionError(
                            f"X{label} lists itself as a parent; use stiffness instead"
                        )
                    if parent not in mechanisms:
                        raise UnknownVariableError(parent, f"parents of X{label}")
            elif not isinstance(mech, ClampedMechanism):
                raise ModelConstructionError(f"unsupported mechanism for X{label}: {mech!r}")

        conditions = {}
        for label, (position, velocity) in sorted(self.initial_conditions.items()):
            label = int(label)
            if label not in mechanisms:
                raise UnknownVariableError(label, "initial conditions")
            if isinstance(mechanisms[label], ClampedMechanism):
                raise ModelConstructionError(
                    f"X{label} is clamped; its initial condition is implied by the clamp"
                )
            conditions[label] = (float(position), float(velocity))
        object.__setattr__(self, "mechanisms", mechanisms)
        object.__setattr__(self, "initial_conditions", conditions)

    @property
    def labels(self) -> Tuple[int, ...]:
        return tuple(self.mechanisms)

    @property
    def size(self) -> int:
        return len(self.mechanisms)

    @property
    def free_labels(self) -> Tuple[int, ...]:
        return tuple(l for l, m in self.mechanisms.items() if isinstance(m, LinearMechanism))

    @property
    def clamped_labels(self) -> Tuple[int, ...]:
        return tuple(l for l, m in self.mechanisms.items() if isinstance(m, ClampedMechanism))


class LinearForm(NamedTuple):
    """
    First-order form of the free subsystem, state = (x_F, v_F):
    state' = state_matrix @ state + (0, drive(t) / mass).
    """
    free_labels: Tuple[int, ...]
    state_matrix: np.ndarray
    masses: np.ndarray
    drives: Tuple[QuasiPeriodicSignal, ...]


def linear_form(ode: CausalOde) -> LinearForm:
    free = ode.free_labels
    index = {label: k for k, label in enumerate(free)}
    n = len(free)
    stiffness = np.zeros((n, n))
    damping = np.zeros(n)
    masses = np.ones(n)
    drives: List[QuasiPeriodicSignal] = []
    for label in free:
        mech = ode.mechanisms[label]
        k = index[label]
        masses[k] = mech.mass
        damping[k] = mech.damping
        stiffness[k, k] = mech.stiffness
        parts = [constant(mech.constant), mech.forcing]
        for parent, weight in mech.parent_weights.items():
            if parent in index:
                stiffness[k, index[parent]] -= weight
            else:
                parts.append(scale(ode.mechanisms[parent].signal, weight))
        drives.append(superpose_all(parts))

    state_matrix = np.zeros((2 * n, 2 * n))
    state_matrix[:n, n:] = np.eye(n)
    state_matrix[n:, :n] = -stiffness / masses[:, None]
    state_matrix[n:, n:] = -np.diag(damping / masses)
    return LinearForm(free, state_matrix, masses, tuple(drives))


def decay_rate(ode: CausalOde) -> float:
    """
    Slowest exponential decay rate of the free subsystem's homogeneous
    solutions, i.e. minus the largest real part of the state-matrix
    eigenvalues. Positive iff the free subsystem is Hurwitz; inf when
    every variable is clamped.
    """
    form = linear_form(ode)
    if not form.free_labels:
        return math.inf
    eigenvalues = np.linalg.eigvals(form.state_matrix)
    return float(-np.max(eigenvalues.real))


def is_hurwitz(ode: CausalOde) -> bool:
    return decay_rate(ode) > 0


def active_frequencies(ode: CausalOde) -> Tuple[float, ...]:
    """Positive angular frequencies present in clamps and intrinsic forcings."""
    found = set()
    for mech in ode.mechanisms.values():
        signal = mech.signal if isinstance(mech, ClampedMechanism) else mech.forcing
        found.update(frequencies(signal))
    return tuple(sorted(found))


def rest_positions(ode: CausalOde) -> Optional[Dict[int, float]]:
    """
    Static equilibrium of the free subsystem with every time-varying drive
    replaced by its constant part. None when the equilibrium is not unique.
    """
    form = linear_form(ode)
    if not form.free_labels:
        return {}
    n = len(form.free_labels)
    stiffness = -form.state_matrix[n:, :n] * form.masses[:, None]
    rhs = np.array([drive.offset for drive in form.drives])
    if not np.linalg.cond(stiffness) <= 1.0 / SINGULAR_EPS:
        return None
    positions = np.linalg.solve(stiffness, rhs)
    return {label: float(x) for label, x in zip(form.free_labels, positions)}


def build_mass_spring(D: int, masses: Sequence[float], dampings: Sequence[float],
                      spring_constants: Sequence[float], natural_lengths: Sequence[float],
                      wall_position: float,
                      initial_conditions: Optional[Mapping[int, Tuple[float, float]]] = None
                      ) -> CausalOde:
    """
    Chain of D masses between walls at 0 and L. Spring i (0..D) joins mass i
    and mass i+1, the outer springs attach to the walls.

    Args:
        D: Number of masses
        masses: m_1..m_D
        dampings: b_1..b_D
        spring_constants: k_0..k_D
        natural_lengths: l_0..l_D
        wall_position: L, position of the right wall
        initial_conditions: label -> (position, velocity); defaults to the
            static equilibrium at rest

    Returns:
        The causal ODE of the chain
    """
    if D < 1:
        raise ModelConstructionError(f"D must be a positive integer, got {D}")
    if len(masses) != D or len(dampings) != D:
        raise ModelConstructionError(
            f"expected {D} masses and dampings, got {len(masses)} and {len(dampings)}"
        )
    if len(spring_constants) != D + 1 or len(natural_lengths) != D + 1:
        raise ModelConstructionError(
            f"expected {D + 1} spring constants and natural lengths, "
            f"got {len(spring_constants)} and {len(natural_lengths)}"
        )
    if any(k < 0 for k in spring_constants):
        raise ModelConstructionError("spring constants must be non-negative")

    mechanisms: Dict[int, Mechanism] = {}
    for i in range(1, D + 1):
        k_left, k_right = spring_constants[i - 1], spring_constants[i]
        l_left, l_right = natural_lengths[i - 1], natural_lengths[i]
        parents = {}
        if i > 1 and k_left != 0:
            parents[i - 1] = k_left
        if i < D and k_right != 0:
            parents[i + 1] = k_right
        c = k_left * l_left - k_right * l_right
        if i == D:
            c += k_right * wall_position
        mechanisms[i] = LinearMechanism(
            mass=masses[i - 1],
            damping=dampings[i - 1],
            stiffness=k_left + k_right,
            parent_weights=parents,
            constant=c,
        )

    if initial_conditions is None:
        rest = rest_positions(CausalOde(mechanisms))
        if rest is None:
            rest = {i: i * wall_position / (D + 1) for i in mechanisms}
        initial_conditions = {i: (x, 0.0) for i, x in rest.items()}
    logger.debug(f"Built mass-spring chain with D={D}")
    return CausalOde(mechanisms, initial_conditions)


def build_forced_oscillator(mass: float, damping: float, stiffness: float,
                            natural_length: float, amplitude: float, angular_frequency: float,
                            phase: float = 0.0,
                            initial_condition: Optional[Tuple[float, float]] = None
                            ) -> CausalOde:
    """
    Forced damped oscillator m x'' + b x' + k (x - l) = F cos(w t + phi),
    with the drive modelled as a clamped parent X2.
    """
    oscillator = LinearMechanism(
        mass=mass,
        damping=damping,
        stiffness=stiffness,
        parent_weights={2: 1.0},
        constant=stiffness * natural_length,
    )
    drive = ClampedMechanism(cosine(amplitude, angular_frequency, phase))
    if initial_condition is None:
        initial_condition = (natural_length, 0.0)
    return CausalOde({1: oscillator, 2: drive}, {1: initial_condition})


def intervene(ode: CausalOde, targets: TrajectoryBundle) -> CausalOde:
    """
    Replace the mechanism of every targeted variable by a clamp to its
    signal. Other mechanisms and initial conditions are kept.
    """
    mechanisms = dict(ode.mechanisms)
    for label, signal in targets.items():
        if label not in mechanisms:
            raise UnknownVariableError(label, "intervention targets")
        mechanisms[label] = ClampedMechanism(canonicalize(signal))
    conditions = {l: ic for l, ic in ode.initial_conditions.items() if l not in targets}
    return CausalOde(mechanisms, conditions)


def causal_graph(ode: CausalOde) -> nx.DiGraph:
    """
    Edge j -> i for every parent j of a linear mechanism i, and a self-loop
    on every linear variable. Clamped variables have no incoming edges.
    """
    graph = nx.DiGraph()
    graph.add_nodes_from(ode.labels)
    for label, mech in ode.mechanisms.items():
        if isinstance(mech, LinearMechanism):
            graph.add_edge(label, label)
            for parent in mech.parents:
                graph.add_edge(parent, label)
    return graph


def edge_list(graph: nx.DiGraph) -> List[Tuple[int, int]]:
    return sorted(graph.edges())
