"""
Deterministic dynamic Bayesian network obtained by Euler discretization:

    x((t+1)D) = x(tD) + D x'(tD)
    x'((t+1)D) = x'(tD) + (D/m) (-b x'(tD) - a x(tD) + sum_j w_j x_j(tD) + c + forcing(tD))

Clamped variables are sampled on the grid tD.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from config import REFERENCE_REFINEMENT
from services.errors import DivergenceError
from services.integrator import simulate
from services.ode_model import CausalOde, ClampedMechanism
from services.trajectory import (
    QuasiPeriodicSignal,
    canonicalize,
    constant,
    evaluate,
    scale,
    superpose_all,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EulerUpdate:
    """Coefficients of one variable's Euler step."""
    label: int
    velocity_step: float
    velocity_retention: float
    position_weights: Mapping[int, float] = field(hash=False)
    constant: float
    forcing: QuasiPeriodicSignal


@dataclass(frozen=True)
class DbnModel:
    delta: float
    updates: Mapping[int, EulerUpdate] = field(hash=False)
    clamps: Mapping[int, QuasiPeriodicSignal] = field(hash=False)

    @property
    def free_labels(self) -> Tuple[int, ...]:
        return tuple(sorted(self.updates))

    @property
    def labels(self) -> Tuple[int, ...]:
        return tuple(sorted(set(self.updates) | set(self.clamps)))

    def transition_matrix(self) -> np.ndarray:
        """Affine part acting on (x_free, v_free)."""
        free = self.free_labels
        index = {label: k for k, label in enumerate(free)}
        n = len(free)
        matrix = np.zeros((2 * n, 2 * n))
        for label, update in self.updates.items():
            k = index[label]
            matrix[k, k] = 1.0
            matrix[k, n + k] = update.velocity_step
            matrix[n + k, n + k] = update.velocity_retention
            for source, weight in update.position_weights.items():
                if source in index:
                    matrix[n + k, index[source]] += weight
        return matrix

    def drive(self, label: int) -> QuasiPeriodicSignal:
        """Velocity increment not explained by the free state: constant, forcing and clamps."""
        update = self.updates[label]
        parts = [constant(update.constant), update.forcing]
        for source, weight in update.position_weights.items():
            if source in self.clamps:
                parts.append(scale(self.clamps[source], weight))
        return superpose_all(parts)


@dataclass(frozen=True)
class DbnState:
    step: int
    positions: Mapping[int, float] = field(hash=False)
    velocities: Mapping[int, float] = field(hash=False)


class StudyRow(NamedTuple):
    delta: float
    steps: int
    sup_error: float
    error: Optional[str] = None


def euler_discretize(ode: CausalOde, delta: float) -> DbnModel:
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    updates: Dict[int, EulerUpdate] = {}
    clamps: Dict[int, QuasiPeriodicSignal] = {}
    for label, mech in ode.mechanisms.items():
        if isinstance(mech, ClampedMechanism):
            clamps[label] = canonicalize(mech.signal)
            continue
        gain = delta / mech.mass
        weights = {label: -gain * mech.stiffness}
        weights.update({parent: gain * w for parent, w in mech.parent_weights.items()})
        updates[label] = EulerUpdate(
            label=label,
            velocity_step=delta,
            velocity_retention=1.0 - gain * mech.damping,
            position_weights=dict(sorted(weights.items())),
            constant=gain * mech.constant,
            forcing=scale(mech.forcing, gain),
        )
    return DbnModel(float(delta), updates, clamps)


def initial_state(ode: CausalOde, dbn: DbnModel) -> DbnState:
    positions = {label: ode.initial_conditions[label][0] for label in dbn.free_labels}
    velocities = {label: ode.initial_conditions[label][1] for label in dbn.free_labels}
    positions.update({label: evaluate(signal, 0.0) for label, signal in dbn.clamps.items()})
    return DbnState(0, dict(sorted(positions.items())), velocities)


def rollout(dbn: DbnModel, state0: DbnState, steps: int) -> List[DbnState]:
    """
    Iterate the Euler update. Clamped positions are the clamp signals
    sampled at each grid time.

    Returns:
        steps + 1 states starting with state0

    Raises:
        DivergenceError: a state entry becomes non-finite
    """
    if steps < 0:
        raise ValueError(f"steps must be non-negative, got {steps}")
    free = dbn.free_labels
    n = len(free)
    grid = (state0.step + np.arange(steps + 1)) * dbn.delta
    clamp_samples = {label: evaluate(signal, grid) for label, signal in dbn.clamps.items()}
    inputs = np.zeros((steps + 1, 2 * n))
    for k, label in enumerate(free):
        inputs[:, n + k] = evaluate(dbn.drive(label), grid)

    matrix = dbn.transition_matrix()
    state = np.array([state0.positions[l] for l in free] + [state0.velocities[l] for l in free],
                     dtype=float)
    states = [state0]
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(steps):
            state = matrix @ state + inputs[k]
            if not np.all(np.isfinite(state)):
                raise DivergenceError(float(grid[k + 1]), state0.step + k + 1)
            positions = {label: float(state[i]) for i, label in enumerate(free)}
            positions.update({label: float(values[k + 1]) for label, values in clamp_samples.items()})
            velocities = {label: float(state[n + i]) for i, label in enumerate(free)}
            states.append(DbnState(state0.step + k + 1, dict(sorted(positions.items())), velocities))
    return states


def _grid_ratio(numerator: float, denominator: float, what: str) -> int:
    ratio = numerator / denominator
    count = int(round(ratio))
    if count < 1 or abs(ratio - count) > 1e-9 * max(1.0, ratio):
        raise ValueError(f"{what}: {numerator:g} is not a multiple of {denominator:g}")
    return count


def discretization_study(ode: CausalOde, deltas: Sequence[float], horizon: float,
                         reference_dt: Optional[float] = None) -> List[StudyRow]:
    """
    Sup-norm position error of the Euler network against an RK4 reference
    at matched grid times, with the step count as cost.

    Args:
        ode: System to discretize
        deltas: Steps to study, each dividing the horizon
        horizon: Length of every rollout
        reference_dt: RK4 step, defaults to min(deltas) / REFERENCE_REFINEMENT

    Returns:
        Rows sorted by delta; a row whose rollout diverged has an infinite
        error and the divergence message
    """
    if not deltas:
        raise ValueError("at least one delta is required")
    for delta in deltas:
        if not delta > 0:
            raise ValueError(f"delta must be positive, got {delta}")
        _grid_ratio(horizon, delta, "delta must divide the horizon")
    if reference_dt is None:
        reference_dt = min(deltas) / REFERENCE_REFINEMENT
    reference = simulate(ode, horizon, reference_dt)

    rows: List[StudyRow] = []
    for delta in sorted(deltas):
        steps = _grid_ratio(horizon, delta, "delta must divide the horizon")
        stride = _grid_ratio(delta, reference_dt, "delta must be a multiple of the reference step")
        dbn = euler_discretize(ode, delta)
        try:
            states = rollout(dbn, initial_state(ode, dbn), steps)
        except DivergenceError as e:
            logger.warning(f"Euler rollout with delta={delta:g} diverged: {e}")
            rows.append(StudyRow(delta, steps, math.inf, str(e)))
            continue
        error = 0.0
        for label in dbn.free_labels:
            euler = np.array([state.positions[label] for state in states])
            exact = reference.positions[label][::stride][:len(euler)]
            error = max(error, float(np.max(np.abs(euler - exact))))
        logger.info(f"delta={delta:g}: {steps} steps, sup error {error:.3e}")
        rows.append(StudyRow(delta, steps, error))
    return rows


def observed_order(rows: Sequence[StudyRow]) -> float:
    """Least-squares slope of log(error) against log(delta) over finite, non-zero rows."""
    usable = [(r.delta, r.sup_error) for r in rows if math.isfinite(r.sup_error) and r.sup_error > 0]
    if len(usable) < 2:
        raise ValueError("need at least two finite, non-zero errors to estimate an order")
    log_delta = np.log([d for d, _ in usable])
    log_error = np.log([e for _, e in usable])
    slope, _ = np.polyfit(log_delta, log_error, 1)
    return float(slope)
