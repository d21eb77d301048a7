"""
Fixed-step classical Runge-Kutta (RK4) simulation of a CausalOde.

The free subsystem is affine, y' = A y + g(t), so one RK4 step is exactly

    y+ = P y + Q0 g(t) + Qh g(t + h/2) + Q1 g(t + h)

with P = I + B + B^2/2 + B^3/6 + B^4/24 (B = hA) and
Q0 = h/6 (I + B + B^2/2 + B^3/4), Qh = h/6 (4I + 2B + B^2/2), Q1 = h/6 I.
The drive terms are evaluated for every step up front, which leaves one
matrix product per step in the time loop.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from cachetools import LRUCache, cached

from config import BLOWUP_THRESHOLD, MAX_DT, STEPS_PER_PERIOD
from services.errors import DivergenceError, ModelConstructionError
from services.ode_model import CausalOde, active_frequencies, linear_form
from services.trajectory import evaluate

logger = logging.getLogger(__name__)

# Steps between blow-up checks inside the time loop
CHECK_EVERY = 256

InitialConditions = Mapping[int, Tuple[float, float]]


@dataclass(frozen=True)
class SimulationResult:
    times: np.ndarray
    positions: Dict[int, np.ndarray]
    dt: float

    def __len__(self) -> int:
        return len(self.times)

    @property
    def labels(self) -> Tuple[int, ...]:
        return tuple(sorted(self.positions))


def default_dt(ode: CausalOde) -> float:
    """min(MAX_DT, fastest period / STEPS_PER_PERIOD) over the frequencies present."""
    omegas = active_frequencies(ode)
    if not omegas:
        return MAX_DT
    return min(MAX_DT, (2.0 * math.pi / max(omegas)) / STEPS_PER_PERIOD)


@cached(cache=LRUCache(maxsize=256))
def _rk4_propagator(state_matrix: Tuple[Tuple[float, ...], ...], dt: float):
    A = np.array(state_matrix, dtype=float).reshape(len(state_matrix), -1)
    identity = np.eye(A.shape[0])
    B = dt * A
    B2 = B @ B
    B3 = B2 @ B
    P = identity + B + B2 / 2.0 + B3 / 6.0 + (B3 @ B) / 24.0
    Q0 = dt / 6.0 * (identity + B + B2 / 2.0 + B3 / 4.0)
    Qh = dt / 6.0 * (4.0 * identity + 2.0 * B + B2 / 2.0)
    Q1 = dt / 6.0 * identity
    return P, Q0, Qh, Q1


def _matrix_key(matrix: np.ndarray) -> Tuple[Tuple[float, ...], ...]:
    return tuple(tuple(float(v) for v in row) for row in matrix)


def _initial_states(ode: CausalOde, free_labels: Sequence[int],
                    ensemble: Sequence[Optional[InitialConditions]]) -> np.ndarray:
    states = np.zeros((len(ensemble), 2 * len(free_labels)))
    n = len(free_labels)
    for row, overrides in enumerate(ensemble):
        merged = dict(ode.initial_conditions)
        if overrides:
            merged.update(overrides)
        for k, label in enumerate(free_labels):
            if label not in merged:
                raise ModelConstructionError(f"no initial condition for X{label}")
            position, velocity = merged[label]
            states[row, k] = position
            states[row, n + k] = velocity
    return states


def _first_bad_step(block: np.ndarray) -> Optional[int]:
    bad = ~(np.abs(block) < BLOWUP_THRESHOLD)
    if not bad.any():
        return None
    return int(np.argmax(bad.reshape(block.shape[0], -1).any(axis=1)))


def simulate_ensemble(ode: CausalOde, horizon: float, dt: Optional[float] = None,
                      ensemble: Sequence[Optional[InitialConditions]] = (None,)
                      ) -> List[SimulationResult]:
    """
    Integrate the same system from several initial conditions at once.

    Args:
        ode: System to integrate
        horizon: Final time T > 0
        dt: Step size, 0 < dt < T; defaults to default_dt(ode)
        ensemble: One override mapping (or None) per run, merged over the
            system's own initial conditions

    Returns:
        One SimulationResult per entry of the ensemble

    Raises:
        DivergenceError: a state entry became non-finite or exceeded the
            blow-up threshold
    """
    if dt is None:
        dt = default_dt(ode)
    if not horizon > 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    if not 0 < dt < horizon:
        raise ValueError(f"dt must satisfy 0 < dt < horizon, got dt={dt}")

    n_steps = int(round(horizon / dt))
    times = np.arange(n_steps + 1) * dt
    form = linear_form(ode)
    free = form.free_labels
    n = len(free)

    trajectories = np.zeros((n_steps + 1, len(ensemble), 2 * n))
    if n:
        trajectories[0] = _initial_states(ode, free, ensemble)
        P, Q0, Qh, Q1 = _rk4_propagator(_matrix_key(form.state_matrix), float(dt))

        def drive(at: np.ndarray) -> np.ndarray:
            g = np.zeros((at.size, 2 * n))
            for k, signal in enumerate(form.drives):
                g[:, n + k] = evaluate(signal, at) / form.masses[k]
            return g

        inputs = (drive(times[:-1]) @ Q0.T
                  + drive(times[:-1] + dt / 2.0) @ Qh.T
                  + drive(times[1:]) @ Q1.T)
        PT = P.T
        with np.errstate(over="ignore", invalid="ignore"):
            block_start = 0
            for step in range(n_steps):
                trajectories[step + 1] = trajectories[step] @ PT + inputs[step]
                if (step + 1) % CHECK_EVERY == 0 or step + 1 == n_steps:
                    bad = _first_bad_step(trajectories[block_start:step + 2])
                    if bad is not None:
                        index = block_start + bad
                        raise DivergenceError(float(times[index]), index)
                    block_start = step + 1

    clamped = {label: evaluate(ode.mechanisms[label].signal, times)
               for label in ode.clamped_labels}
    results = []
    for run in range(len(ensemble)):
        positions = {label: trajectories[:, run, k].copy() for k, label in enumerate(free)}
        positions.update({label: values.copy() for label, values in clamped.items()})
        results.append(SimulationResult(times, dict(sorted(positions.items())), float(dt)))
    logger.info(f"Simulated {len(ensemble)} run(s) of {n_steps} steps (dt={dt:g}, T={horizon:g})")
    return results


def simulate(ode: CausalOde, horizon: float, dt: Optional[float] = None,
             overrides: Optional[InitialConditions] = None) -> SimulationResult:
    return simulate_ensemble(ode, horizon, dt, [overrides])[0]


def trailing_window(result: SimulationResult, fraction: float) -> SimulationResult:
    """Last ceil(fraction * N) samples of a run."""
    if not 0 < fraction < 1:
        raise ValueError(f"fraction must lie in (0, 1), got {fraction}")
    count = int(math.ceil(fraction * len(result.times)))
    start = len(result.times) - count
    return SimulationResult(
        result.times[start:],
        {label: values[start:] for label, values in result.positions.items()},
        result.dt,
    )
