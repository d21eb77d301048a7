"""
Quasi-periodic trajectories: a constant offset plus a finite sum of cosines.

Components are merged and compared through their complex phasors
A*exp(i*phi), one per angular frequency, which makes superposition exact
and the canonical form unique.
"""
import cmath
import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, NamedTuple, Sequence, Tuple

import numpy as np

from config import AMPLITUDE_EPS, FREQUENCY_MERGE_EPS
from services.errors import DegenerateFitError

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class CosComponent:
    amplitude: float
    angular_frequency: float
    phase: float = 0.0

    def __post_init__(self):
        for name in ("amplitude", "angular_frequency", "phase"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"cosine component {name} must be finite, got {value}")
        object.__setattr__(self, "amplitude", float(self.amplitude))
        object.__setattr__(self, "angular_frequency", float(self.angular_frequency))
        object.__setattr__(self, "phase", float(self.phase))

    @property
    def phasor(self) -> complex:
        return cmath.rect(self.amplitude, self.phase)


@dataclass(frozen=True)
class QuasiPeriodicSignal:
    offset: float = 0.0
    components: Tuple[CosComponent, ...] = ()

    def __post_init__(self):
        if not math.isfinite(self.offset):
            raise ValueError(f"signal offset must be finite, got {self.offset}")
        object.__setattr__(self, "offset", float(self.offset))
        object.__setattr__(self, "components", tuple(self.components))

    @property
    def is_constant(self) -> bool:
        return not self.components

    def __call__(self, t):
        return evaluate(self, t)


# label -> signal; any per-variable choice combines into a valid bundle
TrajectoryBundle = Dict[int, QuasiPeriodicSignal]

ZERO = QuasiPeriodicSignal()


class FitResult(NamedTuple):
    signal: QuasiPeriodicSignal
    residual_rms: float


def constant(value: float) -> QuasiPeriodicSignal:
    return QuasiPeriodicSignal(offset=value)


def cosine(amplitude: float, angular_frequency: float, phase: float = 0.0,
           offset: float = 0.0) -> QuasiPeriodicSignal:
    return QuasiPeriodicSignal(offset, (CosComponent(amplitude, angular_frequency, phase),))


def evaluate(signal: QuasiPeriodicSignal, t):
    """
    Evaluate offset + sum_j A_j cos(w_j t + p_j).

    Args:
        signal: Signal to evaluate
        t: Time, scalar or numpy array

    Returns:
        float for scalar t, numpy array otherwise
    """
    times = np.asarray(t, dtype=float)
    value = np.full(times.shape, signal.offset)
    for component in signal.components:
        value = value + component.amplitude * np.cos(
            component.angular_frequency * times + component.phase
        )
    if value.ndim == 0:
        return float(value)
    return value


def _same_frequency(w1: float, w2: float, tol: float) -> bool:
    return abs(w1 - w2) <= tol * max(1.0, abs(w1), abs(w2))


def _component_from_phasor(z: complex, angular_frequency: float) -> CosComponent:
    phase = math.atan2(z.imag, z.real) % TWO_PI
    if phase >= TWO_PI:
        phase = 0.0
    return CosComponent(abs(z), angular_frequency, phase)


def canonicalize(signal: QuasiPeriodicSignal) -> QuasiPeriodicSignal:
    """
    Put a signal in canonical form: equal frequencies merged by phasor
    addition, zero frequencies folded into the offset, negative amplitudes
    and frequencies absorbed into the phase, phases in [0, 2pi), components
    below AMPLITUDE_EPS dropped, frequencies ascending.
    """
    offset = signal.offset
    phasors: List[Tuple[float, complex]] = []
    for component in signal.components:
        w = component.angular_frequency
        phase = component.phase
        if w < 0:
            w, phase = -w, -phase
        z = cmath.rect(component.amplitude, phase)
        if w <= FREQUENCY_MERGE_EPS:
            offset += z.real
            continue
        phasors.append((w, z))

    phasors.sort(key=lambda item: item[0])
    merged: List[List] = []
    for w, z in phasors:
        if merged and _same_frequency(merged[-1][0], w, FREQUENCY_MERGE_EPS):
            merged[-1][1] += z
        else:
            merged.append([w, z])

    components = tuple(
        _component_from_phasor(z, w) for w, z in merged if abs(z) >= AMPLITUDE_EPS
    )
    return QuasiPeriodicSignal(offset, components)


def superpose(a: QuasiPeriodicSignal, b: QuasiPeriodicSignal) -> QuasiPeriodicSignal:
    return canonicalize(QuasiPeriodicSignal(a.offset + b.offset, a.components + b.components))


def scale(a: QuasiPeriodicSignal, c: float) -> QuasiPeriodicSignal:
    return canonicalize(QuasiPeriodicSignal(
        c * a.offset,
        tuple(CosComponent(c * comp.amplitude, comp.angular_frequency, comp.phase)
              for comp in a.components),
    ))


def superpose_all(signals: Iterable[QuasiPeriodicSignal]) -> QuasiPeriodicSignal:
    offset = 0.0
    components: List[CosComponent] = []
    for signal in signals:
        offset += signal.offset
        components.extend(signal.components)
    return canonicalize(QuasiPeriodicSignal(offset, tuple(components)))


def frequencies(signal: QuasiPeriodicSignal) -> Tuple[float, ...]:
    return tuple(c.angular_frequency for c in canonicalize(signal).components)


def phasor_at(signal: QuasiPeriodicSignal, omega: float) -> complex:
    """
    Complex amplitude of the signal at angular frequency omega.
    At omega == 0 this is the offset.
    """
    canonical = canonicalize(signal)
    if omega <= FREQUENCY_MERGE_EPS:
        return complex(canonical.offset)
    total = 0j
    for component in canonical.components:
        if _same_frequency(component.angular_frequency, omega, FREQUENCY_MERGE_EPS):
            total += component.phasor
    return total


def from_phasors(offset: float, phasors: Mapping[float, complex]) -> QuasiPeriodicSignal:
    return canonicalize(QuasiPeriodicSignal(
        offset,
        tuple(_component_from_phasor(z, w) for w, z in phasors.items()),
    ))


def signal_distance(a: QuasiPeriodicSignal, b: QuasiPeriodicSignal, freq_tol: float) -> float:
    """
    Largest of |offset difference| and per-frequency phasor differences.
    Components are paired when their frequencies lie within freq_tol;
    an unpaired component counts with its full amplitude.
    """
    ca, cb = canonicalize(a), canonicalize(b)
    distance = abs(ca.offset - cb.offset)
    i = j = 0
    left, right = ca.components, cb.components
    while i < len(left) or j < len(right):
        if i < len(left) and j < len(right) and \
                abs(left[i].angular_frequency - right[j].angular_frequency) <= freq_tol:
            distance = max(distance, abs(left[i].phasor - right[j].phasor))
            i += 1
            j += 1
        elif j >= len(right) or (i < len(left) and
                                 left[i].angular_frequency < right[j].angular_frequency):
            distance = max(distance, left[i].amplitude)
            i += 1
        else:
            distance = max(distance, right[j].amplitude)
            j += 1
    return distance


def asymptotically_equal(a: QuasiPeriodicSignal, b: QuasiPeriodicSignal, tol: float) -> bool:
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    return signal_distance(a, b, tol) <= tol


def bundles_distance(a: Mapping[int, QuasiPeriodicSignal], b: Mapping[int, QuasiPeriodicSignal],
                     freq_tol: float) -> float:
    if set(a) != set(b):
        return math.inf
    return max((signal_distance(a[label], b[label], freq_tol) for label in a), default=0.0)


def merge_bundles(first: Mapping[int, QuasiPeriodicSignal],
                  second: Mapping[int, QuasiPeriodicSignal]) -> TrajectoryBundle:
    """Combine two bundles; entries of `second` win on shared labels."""
    merged = dict(first)
    merged.update(second)
    return merged


def drop_small_components(signal: QuasiPeriodicSignal, threshold: float) -> QuasiPeriodicSignal:
    canonical = canonicalize(signal)
    return QuasiPeriodicSignal(
        canonical.offset,
        tuple(c for c in canonical.components if c.amplitude > threshold),
    )


def fit_quasi_periodic(times: Sequence[float], values: Sequence[float],
                       frequencies: Sequence[float]) -> FitResult:
    """
    Least-squares fit of value ~ c0 + sum_k (a_k cos(w_k t) + b_k sin(w_k t))
    for known frequencies w_k.

    Args:
        times: Sample times
        values: Sample values, same length as times
        frequencies: Known angular frequencies, positive and pairwise distinct

    Returns:
        FitResult with the canonical signal and the residual root-mean-square

    Raises:
        DegenerateFitError: too few samples or rank-deficient design
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise ValueError("times and values must be one-dimensional and of equal length")
    omegas = [float(w) for w in frequencies]
    if any(w <= 0 for w in omegas):
        raise ValueError(f"fit frequencies must be positive, got {omegas}")
    if len(set(omegas)) != len(omegas):
        raise ValueError(f"fit frequencies must be pairwise distinct, got {omegas}")
    n_columns = 2 * len(omegas) + 1
    if t.size < n_columns:
        raise DegenerateFitError(
            f"{t.size} samples cannot determine {n_columns} coefficients"
        )
    if omegas and t[-1] - t[0] < TWO_PI / min(omegas):
        raise ValueError("sample times must span at least one period of the slowest frequency")

    columns = [np.ones_like(t)]
    for w in omegas:
        columns.append(np.cos(w * t))
        columns.append(np.sin(w * t))
    design = np.column_stack(columns)
    coefficients, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < n_columns:
        raise DegenerateFitError(
            f"design matrix has rank {rank} < {n_columns}; sample grid aliases the frequencies"
        )
    residual = y - design @ coefficients
    rms = float(np.sqrt(np.mean(residual ** 2)))

    phasors = {}
    for k, w in enumerate(omegas):
        a_k, b_k = coefficients[1 + 2 * k], coefficients[2 + 2 * k]
        phasors[w] = complex(a_k, -b_k)
    return FitResult(from_phasors(float(coefficients[0]), phasors), rms)
