"""
Numerical checks of dynamic stability and structural dynamic stability.

A system is judged dynamically stable when runs from several initial
conditions settle onto the same quasi-periodic trajectory: every trailing
window is fitted with the known frequencies and the fits must agree, fit
well and stay close sample by sample. This is a falsifiable check, not a
proof.
"""
import itertools
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from config import (
    DEFAULT_HORIZON,
    DEFAULT_ICS,
    DEFAULT_SEED,
    DEFAULT_TOL,
    DEFAULT_TRIALS,
    IC_BOX_HALF_WIDTH,
    MAX_HORIZON,
    SETTLING_SCALE,
    TRANSIENT_FRACTION,
)
from services.errors import DivergenceError
from services.integrator import SimulationResult, simulate_ensemble, trailing_window
from services.ode_model import (
    CausalOde,
    ClampedMechanism,
    LinearMechanism,
    active_frequencies,
    decay_rate,
    intervene,
    rest_positions,
)
from services.trajectory import (
    TWO_PI,
    CosComponent,
    QuasiPeriodicSignal,
    TrajectoryBundle,
    asymptotically_equal,
    canonicalize,
    drop_small_components,
    fit_quasi_periodic,
    frequencies,
)

logger = logging.getLogger(__name__)


class Verdict(str, Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    DIVERGENT = "divergent"


@dataclass(frozen=True)
class DynSpec:
    """
    Admitted trajectory family: per variable, an offset (if allow_constant)
    plus cosines at the listed frequencies. Families of different variables
    combine freely, so the induced set is modular.
    """
    frequencies: Tuple[float, ...] = ()
    per_label: Mapping[int, Tuple[float, ...]] = field(default_factory=dict, hash=False)
    allow_constant: bool = True
    amplitude_bound: Optional[float] = None
    max_components: int = 3

    def __post_init__(self):
        object.__setattr__(self, "frequencies", tuple(float(w) for w in self.frequencies))
        per_label = {int(l): tuple(float(w) for w in ws) for l, ws in self.per_label.items()}
        object.__setattr__(self, "per_label", per_label)
        for name, ws in [("frequencies", self.frequencies)] + \
                [(f"frequencies of X{l}", ws) for l, ws in per_label.items()]:
            if any(not w > 0 for w in ws):
                raise ValueError(f"{name} must be positive, got {ws}")
            if len(set(ws)) != len(ws):
                raise ValueError(f"{name} must be pairwise distinct, got {ws}")
        if self.amplitude_bound is not None and not self.amplitude_bound > 0:
            raise ValueError("amplitude_bound must be positive")
        if self.max_components < 1:
            raise ValueError("max_components must be at least 1")

    def frequencies_for(self, label: int) -> Tuple[float, ...]:
        return self.per_label.get(label, self.frequencies)

    def all_frequencies(self) -> Tuple[float, ...]:
        found = set(self.frequencies)
        for ws in self.per_label.values():
            found.update(ws)
        return tuple(sorted(found))

    def sample_signal(self, label: int, rng: np.random.Generator) -> QuasiPeriodicSignal:
        """Draw one admitted trajectory for a variable."""
        bound = self.amplitude_bound if self.amplitude_bound is not None else 1.0
        available = self.frequencies_for(label)
        offset = float(rng.uniform(-bound, bound)) if self.allow_constant else 0.0
        if not available:
            return QuasiPeriodicSignal(offset)
        count = int(rng.integers(1, min(self.max_components, len(available)) + 1))
        chosen = rng.choice(np.array(available), size=count, replace=False)
        components = tuple(
            CosComponent(float(rng.uniform(0.1 * bound, bound)), float(w),
                         float(rng.uniform(0.0, TWO_PI)))
            for w in sorted(chosen)
        )
        return canonicalize(QuasiPeriodicSignal(offset, components))

    def admits(self, signal: QuasiPeriodicSignal, extra_frequencies: Sequence[float],
               tol: float, label: Optional[int] = None) -> bool:
        """
        Whether a signal lies in the family, ignoring components of
        amplitude <= tol. Frequencies are matched within tol.
        """
        allowed = set(extra_frequencies)
        allowed.update(self.frequencies_for(label) if label is not None else self.all_frequencies())
        canonical = canonicalize(signal)
        if not self.allow_constant and abs(canonical.offset) > tol:
            return False
        for component in canonical.components:
            if component.amplitude <= tol:
                continue
            if not any(abs(component.angular_frequency - w) <= tol for w in allowed):
                return False
        return True


@dataclass
class StabilityReport:
    verdict: Verdict
    trajectory: Optional[TrajectoryBundle]
    discrepancy: float
    residual: float
    horizon: float
    decay_rate: float
    horizon_adequate: bool
    message: str = ""

    @property
    def stable(self) -> bool:
        return self.verdict is Verdict.STABLE


@dataclass
class TrialOutcome:
    label: int
    trial: int
    intervention: TrajectoryBundle
    report: StabilityReport
    in_family: bool

    @property
    def passed(self) -> bool:
        return self.report.stable and self.in_family


@dataclass
class StructuralStabilityReport:
    outcomes: List[TrialOutcome]

    @property
    def passed(self) -> bool:
        return all(outcome.passed for outcome in self.outcomes)

    @property
    def failures(self) -> List[Tuple[int, int]]:
        return [(o.label, o.trial) for o in self.outcomes if not o.passed]


def settling_horizon(ode: CausalOde, tol: float = DEFAULT_TOL,
                     transient_fraction: float = TRANSIENT_FRACTION) -> Tuple[float, bool]:
    """
    Horizon after which the transient envelope has fallen below tol by the
    start of the fitted window.

    Returns:
        (horizon, adequate) where adequate is False when the free subsystem
        has no positive decay rate and the fallback DEFAULT_HORIZON is used
    """
    rate = decay_rate(ode)
    if math.isinf(rate):
        return DEFAULT_HORIZON, True
    if rate <= 0:
        return DEFAULT_HORIZON, False
    needed = math.log(SETTLING_SCALE / tol) / (rate * transient_fraction)
    if needed > MAX_HORIZON:
        return MAX_HORIZON, False
    return max(DEFAULT_HORIZON, needed), True


def _horizon_is_adequate(ode: CausalOde, horizon: float, tol: float,
                         transient_fraction: float) -> bool:
    rate = decay_rate(ode)
    if math.isinf(rate):
        return True
    if rate <= 0:
        return False
    return math.exp(-rate * horizon * transient_fraction) < tol


def fit_frequencies(ode: CausalOde, spec: Optional[DynSpec] = None) -> Tuple[float, ...]:
    found = set(active_frequencies(ode))
    if spec is not None:
        found.update(spec.all_frequencies())
    return tuple(sorted(found))


def fit_window(window: Optional[SimulationResult], ode: CausalOde, omegas: Sequence[float],
               tol: float) -> Tuple[TrajectoryBundle, float]:
    """
    Fit every free variable of a trailing window. Clamped variables take
    their clamp signal exactly.

    Returns:
        (bundle, largest residual rms)
    """
    bundle: TrajectoryBundle = {}
    residual = 0.0
    for label in ode.labels:
        mech = ode.mechanisms[label]
        if isinstance(mech, ClampedMechanism):
            bundle[label] = canonicalize(mech.signal)
            continue
        fit = fit_quasi_periodic(window.times, window.positions[label], omegas)
        bundle[label] = drop_small_components(fit.signal, tol)
        residual = max(residual, fit.residual_rms)
    return bundle, residual


def _secular_growth(window: SimulationResult, labels: Sequence[int], omegas: Sequence[float],
                    tol: float) -> float:
    """
    Largest envelope growth across the window at any fit frequency.

    Each variable is fitted with c0 + c1 s plus, per frequency w_k, cosine and
    sine terms whose coefficients are linear in s, the window time rescaled to
    [-1/2, 1/2]. With phasors z_k (constant part) and y_k (slope) the growth at
    w_k is |z_k + y_k/2| - |z_k - y_k/2|. Variables whose secular fit leaves a
    residual above tol are skipped and left to the plain fit.
    """
    if not omegas:
        return 0.0
    t = window.times
    span = float(t[-1] - t[0])
    if span <= 0:
        return 0.0
    s = (t - 0.5 * (t[0] + t[-1])) / span
    columns = [np.ones_like(t), s]
    for w in omegas:
        c, n = np.cos(w * t), np.sin(w * t)
        columns.extend([c, n, s * c, s * n])
    design = np.column_stack(columns)
    if design.shape[0] < design.shape[1]:
        return 0.0
    growth = 0.0
    for label in labels:
        values = window.positions[label]
        coefficients = np.linalg.lstsq(design, values, rcond=None)[0]
        residual = float(np.sqrt(np.mean((values - design @ coefficients) ** 2)))
        if residual > tol:
            continue
        for k in range(len(omegas)):
            a, b, ga, gb = coefficients[2 + 4 * k: 6 + 4 * k]
            z, y = complex(a, -b), complex(ga, -gb)
            growth = max(growth, abs(z + 0.5 * y) - abs(z - 0.5 * y))
    return growth


def _initial_condition_box(ode: CausalOde, n_ics: int,
                           rng: np.random.Generator) -> List[Dict[int, Tuple[float, float]]]:
    rest = rest_positions(ode)
    if rest is None:
        rest = {label: ode.initial_conditions.get(label, (0.0, 0.0))[0]
                for label in ode.free_labels}
    ensemble = []
    for _ in range(n_ics):
        ensemble.append({
            label: (rest[label] + float(rng.uniform(-IC_BOX_HALF_WIDTH, IC_BOX_HALF_WIDTH)),
                    float(rng.uniform(-IC_BOX_HALF_WIDTH, IC_BOX_HALF_WIDTH)))
            for label in ode.free_labels
        })
    return ensemble


def check_dynamic_stability(ode: CausalOde, spec: Optional[DynSpec] = None,
                            n_ics: int = DEFAULT_ICS, horizon: Optional[float] = None,
                            tol: float = DEFAULT_TOL, seed: int = DEFAULT_SEED,
                            dt: Optional[float] = None,
                            transient_fraction: float = TRANSIENT_FRACTION) -> StabilityReport:
    """
    Simulate from n_ics initial conditions drawn from a seeded box around
    the rest positions and decide whether the asymptotic trajectory is
    unique.

    Args:
        ode: System to check
        spec: Admitted family; its frequencies join the fit frequencies
        n_ics: Number of initial conditions, at least 2
        horizon: Run length; defaults to settling_horizon(ode, tol)
        tol: Tolerance on fit agreement, residual and sample discrepancy
        seed: Seed for the initial-condition generator
        dt: Step size, defaults to the integrator's choice
        transient_fraction: Leading share of the run discarded before fitting

    Returns:
        StabilityReport; the fitted trajectory is set only when stable
    """
    if n_ics < 2:
        raise ValueError(f"n_ics must be at least 2, got {n_ics}")
    if horizon is None:
        horizon, _ = settling_horizon(ode, tol, transient_fraction)
    rate = decay_rate(ode)
    adequate = _horizon_is_adequate(ode, horizon, tol, transient_fraction)
    if not adequate:
        logger.warning(
            f"Horizon {horizon:g} is too short for the transient to settle below tol={tol:g} "
            f"(decay rate {rate:.4g})"
        )

    def report(verdict, trajectory=None, discrepancy=math.inf, residual=math.inf, message=""):
        logger.info(f"Dynamic stability verdict: {verdict.value} {message}".rstrip())
        return StabilityReport(verdict, trajectory, discrepancy, residual, horizon, rate,
                               adequate, message)

    free = ode.free_labels
    if not free:
        return report(Verdict.STABLE, fit_window(None, ode, (), tol)[0], 0.0, 0.0,
                      "no free variables")

    rng = np.random.default_rng(seed)
    ensemble = _initial_condition_box(ode, n_ics, rng)
    try:
        runs = simulate_ensemble(ode, horizon, dt, ensemble)
    except DivergenceError as e:
        return report(Verdict.DIVERGENT, message=str(e))

    windows = [trailing_window(run, 1.0 - transient_fraction) for run in runs]
    omegas = fit_frequencies(ode, spec)
    growth = max(_secular_growth(window, free, omegas, tol) for window in windows)
    if growth > tol:
        return report(Verdict.DIVERGENT,
                      message=f"oscillation envelope grows by {growth:.3g} over the window")

    fits = [fit_window(window, ode, omegas, tol) for window in windows]
    residual = max(res for _, res in fits)
    discrepancy = 0.0
    for label in free:
        stacked = np.vstack([window.positions[label] for window in windows])
        discrepancy = max(discrepancy, float(np.max(stacked.max(axis=0) - stacked.min(axis=0))))
    agree = all(
        asymptotically_equal(a[label], b[label], tol)
        for (a, _), (b, _) in itertools.combinations(fits, 2)
        for label in free
    )
    if agree and residual <= tol and discrepancy <= tol:
        return report(Verdict.STABLE, fits[0][0], discrepancy, residual)
    return report(Verdict.UNSTABLE, None, discrepancy, residual,
                  "fits disagree across initial conditions" if not agree else "")


def simulated_asymptotics(ode: CausalOde, horizon: Optional[float] = None,
                          dt: Optional[float] = None, tol: float = DEFAULT_TOL,
                          transient_fraction: float = TRANSIENT_FRACTION,
                          extra_frequencies: Sequence[float] = ()) -> Tuple[TrajectoryBundle, float]:
    """
    Asymptotic trajectory of a single run from the system's own initial
    conditions, fitted on the trailing window.

    Returns:
        (bundle, largest residual rms)
    """
    if horizon is None:
        horizon, _ = settling_horizon(ode, tol, transient_fraction)
    omegas = tuple(sorted(set(active_frequencies(ode)) | set(extra_frequencies)))
    if not ode.free_labels:
        return fit_window(None, ode, omegas, tol)
    run = simulate_ensemble(ode, horizon, dt, [None])[0]
    return fit_window(trailing_window(run, 1.0 - transient_fraction), ode, omegas, tol)


def check_structural_dynamic_stability(ode: CausalOde, spec: DynSpec,
                                       trials: int = DEFAULT_TRIALS, seed: int = DEFAULT_SEED,
                                       tol: float = DEFAULT_TOL, n_ics: int = 3,
                                       horizon: Optional[float] = None) -> StructuralStabilityReport:
    """
    For every free variable i, clamp all other variables to `trials` seeded
    draws from the family and check that the intervened system is dynamically
    stable with X_i settling inside its admitted family.
    """
    if trials < 1:
        raise ValueError(f"trials must be at least 1, got {trials}")
    rng = np.random.default_rng(seed)
    outcomes: List[TrialOutcome] = []
    for label in ode.free_labels:
        others = [l for l in ode.labels if l != label]
        mech: LinearMechanism = ode.mechanisms[label]
        for trial in range(trials):
            zeta = {other: spec.sample_signal(other, rng) for other in others}
            intervened = intervene(ode, zeta)
            stability = check_dynamic_stability(intervened, spec, n_ics=n_ics, horizon=horizon,
                                                tol=tol, seed=seed + trial)
            in_family = False
            if stability.stable:
                driving = [w for signal in zeta.values() for w in frequencies(signal)]
                driving.extend(frequencies(mech.forcing))
                in_family = spec.admits(stability.trajectory[label], driving, tol, label)
            outcome = TrialOutcome(label, trial, zeta, stability, in_family)
            if not outcome.passed:
                logger.warning(f"Structural stability trial failed for X{label}, trial {trial}: "
                               f"{stability.verdict.value}")
            outcomes.append(outcome)
    result = StructuralStabilityReport(outcomes)
    logger.info(f"Structural dynamic stability: {'pass' if result.passed else 'fail'} "
                f"({len(outcomes)} trials)")
    return result
