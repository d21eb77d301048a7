import math

import numpy as np
import pytest

from services.errors import DegenerateFitError
from services.trajectory import (
    TWO_PI,
    CosComponent,
    QuasiPeriodicSignal,
    asymptotically_equal,
    canonicalize,
    constant,
    cosine,
    evaluate,
    fit_quasi_periodic,
    frequencies,
    phasor_at,
    scale,
    signal_distance,
    superpose,
)


def test_evaluate_offset_plus_cosine():
    signal = cosine(0.5, 3.0, 1.0, offset=2.0)
    assert evaluate(signal, 0.7) == pytest.approx(2.0 + 0.5 * math.cos(3.1))


def test_evaluate_accepts_arrays():
    signal = cosine(1.0, 2.0)
    t = np.linspace(0.0, 1.0, 5)
    np.testing.assert_allclose(evaluate(signal, t), np.cos(2.0 * t))


def test_canonicalize_merges_equal_frequencies():
    signal = QuasiPeriodicSignal(0.0, (CosComponent(1.0, 3.0), CosComponent(1.0, 3.0)))
    canonical = canonicalize(signal)
    assert len(canonical.components) == 1
    assert canonical.components[0].amplitude == pytest.approx(2.0)
    assert canonical.components[0].phase == pytest.approx(0.0)


def test_canonicalize_flips_negative_frequency():
    canonical = canonicalize(QuasiPeriodicSignal(0.0, (CosComponent(1.0, -2.0, 0.5),)))
    component = canonical.components[0]
    assert component.angular_frequency == 2.0
    assert component.phase == pytest.approx(TWO_PI - 0.5)


def test_canonicalize_folds_zero_frequency_into_offset():
    canonical = canonicalize(QuasiPeriodicSignal(1.0, (CosComponent(1.5, 0.0, 0.0),)))
    assert canonical.offset == pytest.approx(2.5)
    assert canonical.is_constant


def test_canonicalize_absorbs_negative_amplitude_into_phase():
    component = canonicalize(QuasiPeriodicSignal(0.0, (CosComponent(-1.0, 2.0),))).components[0]
    assert component.amplitude == pytest.approx(1.0)
    assert component.phase == pytest.approx(math.pi)


def test_cancelling_components_are_dropped():
    signal = QuasiPeriodicSignal(0.0, (CosComponent(1.0, 2.0, 0.0), CosComponent(1.0, 2.0, math.pi)))
    assert canonicalize(signal).components == ()


def test_canonical_form_is_idempotent_and_evaluates_the_same():
    signal = QuasiPeriodicSignal(0.3, (
        CosComponent(0.7, 2.0, 5.0),
        CosComponent(-0.4, -1.0, 0.2),
        CosComponent(0.2, 2.0, -1.0),
        CosComponent(0.1, 0.0, 0.0),
    ))
    once = canonicalize(signal)
    assert signal_distance(canonicalize(once), once, 1e-12) < 1e-12
    assert frequencies(once) == (1.0, 2.0)
    assert all(0.0 <= c.phase < TWO_PI for c in once.components)
    t = np.linspace(0.0, 10.0, 101)
    np.testing.assert_allclose(evaluate(once, t), evaluate(signal, t), atol=1e-12)


def test_superpose_and_scale():
    a = cosine(1.0, 2.0, offset=1.0)
    b = cosine(0.5, 3.0, offset=-0.5)
    total = superpose(a, scale(b, 2.0))
    assert total.offset == pytest.approx(0.0)
    assert frequencies(total) == (2.0, 3.0)
    assert total.components[1].amplitude == pytest.approx(1.0)


def test_phasor_at_zero_is_the_offset():
    signal = cosine(0.5, 3.0, 1.0, offset=2.0)
    assert phasor_at(signal, 0.0) == 2.0
    assert phasor_at(signal, 3.0) == pytest.approx(0.5 * complex(math.cos(1.0), math.sin(1.0)))
    assert phasor_at(signal, 4.0) == 0


def test_signal_distance_counts_unpaired_components():
    a = cosine(0.5, 3.0, offset=2.0)
    b = QuasiPeriodicSignal(2.0, (CosComponent(0.5, 3.0), CosComponent(0.25, 7.0)))
    assert signal_distance(a, b, 1e-9) == pytest.approx(0.25)
    assert not asymptotically_equal(a, b, 1e-3)
    assert asymptotically_equal(a, cosine(0.5 + 1e-4, 3.0, offset=2.0), 1e-3)


def test_asymptotically_equal_needs_positive_tolerance():
    with pytest.raises(ValueError):
        asymptotically_equal(constant(1.0), constant(1.0), 0.0)


def test_fit_recovers_known_signal():
    truth = QuasiPeriodicSignal(1.0, (CosComponent(0.5, 1.3, 0.4), CosComponent(0.2, 2.9, 5.0)))
    t = np.linspace(0.0, 20.0, 2001)
    fit = fit_quasi_periodic(t, evaluate(truth, t), [1.3, 2.9])
    assert fit.residual_rms < 1e-10
    assert signal_distance(fit.signal, truth, 1e-9) < 1e-9


def test_fit_with_too_few_samples_is_degenerate():
    with pytest.raises(DegenerateFitError):
        fit_quasi_periodic([0.0, 10.0], [1.0, 1.0], [1.0])


def test_fit_on_aliased_grid_is_degenerate():
    t = np.arange(50) * math.pi
    with pytest.raises(DegenerateFitError):
        fit_quasi_periodic(t, np.ones_like(t), [2.0])


def test_fit_requires_one_period_of_the_slowest_frequency():
    t = np.linspace(0.0, 1.0, 101)
    with pytest.raises(ValueError):
        fit_quasi_periodic(t, np.cos(0.5 * t), [0.5])


def _raw_signal(rng, count=4):
    """Non-canonical signal: negative amplitudes and frequencies, repeats, zero frequency."""
    return QuasiPeriodicSignal(
        float(rng.uniform(-2.0, 2.0)),
        tuple(
            CosComponent(float(rng.uniform(-1.0, 1.0)),
                         float(rng.choice([0.0, 0.5, 1.3, -1.3, 2.0, 3.7])),
                         float(rng.uniform(-10.0, 10.0)))
            for _ in range(count)
        ),
    )


def test_phasor_sum_of_a_3_4_5_pair():
    signal = QuasiPeriodicSignal(0.0, (CosComponent(3.0, 2.0, 0.0), CosComponent(4.0, 2.0, math.pi / 2)))
    canonical = canonicalize(signal)
    assert len(canonical.components) == 1
    component = canonical.components[0]
    assert component.amplitude == pytest.approx(5.0)
    assert component.phase == pytest.approx(math.atan2(4.0, 3.0))
    t = np.linspace(0.0, 10.0, 501)
    np.testing.assert_allclose(evaluate(canonical, t), evaluate(signal, t), atol=1e-12)


def test_full_turn_of_phase_is_the_same_signal():
    assert asymptotically_equal(cosine(1.0, 1.0, 0.0), cosine(1.0, 1.0, TWO_PI), 1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_canonicalization_preserves_values_pointwise(seed):
    signal = _raw_signal(np.random.default_rng(seed), count=6)
    t = np.linspace(0.0, 50.0, 5001)
    np.testing.assert_allclose(evaluate(canonicalize(signal), t), evaluate(signal, t), atol=1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_superpose_is_commutative_and_associative(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (_raw_signal(rng) for _ in range(3))
    assert asymptotically_equal(superpose(a, b), superpose(b, a), 1e-9)
    assert asymptotically_equal(superpose(superpose(a, b), c), superpose(a, superpose(b, c)), 1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_asymptotic_equality_is_reflexive_symmetric_and_bounds_values(seed):
    rng = np.random.default_rng(seed)
    tol = 1e-3
    a = canonicalize(_raw_signal(rng))
    nudge = QuasiPeriodicSignal(0.4 * tol, (CosComponent(0.4 * tol, 1.3, float(rng.uniform(0.0, TWO_PI))),))
    b = superpose(a, nudge)
    assert asymptotically_equal(a, a, tol)
    assert asymptotically_equal(a, b, tol)
    assert asymptotically_equal(b, a, tol)
    t = np.linspace(0.0, 100.0, 10001)
    count = max(len(a.components), len(b.components))
    assert np.max(np.abs(evaluate(a, t) - evaluate(b, t))) <= (1 + count) * tol


def test_fit_round_trip_on_sparse_samples():
    truth = cosine(0.5, 3.0, 1.0, offset=2.0)
    t = np.linspace(0.0, 20.0, 200)
    fit = fit_quasi_periodic(t, evaluate(truth, t), [3.0])
    assert fit.signal.offset == pytest.approx(2.0, abs=1e-8)
    assert fit.signal.components[0].amplitude == pytest.approx(0.5, abs=1e-8)
    assert fit.signal.components[0].phase == pytest.approx(1.0, abs=1e-8)


def test_spurious_fit_frequency_vanishes():
    t = np.linspace(0.0, 20.0, 200)
    fit = fit_quasi_periodic(t, np.cos(3.0 * t), [3.0, 5.0])
    assert abs(phasor_at(fit.signal, 5.0)) < 1e-8
    assert abs(phasor_at(fit.signal, 3.0)) == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("seed", range(5))
def test_fit_round_trip_on_random_signals(seed):
    rng = np.random.default_rng(seed)
    omegas = [0.5, 1.3, 2.0, 3.7]
    truth = canonicalize(QuasiPeriodicSignal(
        float(rng.uniform(-2.0, 2.0)),
        tuple(CosComponent(float(rng.uniform(0.1, 1.0)), w, float(rng.uniform(0.0, TWO_PI)))
              for w in omegas),
    ))
    t = np.linspace(0.0, 40.0, 4001)
    fit = fit_quasi_periodic(t, evaluate(truth, t), omegas)
    assert signal_distance(fit.signal, truth, 1e-9) < 1e-8
