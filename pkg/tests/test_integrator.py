import math

import numpy as np
import pytest

from services.errors import DivergenceError
from services.ode_model import CausalOde, ClampedMechanism, LinearMechanism, build_forced_oscillator
from services.integrator import default_dt, simulate, simulate_ensemble, trailing_window
from services.trajectory import cosine, evaluate


def harmonic():
    """x'' + x = 0 from (1, 0): x(t) = cos t."""
    return CausalOde({1: LinearMechanism(1.0, 0.0, 1.0)}, {1: (1.0, 0.0)})


def test_default_dt(forced_oscillator):
    assert default_dt(forced_oscillator) == 0.01
    fast = CausalOde({1: ClampedMechanism(cosine(1.0, 20.0))})
    assert default_dt(fast) == pytest.approx(2.0 * math.pi / 20.0 / 50.0)


def test_grid_and_sample_count():
    result = simulate(harmonic(), 1.0, 0.01)
    assert len(result) == 101
    assert result.times[0] == 0.0
    assert result.times[-1] == pytest.approx(1.0)
    assert result.labels == (1,)


def test_matches_closed_form_solution():
    result = simulate(harmonic(), 10.0, 0.01)
    np.testing.assert_allclose(result.positions[1], np.cos(result.times), atol=1e-7)




def test_clamped_columns_follow_their_signal(forced_oscillator):
    result = simulate(forced_oscillator, 5.0)
    np.testing.assert_allclose(result.positions[2], evaluate(cosine(2.0, 3.0), result.times))


def test_forced_response_with_drive_and_constant():
    # x'' + x' + x = 1 settles at x = 1
    ode = CausalOde({1: LinearMechanism(1.0, 1.0, 1.0, constant=1.0)}, {1: (0.0, 0.0)})
    result = simulate(ode, 30.0, 0.01)
    assert result.positions[1][-1] == pytest.approx(1.0, abs=1e-5)


def test_ensemble_runs_are_independent(chain2):
    runs = simulate_ensemble(chain2, 5.0, 0.01, [None, {1: (1.5, 0.0)}])
    assert len(runs) == 2
    np.testing.assert_allclose(runs[0].positions[1], 1.0, atol=1e-12)
    assert runs[1].positions[1][0] == 1.5
    single = simulate(chain2, 5.0, 0.01, {1: (1.5, 0.0)})
    np.testing.assert_allclose(single.positions[2], runs[1].positions[2])


def test_fully_clamped_system_is_sampled():
    ode = CausalOde({1: ClampedMechanism(cosine(0.5, 3.0, 1.0, offset=2.0))})
    result = simulate(ode, 2.0, 0.01)
    assert result.positions[1][0] == pytest.approx(2.0 + 0.5 * math.cos(1.0))


def test_blow_up_is_reported():
    repelling = CausalOde({1: LinearMechanism(1.0, 0.1, -1.0)}, {1: (1.0, 0.0)})
    with pytest.raises(DivergenceError) as excinfo:
        simulate(repelling, 100.0, 0.01)
    assert 20.0 < excinfo.value.time < 40.0


def test_invalid_steps_are_rejected():
    with pytest.raises(ValueError):
        simulate(harmonic(), 1.0, 0.0)
    with pytest.raises(ValueError):
        simulate(harmonic(), 1.0, 2.0)
    with pytest.raises(ValueError):
        simulate(harmonic(), -1.0)


def test_trailing_window_length():
    result = simulate(harmonic(), 1.0, 0.01)
    window = trailing_window(result, 0.25)
    assert len(window) == math.ceil(0.25 * 101)
    assert window.times[-1] == result.times[-1]
    with pytest.raises(ValueError):
        trailing_window(result, 1.0)


def test_fourth_order_convergence_on_the_damped_forced_oscillator():
    ode = build_forced_oscillator(1.0, 0.5, 1.0, 0.0, 1.0, 2.0, initial_condition=(1.0, 0.0))
    coarse, fine = 0.05, 0.025
    reference = simulate(ode, 10.0, fine / 8).positions[1]
    errors = []
    for dt in (coarse, fine):
        result = simulate(ode, 10.0, dt)
        stride = int(round(dt / (fine / 8)))
        errors.append(float(np.max(np.abs(result.positions[1] - reference[::stride]))))
    assert 12.0 <= errors[0] / errors[1] <= 20.0
