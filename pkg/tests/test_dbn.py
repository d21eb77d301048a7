import math

import numpy as np
import pytest

from services.dbn import (
    StudyRow,
    discretization_study,
    euler_discretize,
    initial_state,
    observed_order,
    rollout,
)
from services.ode_model import (
    CausalOde,
    LinearMechanism,
    build_forced_oscillator,
    build_mass_spring,
    intervene,
)
from services.trajectory import ZERO, constant, cosine


def test_single_euler_step():
    ode = CausalOde({1: LinearMechanism(1.0, 0.0, 1.0)}, {1: (1.0, 0.0)})
    dbn = euler_discretize(ode, 0.1)
    states = rollout(dbn, initial_state(ode, dbn), 1)
    assert states[1].positions[1] == pytest.approx(1.0)
    assert states[1].velocities[1] == pytest.approx(-0.1)


def test_update_matches_the_euler_form(chain2):
    dbn = euler_discretize(chain2, 0.05)
    update = dbn.updates[1]
    assert update.velocity_step == 0.05
    assert update.velocity_retention == pytest.approx(1.0 - 0.05 * 0.5)
    assert update.position_weights == pytest.approx({1: -0.05 * 2.0, 2: 0.05 * 1.0})
    assert dbn.updates[2].constant == pytest.approx(0.05 * 3.0)
    matrix = dbn.transition_matrix()
    assert matrix.shape == (4, 4)
    assert matrix[2, 1] == pytest.approx(0.05)
    assert matrix[0, 2] == 0.05


def test_rollout_samples_clamps_on_the_grid(forced_oscillator):
    dbn = euler_discretize(forced_oscillator, 0.1)
    states = rollout(dbn, initial_state(forced_oscillator, dbn), 10)
    assert len(states) == 11
    assert [s.step for s in states] == list(range(11))
    assert states[10].positions[2] == pytest.approx(2.0 * math.cos(3.0))
    assert 2 not in states[10].velocities


def test_chain_at_rest_stays_at_rest(chain2):
    dbn = euler_discretize(chain2, 0.1)
    final = rollout(dbn, initial_state(chain2, dbn), 200)[-1]
    assert final.positions[1] == pytest.approx(1.0)
    assert final.positions[2] == pytest.approx(2.0)


def test_invalid_arguments(chain2):
    with pytest.raises(ValueError):
        euler_discretize(chain2, 0.0)
    dbn = euler_discretize(chain2, 0.1)
    with pytest.raises(ValueError):
        rollout(dbn, initial_state(chain2, dbn), -1)
    with pytest.raises(ValueError):
        discretization_study(chain2, [0.3], 1.0)
    with pytest.raises(ValueError):
        discretization_study(chain2, [], 1.0)


def test_error_shrinks_at_first_order():
    ode = build_forced_oscillator(1.0, 1.0, 1.0, 0.0, 1.0, 2.0, initial_condition=(1.0, 0.0))
    rows = discretization_study(ode, [0.1, 0.05, 0.025, 0.0125], 20.0)
    assert [r.delta for r in rows] == [0.0125, 0.025, 0.05, 0.1]
    assert [r.steps for r in rows] == [1600, 800, 400, 200]
    errors = [r.sup_error for r in rows]
    assert errors == sorted(errors)
    assert 0.8 <= observed_order(rows) <= 1.25


def test_diverging_rollouts_are_recorded_and_the_study_continues():
    stiff = CausalOde({1: LinearMechanism(1.0, 0.0, 10000.0)}, {1: (1.0, 0.0)})
    rows = discretization_study(stiff, [0.1, 0.05], 40.0)
    assert len(rows) == 2
    assert all(math.isinf(r.sup_error) and r.error for r in rows)


def test_observed_order_needs_two_finite_rows():
    with pytest.raises(ValueError):
        observed_order([StudyRow(0.1, 10, 0.5), StudyRow(0.05, 20, math.inf, "diverged")])
    rows = [StudyRow(d, int(1 / d), 3.0 * d ** 2) for d in (0.1, 0.05, 0.025)]
    assert observed_order(rows) == pytest.approx(2.0)


@pytest.mark.parametrize("delta", [0.1, 0.02])
def test_unit_chain_update_term_by_term(delta):
    ode = build_mass_spring(2, [1.0, 1.0], [1.0, 1.0], [1.0, 1.0, 1.0], [1.0, 1.0, 1.0], 3.0)
    dbn = euler_discretize(ode, delta)
    first, second = dbn.updates[1], dbn.updates[2]

    assert first.velocity_step == delta
    assert first.velocity_retention == pytest.approx(1.0 - delta)
    assert first.position_weights == pytest.approx({1: -2.0 * delta, 2: delta})
    # k0 l0 - k1 l1
    assert first.constant == pytest.approx(delta * (1.0 * 1.0 - 1.0 * 1.0))
    assert first.forcing == ZERO

    assert second.velocity_step == delta
    assert second.velocity_retention == pytest.approx(1.0 - delta)
    assert second.position_weights == pytest.approx({1: delta, 2: -2.0 * delta})
    # k1 l1 - k2 l2 + k2 L
    assert second.constant == pytest.approx(delta * (1.0 - 1.0 + 3.0))
    assert second.forcing == ZERO
    assert dbn.clamps == {}


def test_clamp_at_the_sampling_frequency_aliases_to_a_constant(chain2):
    delta = 0.1
    aliased = intervene(chain2, {1: cosine(1.0, 2.0 * math.pi / delta)})
    steady = intervene(chain2, {1: constant(1.0)})
    dbn = euler_discretize(aliased, delta)
    states = rollout(dbn, initial_state(aliased, dbn), 50)
    samples = [s.positions[1] for s in states]
    assert samples == pytest.approx([1.0] * 51, abs=1e-9)

    reference_dbn = euler_discretize(steady, delta)
    reference = rollout(reference_dbn, initial_state(steady, reference_dbn), 50)
    assert [s.positions[2] for s in states] == pytest.approx(
        [s.positions[2] for s in reference], abs=1e-9
    )
