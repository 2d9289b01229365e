import math

import numpy as np
import pytest
from scipy import integrate

from pomdpquant.models import (FinitePomdp, ModelError, Sense, machine_repair, population_growth,
                               validate_assumptions)


def test_machine_repair_channel_rows():
    m = machine_repair()
    assert np.allclose(m.channel, [[0.83, 0.17], [0.17, 0.83]])
    assert m.discount == 0.3
    assert m.sense is Sense.MINIMIZE


def test_machine_repair_cost_table_defaults():
    m = machine_repair()
    # broken/idle E, broken/repair R+E, working/idle 0, working/repair R
    assert np.array_equal(m.cost, [[2.0, 3.0], [0.0, 1.0]])


def test_machine_repair_transitions_stochastic():
    m = machine_repair()
    assert np.allclose(m.transition.sum(axis=2), 1.0)
    assert m.transition[1, 0, 1] == pytest.approx(0.9545)
    assert m.transition[0, 1, 1] == pytest.approx(0.9)


def test_machine_repair_degenerate_noiseless():
    m = machine_repair(epsilon=0.0, kappa=1.0, alpha=1.0, repair_cost=0.0, break_cost=0.0, discount=0.5)
    assert np.array_equal(m.channel, np.eye(2))
    assert np.all(m.cost == 0)
    assert set(np.unique(m.transition)) <= {0.0, 1.0}


def test_machine_repair_initial_is_working_state():
    assert np.array_equal(machine_repair().initial, [0.0, 1.0])


@pytest.mark.parametrize("field,value", [("epsilon", 1.5), ("kappa", -0.1), ("discount", 1.0),
                                         ("repair_cost", -1.0), ("initial_state", 2)])
def test_machine_repair_rejects_bad_parameters(field, value):
    with pytest.raises(ModelError):
        machine_repair(**{field: value})


def test_population_bounds():
    m = population_growth()
    assert m.L == pytest.approx(2.71828, abs=1e-5)
    assert m.K == pytest.approx(3.21828, abs=1e-5)
    assert m.n_actions == 20
    assert m.sense is Sense.MAXIMIZE


def test_population_actions_inside_state_range():
    m = population_growth()
    assert np.all(m.actions > 0) and m.actions[-1] <= m.L
    assert np.all(np.diff(m.actions) > 0)


def test_population_theta_default_margin():
    m = population_growth()
    assert m.theta == pytest.approx(min(0.01, math.exp(-m.actions[-1]) / 2))
    assert math.exp(-m.actions[-1]) - m.theta > 0


def test_population_noise_densities_integrate_to_one():
    m = population_growth()
    gv, _ = integrate.quad(lambda v: float(m.g_v(v)), -1, m.lam + 1, points=[0, m.lam])
    gx, _ = integrate.quad(lambda v: float(m.g_xi(v)), -1, m.tau + 1, points=[0, m.tau])
    assert gv == pytest.approx(1.0, abs=1e-10)
    assert gx == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("kwargs", [dict(lam=0.0), dict(tau=-1.0), dict(discount=0.0),
                                    dict(actions=[0.5, 0.4]), dict(actions=[3.0]),
                                    dict(theta=1.0), dict(utility="cube"), dict(actions=0)])
def test_population_rejects_bad_parameters(kwargs):
    with pytest.raises(ModelError):
        population_growth(**kwargs)


def test_population_max_cost_is_max_of_u():
    m = population_growth()
    assert m.max_abs_cost == pytest.approx(m.L ** 2)


def test_validate_machine_repair_all_pass():
    rep = validate_assumptions(machine_repair())
    assert rep.ok, rep.failures()


def test_validate_flags_non_stochastic_row():
    t = np.full((2, 1, 2), 0.5)
    t[0, 0] = (0.5, 0.4)
    m = FinitePomdp(t, np.eye(2), np.ones((2, 1)), 0.5)
    rep = validate_assumptions(m)
    assert not rep.ok
    assert any("transition" in f for f in rep.failures())


def test_validate_population_cost_bounded():
    rep = validate_assumptions(population_growth())
    assert rep.ok
    ok, msg = rep.clauses["a: cost bounded"]
    assert ok and "7.38906" in msg


def test_finite_pomdp_shape_checks():
    with pytest.raises(ModelError):
        FinitePomdp(np.ones((2, 1, 3)) / 3, np.eye(2), np.ones((2, 1)), 0.5)
    with pytest.raises(ModelError):
        FinitePomdp(np.ones((2, 1, 2)) / 2, np.eye(3), np.ones((2, 1)), 0.5)


def test_finite_pomdp_arrays_read_only():
    m = machine_repair()
    with pytest.raises(ValueError):
        m.cost[0, 0] = 5.0
