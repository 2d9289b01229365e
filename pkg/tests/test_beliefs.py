import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from oracles import enumeration_posterior, quad_h, quad_interval_cost, random_pomdp_arrays
from pomdpquant.beliefs import (EmptySupport, IntervalReciprocalBelief, ObsCells, ZeroLikelihood, belief_cost,
                                belief_record, belief_successors, correct, f_posterior, filter_update,
                                h_cell_masses, h_density, obs_predictive, parse_belief_record, predict)
from pomdpquant.models import FinitePomdp, machine_repair, population_growth

POP = population_growth()


def test_filter_machine_repair_example():
    m = machine_repair()
    z = np.array([0.5, 0.5])
    assert np.allclose(predict(m, z, 0), [0.52275, 0.47725])
    assert filter_update(m, z, 0, 1)[1] == pytest.approx(0.81676, abs=5e-6)


def test_filter_noiseless_returns_transition_row():
    m = machine_repair(epsilon=0.0, kappa=0.7, alpha=0.6)
    for x in range(2):
        for a in range(2):
            row = m.transition[x, a]
            for y in np.flatnonzero(row):
                z = filter_update(m, np.eye(2)[x], a, y)
                assert np.allclose(z, np.eye(2)[y])


def test_zero_likelihood_raises():
    m = machine_repair(epsilon=0.0)
    with pytest.raises(ZeroLikelihood):
        correct(m, np.array([1.0, 0.0]), 1)


def test_obs_predictive_example_and_symmetric_channel():
    m = machine_repair()
    assert np.allclose(obs_predictive(m, [0.5, 0.5], 0), [0.515015, 0.484985], atol=1e-6)
    sym = machine_repair(epsilon=0.5)
    for z in ([1, 0], [0.3, 0.7]):
        for a in range(2):
            assert np.allclose(obs_predictive(sym, z, a), [0.5, 0.5])


def test_filter_matches_enumeration_small():
    rng = np.random.default_rng(0)
    for _ in range(20):
        P, R, c, z0 = random_pomdp_arrays(rng, 3, 2, 3)
        m = FinitePomdp(P, R, c, 0.9)
        acts = rng.integers(0, 2, 3)
        obs = rng.integers(0, 3, 3)
        z = z0
        for a, y in zip(acts, obs):
            z = filter_update(m, z, a, y)
        assert np.allclose(z, enumeration_posterior(P, R, z0, acts, obs), atol=1e-12, rtol=0)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 4), st.integers(1, 3), st.integers(2, 4))
def test_filter_output_is_belief(seed, mx, ma, my):
    rng = np.random.default_rng(seed)
    P, R, c, z0 = random_pomdp_arrays(rng, mx, ma, my)
    m = FinitePomdp(P, R, c, 0.5)
    z = filter_update(m, z0, int(rng.integers(ma)), int(rng.integers(my)))
    assert np.all(z >= 0) and z.sum() == pytest.approx(1.0, abs=1e-12)
    assert obs_predictive(m, z0, 0).sum() == pytest.approx(1.0, abs=1e-12)


def test_h_density_example():
    assert float(h_density(POP, 1.2, 0.0)) == pytest.approx(2 * math.log(1.2), abs=1e-12)
    assert float(h_density(POP, 1.2, 0.0)) == pytest.approx(0.364643, abs=1e-6)


def test_h_density_zero_below_support():
    for a in (0.0, 0.5, 2.0):
        assert float(h_density(POP, math.exp(-a) * 0.99, a)) == 0.0


@pytest.mark.parametrize("a", [0.0, 0.3, 1.0, 2.5])
def test_h_density_matches_quadrature(a):
    for y in np.linspace(0.05, POP.K, 37):
        assert float(h_density(POP, y, a)) == pytest.approx(quad_h(POP.lam, POP.tau, y, a), abs=1e-9)


@pytest.mark.parametrize("a", [0.0, 0.068, 1.3, 2.65])
def test_h_density_integrates_to_one(a):
    dens = obs_predictive(POP, None, a)
    lo, hi = dens.support
    val, _ = integrate.quad(dens, lo, hi, points=dens.kinks(), epsabs=1e-12, limit=200)
    assert val == pytest.approx(1.0, abs=1e-8)
    assert h_cell_masses(POP, a, [0.0, POP.K]).sum() == pytest.approx(1.0, abs=1e-10)


def test_f_posterior_example():
    z = f_posterior(POP, 0.0, 1.2)
    assert (z.lower, z.upper) == (1.0, 1.2)
    assert z.gamma == pytest.approx(5.48481, abs=1e-5)
    val, _ = integrate.quad(z.pdf, z.lower, z.upper)
    assert val == pytest.approx(1.0, abs=1e-12)


def test_f_posterior_forms():
    a = 0.5
    lo, hi = math.exp(-a), math.exp(POP.lam - a)
    z = f_posterior(POP, a, lo + POP.tau)
    assert z.form(POP) == 2 and z.lower == pytest.approx(lo) and z.upper == pytest.approx(lo + POP.tau)
    assert f_posterior(POP, a, lo + 0.1).form(POP) == 1
    assert f_posterior(POP, a, hi + 0.1).form(POP) == 3
    with pytest.raises(EmptySupport):
        f_posterior(POP, a, hi + POP.tau + 0.01)
    with pytest.raises(EmptySupport):
        f_posterior(POP, a, lo * 0.5)


def test_belief_cost_finite_example_and_dirac():
    m = machine_repair()
    assert belief_cost(m, [0.5, 0.5], 1) == pytest.approx(2.0)
    for x in range(2):
        for a in range(2):
            assert belief_cost(m, np.eye(2)[x], a) == m.cost[x, a]


def test_belief_cost_interval_example():
    z = IntervalReciprocalBelief(0.5, 1.0, 0.0, 0.0)
    assert belief_cost(POP, z, 0.5) == pytest.approx(0.069663, abs=1e-6)
    assert belief_cost(POP, z, 0.5) == pytest.approx(quad_interval_cost(0.5, 1.0, 0.5), abs=1e-12)


def test_belief_cost_other_utility_uses_quadrature():
    m = population_growth(utility="abs")
    z = IntervalReciprocalBelief(0.5, 1.2, 0.0, 0.0)
    assert belief_cost(m, z, 0.8) == pytest.approx(quad_interval_cost(0.5, 1.2, 0.8, np.abs), abs=1e-9)


def test_successors_machine_repair():
    succ = belief_successors(machine_repair(), [0.5, 0.5], 0)
    assert len(succ) == 2
    assert np.allclose([p for _, p in succ], [0.515015, 0.484985], atol=1e-6)
    assert succ[1][0][1] == pytest.approx(0.81676, abs=5e-6)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_successor_masses_sum_to_one(seed):
    rng = np.random.default_rng(seed)
    P, R, c, z0 = random_pomdp_arrays(rng, 3, 2, 4)
    succ = belief_successors(FinitePomdp(P, R, c, 0.5), z0, 1)
    assert all(p >= 0 for _, p in succ)
    assert sum(p for _, p in succ) == pytest.approx(1.0, abs=1e-8)


def test_successors_population_four_cells():
    cells = ObsCells.uniform(math.e + 0.5, 4, lower=1.0)
    succ = belief_successors(POP, None, 0.0, cells)
    assert len(succ) == 4
    for (z, p), j in zip(succ, range(4)):
        ref, _ = integrate.quad(lambda y: quad_h(POP.lam, POP.tau, y, 0.0), cells.edges[j], cells.edges[j + 1],
                                epsabs=1e-11)
        assert p == pytest.approx(ref, abs=1e-8)
        assert z.obs == pytest.approx(cells.levels[j])
    assert sum(p for _, p in succ) == pytest.approx(1.0, abs=1e-8)


def test_population_successors_independent_of_source_belief():
    cells = ObsCells.uniform(POP.K, 50)
    a = POP.actions[4]
    s1 = belief_successors(POP, IntervalReciprocalBelief(0.5, 1.0, 0.1, 0.9), a, cells)
    s2 = belief_successors(POP, IntervalReciprocalBelief(1.5, 2.0, 0.3, 2.2), a, cells)
    assert s1 == s2


@pytest.mark.parametrize("n", [29, 180, 720])
def test_population_successor_masses_sum_to_one(n):
    cells = ObsCells.uniform(POP.K, n)
    for a in POP.actions:
        succ = belief_successors(POP, None, a, cells)
        assert min(p for _, p in succ) >= 0
        assert sum(p for _, p in succ) == pytest.approx(1.0, abs=1e-8)


def test_belief_records_round_trip():
    z = np.array([0.1, 0.2, 0.7])
    assert np.array_equal(parse_belief_record(belief_record(z)), z)
    b = IntervalReciprocalBelief(0.3, 1.1, 0.25, 1.05)
    assert parse_belief_record(belief_record(b)) == b
