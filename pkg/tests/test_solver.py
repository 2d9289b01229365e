import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import policy_enumeration
from pomdpquant.finite_mdp import GridModel, build_finite_mdp, build_grid
from pomdpquant.models import Sense, machine_repair
from pomdpquant.solver import (IterationCap, bellman_backup, extend_policy, greedy_policy, load_solution,
                               solution_json, value_iteration)


def random_gm(rng, S, A, beta=None, sense=Sense.MINIMIZE):
    P = rng.dirichlet(np.ones(S) * 0.5, size=(S, A))
    c = rng.uniform(0, 1, (S, A))
    return GridModel.dense(P, c, beta if beta is not None else rng.uniform(0.1, 0.95), sense), P, c


def test_backup_from_zero_is_min_cost():
    rng = np.random.default_rng(0)
    gm, _, c = random_gm(rng, 4, 3)
    assert np.allclose(bellman_backup(gm, np.zeros(4)).values, c.min(axis=1))


def test_backup_symmetric_actions():
    P = np.repeat(np.random.default_rng(1).dirichlet(np.ones(3), size=(3, 1)), 2, axis=1)
    c = np.repeat(np.array([[0.2], [0.5], [0.9]]), 2, axis=1)
    gm2 = GridModel.dense(P, c, 0.7)
    gm1 = GridModel.dense(P[:, :1], c[:, :1], 0.7)
    V = np.array([1.0, -2.0, 0.5])
    assert np.array_equal(bellman_backup(gm2, V).values, bellman_backup(gm1, V).values)


def test_zero_costs_give_zero_values():
    gm, _, _ = random_gm(np.random.default_rng(2), 4, 2)
    gm = GridModel.dense(gm.to_dense(), np.zeros((4, 2)), 0.9)
    vf, _ = value_iteration(gm)
    assert np.all(vf.values == 0)


def test_single_state_geometric_series():
    gm = GridModel.dense(np.ones((1, 1, 1)), np.array([[2.0]]), 0.6)
    vf, pol = value_iteration(gm, 1e-12)
    assert vf.values[0] == pytest.approx(2.0 / 0.4, abs=1e-11)
    assert pol.actions[0] == 0


def test_random_five_state_matches_enumeration():
    rng = np.random.default_rng(3)
    for _ in range(10):
        gm, P, c = random_gm(rng, 5, 3)
        vf, pol = value_iteration(gm)
        assert np.allclose(vf.values, policy_enumeration(P, c, gm.discount), atol=1e-9, rtol=0)


def test_reward_sense_matches_enumeration():
    rng = np.random.default_rng(4)
    for _ in range(10):
        gm, P, c = random_gm(rng, 4, 3, sense=Sense.MAXIMIZE)
        vf, pol = value_iteration(gm)
        ref = policy_enumeration(P, c, gm.discount, "maximize")
        assert np.allclose(vf.values, ref, atol=1e-9, rtol=0)
        Ppi = P[np.arange(4), pol.actions]
        cpi = c[np.arange(4), pol.actions]
        assert np.allclose(np.linalg.solve(np.eye(4) - gm.discount * Ppi, cpi), ref, atol=1e-8)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 6), st.integers(1, 3))
def test_contraction(seed, S, A):
    rng = np.random.default_rng(seed)
    gm, _, _ = random_gm(rng, S, A)
    V1, V2 = rng.normal(0, 5, S), rng.normal(0, 5, S)
    lhs = np.max(np.abs(bellman_backup(gm, V1).values - bellman_backup(gm, V2).values))
    assert lhs <= gm.discount * np.max(np.abs(V1 - V2)) + 1e-12


def test_monotone_iterates_from_zero():
    rng = np.random.default_rng(5)
    gm, _, _ = random_gm(rng, 6, 3, beta=0.8)
    V = np.zeros(6)
    for _ in range(30):
        nxt = bellman_backup(gm, V).values
        assert np.all(nxt >= V - 1e-15)
        V = nxt


def test_error_certificate_and_value_bounds():
    rng = np.random.default_rng(6)
    tol = 1e-6
    gm, _, c = random_gm(rng, 6, 3, beta=0.9)
    vf, _ = value_iteration(gm, tol)
    extra = bellman_backup(gm, vf.values).residual
    assert extra <= tol * (1 - gm.discount) / gm.discount
    assert np.all(vf.values >= 0) and np.all(vf.values <= c.max() / (1 - gm.discount) + 1e-12)


def test_lowest_index_tie_break():
    P = np.ones((2, 3, 2)) / 2
    gm = GridModel.dense(P, np.array([[1.0, 0.5, 0.5], [0.0, 0.0, 0.0]]), 0.5)
    _, pol = value_iteration(gm)
    assert list(pol.actions) == [1, 0]
    assert list(greedy_policy(gm, np.zeros(2)).actions) == [1, 0]


def test_iteration_cap():
    gm, _, _ = random_gm(np.random.default_rng(7), 3, 2, beta=0.99)
    with pytest.raises(IterationCap):
        value_iteration(gm, 1e-12, max_iterations=5)


def test_extended_policy_machine_repair():
    m = machine_repair()
    grid = build_grid(m, 10)
    vf, pol = value_iteration(build_finite_mdp(m, grid))
    ext = extend_policy(pol, grid)
    for i, z in enumerate(grid.points):
        assert ext(z) == pol.actions[i]
    z = grid.points[4] + np.array([0.02, -0.02])
    assert ext(z) == pol.actions[4]
    # regression fixture: the action is monotone in P(working)
    order = np.argsort(grid.points[:, 1])
    acts = pol.actions[order]
    assert np.all(np.diff(acts) <= 0) or np.all(np.diff(acts) >= 0)


def test_extended_policy_threshold_with_expensive_breakdowns():
    m = machine_repair(break_cost=20.0)
    grid = build_grid(m, 20)
    _, pol = value_iteration(build_finite_mdp(m, grid))
    acts = pol.actions[np.argsort(grid.points[:, 1])]
    assert acts[0] == 1 and acts[-1] == 0
    assert np.all(np.diff(acts) <= 0)


def test_extend_policy_size_mismatch():
    m = machine_repair()
    _, pol = value_iteration(build_finite_mdp(m, build_grid(m, 5)))
    with pytest.raises(ValueError):
        extend_policy(pol, build_grid(m, 6))


def test_solution_json_round_trip():
    m = machine_repair()
    vf, pol = value_iteration(build_finite_mdp(m, build_grid(m, 5)))
    vf2, pol2, doc = load_solution(solution_json(vf, pol, {"k": 1}, n=5))
    assert np.array_equal(vf2.values, vf.values) and np.array_equal(pol2.actions, pol.actions)
    assert vf2.residual == vf.residual and doc["n"] == 5 and doc["config"] == {"k": 1}
