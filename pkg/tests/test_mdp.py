import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from marketgames.environments import make_rng
from marketgames.errors import InvalidInputError
from marketgames.mdp import (
    Policy,
    TabularMDP,
    action_values,
    argmax_sets,
    bellman_backup,
    evaluate_policy,
    policy_backup,
    policy_iteration,
    random_mdp,
    value_iteration,
)

TOL = 1e-10


def exact_value(mdp, policy):
    """Independent linear-algebra evaluation of a deterministic policy."""
    n = mdp.n_states
    P = np.array([mdp.transition[s, a] for s, a in enumerate(policy)])
    r = np.array([mdp.reward[s, a] for s, a in enumerate(policy)])
    return np.linalg.solve(np.eye(n) - mdp.discount * P, r)


def small_mdp(seed, n_states, n_actions, discount):
    return random_mdp(n_states, n_actions, discount, make_rng(seed, "test-mdp"))


def one_state(rewards, beta):
    k = len(rewards)
    return TabularMDP(np.ones((1, k, 1)), [rewards], beta)


# --- construction ----------------------------------------------------------


def test_rejects_bad_rows():
    with pytest.raises(InvalidInputError):
        TabularMDP([[[0.5, 0.4]]] * 2, [[0.0]] * 2, 0.5)
    with pytest.raises(InvalidInputError):
        TabularMDP([[[1.5, -0.5]], [[0.0, 1.0]]], [[0.0]] * 2, 0.5)


@pytest.mark.parametrize("beta", [1.0, 1.2, -0.1])
def test_rejects_discount_out_of_range(beta):
    with pytest.raises(InvalidInputError, match="discount"):
        one_state([1.0], beta)


def test_rejects_nonfinite_reward():
    with pytest.raises(InvalidInputError):
        one_state([np.inf], 0.5)


def test_policy_rows_checked():
    with pytest.raises(InvalidInputError):
        Policy([[0.3, 0.3]])
    with pytest.raises(InvalidInputError):
        Policy.deterministic([0, 2], 2)


# --- evaluate_policy -------------------------------------------------------


def test_evaluate_geometric_series():
    m = one_state([1.0], 0.5)
    v = evaluate_policy(m, Policy.deterministic([0], 1), TOL)
    assert v[0] == pytest.approx(2.0, abs=TOL)


def test_evaluate_zero_rewards():
    m = small_mdp(3, 4, 2, 0.9)
    m = TabularMDP(m.transition, np.zeros((4, 2)), 0.9)
    v = evaluate_policy(m, Policy.deterministic([1, 0, 1, 0], 2), TOL)
    assert np.all(v == 0.0)


def test_evaluate_chain(chain):
    # hand recursion: v(s1) = 0 + 0.9 v(s1) -> 0; v(s0) = 1 + 0.9 * 0 = 1
    v = evaluate_policy(chain, Policy.deterministic([0, 0], 1), 1e-12)
    np.testing.assert_allclose(v, [1.0, 0.0], atol=1e-12)


def test_evaluate_dimension_mismatch(chain):
    with pytest.raises(InvalidInputError):
        evaluate_policy(chain, Policy.deterministic([0, 0, 0], 1))
    with pytest.raises(InvalidInputError):
        evaluate_policy(chain, Policy.deterministic([0, 0], 1), tol=0.0)


def test_evaluate_stochastic_policy_matches_linear_solve():
    m = small_mdp(11, 4, 3, 0.9)
    probs = make_rng(0, "pol").dirichlet(np.ones(3), size=4)
    probs /= probs.sum(axis=1, keepdims=True)
    pol = Policy(probs)
    # independent: build the policy-averaged chain by hand
    P = sum(probs[:, a, None] * m.transition[:, a, :] for a in range(3))
    r = (probs * m.reward).sum(axis=1)
    expected = np.linalg.solve(np.eye(4) - 0.9 * P, r)
    np.testing.assert_allclose(evaluate_policy(m, pol, TOL), expected, atol=TOL)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 5), st.integers(1, 4), st.floats(0.0, 0.95))
def test_evaluate_is_fixed_point(seed, n_s, n_a, beta):
    m = small_mdp(seed, n_s, n_a, beta)
    actions = make_rng(seed, "actions").integers(0, n_a, n_s)
    pol = Policy.deterministic(actions, n_a)
    v = evaluate_policy(m, pol, TOL)
    assert np.max(np.abs(policy_backup(m, pol, v) - v)) <= TOL
    np.testing.assert_allclose(v, exact_value(m, actions), atol=TOL)
    bound = np.max(np.abs(m.reward)) / (1 - beta)
    assert np.max(np.abs(v)) <= bound + TOL


# --- value iteration ---------------------------------------------------------


def test_vi_dominant_action():
    v, pol = value_iteration(one_state([0.0, 1.0], 0.5), TOL)
    assert v[0] == pytest.approx(2.0, abs=TOL)
    assert pol.actions.tolist() == [1]


def test_vi_zero_rewards_tie_break():
    m = small_mdp(5, 3, 3, 0.8)
    m = TabularMDP(m.transition, np.zeros((3, 3)), 0.8)
    v, pol = value_iteration(m, TOL)
    assert np.all(v == 0.0)
    assert pol.actions.tolist() == [0, 0, 0]


def test_vi_random_walk_self_consistent():
    # states 0,1,2; action 0 steps left, action 1 steps right; state 2 absorbs and pays 1
    p = np.zeros((3, 2, 3))
    for s in range(2):
        p[s, 0, max(s - 1, 0)] = 0.8
        p[s, 0, min(s + 1, 2)] += 0.2
        p[s, 1, min(s + 1, 2)] = 0.8
        p[s, 1, max(s - 1, 0)] += 0.2
    p[2, :, 2] = 1.0
    r = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]])
    m = TabularMDP(p, r, 0.9)
    v, pol = value_iteration(m, TOL)
    assert pol.actions.tolist()[:2] == [1, 1]
    np.testing.assert_allclose(v, evaluate_policy(m, pol, TOL), atol=2 * TOL)
    assert v[2] == pytest.approx(10.0, abs=TOL)
    assert np.max(np.abs(bellman_backup(m, v) - v)) <= TOL


@settings(max_examples=50, deadline=None)
@given(
    st.integers(0, 10**6),
    st.integers(1, 5),
    st.integers(1, 4),
    st.floats(0.0, 0.95),
)
def test_bellman_contraction(seed, n_s, n_a, beta):
    m = small_mdp(seed, n_s, n_a, beta)
    rng = make_rng(seed, "vectors")
    u, w = rng.normal(0, 10, n_s), rng.normal(0, 10, n_s)
    lhs = np.max(np.abs(bellman_backup(m, u) - bellman_backup(m, w)))
    assert lhs <= beta * np.max(np.abs(u - w)) + 1e-12


# --- policy iteration --------------------------------------------------------


def test_pi_single_state():
    res = policy_iteration(one_state([0.3], 0.5))
    assert res.policy.actions.tolist() == [0]


def test_pi_chain_agrees_with_vi(chain):
    _, pol = value_iteration(chain, TOL)
    assert policy_iteration(chain).policy.actions.tolist() == pol.actions.tolist()


@pytest.mark.parametrize("seed", range(30))
def test_pi_beats_every_policy_and_every_deviation(seed):
    rng = make_rng(seed, "sizes")
    n_s, n_a = int(rng.integers(1, 5)), int(rng.integers(1, 4))
    m = small_mdp(seed, n_s, n_a, float(rng.uniform(0, 0.95)))
    res = policy_iteration(m)
    best = res.policy.actions
    v = exact_value(m, best)
    # one-step deviations
    for s in range(n_s):
        for a in range(n_a):
            dev = best.copy()
            dev[s] = a
            assert np.all(v >= exact_value(m, dev) - 1e-10)
    # exhaustive: no deterministic policy does better anywhere
    for actions in itertools.product(range(n_a), repeat=n_s):
        assert np.all(v >= exact_value(m, list(actions)) - 1e-10)
    assert res.iterations <= n_a**n_s


def test_pi_is_stable_and_lowest_index():
    # two actions with identical rows: tie everywhere -> action 0
    p = np.full((2, 2, 2), 0.5)
    m = TabularMDP(p, [[1.0, 1.0], [2.0, 2.0]], 0.7)
    res = policy_iteration(m)
    assert res.policy.actions.tolist() == [0, 0]
    q = action_values(m, res.values)
    assert argmax_sets(q, 1e-12) == [frozenset({0, 1})] * 2


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 5), st.integers(1, 4), st.floats(0.0, 0.95))
def test_vi_pi_agree(seed, n_s, n_a, beta):
    m = small_mdp(seed, n_s, n_a, beta)
    v_vi, pol_vi = value_iteration(m, TOL)
    res = policy_iteration(m)
    v_pi = evaluate_policy(m, res.policy, TOL)
    assert np.max(np.abs(v_vi - v_pi)) <= 2 * TOL
    assert argmax_sets(action_values(m, v_vi), 1e-8) == argmax_sets(action_values(m, v_pi), 1e-8)
