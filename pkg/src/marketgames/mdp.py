"""Finite Markov decision processes: policy evaluation, value iteration and
policy iteration.

Arrays follow the layout ``transition[s, a, s']`` and ``reward[s, a]``.
Greedy choices break ties toward the lowest action index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

DEFAULT_TOL = 1e-10


@dataclass(frozen=True)
class TabularMDP:
    transition: np.ndarray
    reward: np.ndarray
    discount: float

    def __post_init__(self):
        p = np.array(self.transition, dtype=float)
        r = np.array(self.reward, dtype=float)
        if p.ndim != 3 or p.shape[0] != p.shape[2]:
            raise InvalidInputError(f"transition must have shape (S, A, S), got {p.shape}")
        if r.shape != p.shape[:2]:
            raise InvalidInputError(f"reward shape {r.shape} does not match transition {p.shape[:2]}")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise InvalidInputError("need at least one state and one action")
        if np.any(p < 0) or np.any(np.abs(p.sum(axis=2) - 1.0) > 1e-12):
            raise InvalidInputError("transition rows must be nonnegative and sum to 1")
        if not np.all(np.isfinite(r)):
            raise InvalidInputError("rewards must be finite")
        if not 0.0 <= self.discount < 1.0:
            raise InvalidInputError(f"discount must lie in [0, 1), got {self.discount}")
        p.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "transition", p)
        object.__setattr__(self, "reward", r)
        object.__setattr__(self, "discount", float(self.discount))

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]


@dataclass(frozen=True)
class Policy:
    """Action distribution per state, stored as an (S, A) probability matrix.

    Deterministic policies are one-hot rows; ``actions`` recovers the indices.
    """

    probs: np.ndarray

    def __post_init__(self):
        m = np.array(self.probs, dtype=float)
        if m.ndim != 2:
            raise InvalidInputError("policy matrix must be 2-d")
        if np.any(m < 0) or np.any(np.abs(m.sum(axis=1) - 1.0) > 1e-12):
            raise InvalidInputError("policy rows must be nonnegative and sum to 1")
        m.setflags(write=False)
        object.__setattr__(self, "probs", m)

    @classmethod
    def deterministic(cls, actions, n_actions: int) -> "Policy":
        actions = np.asarray(actions, dtype=int)
        if actions.ndim != 1 or np.any(actions < 0) or np.any(actions >= n_actions):
            raise InvalidInputError(f"action indices must lie in [0, {n_actions})")
        m = np.zeros((actions.shape[0], n_actions))
        m[np.arange(actions.shape[0]), actions] = 1.0
        return cls(m)

    @property
    def n_states(self) -> int:
        return self.probs.shape[0]

    @property
    def is_deterministic(self) -> bool:
        return bool(np.all((self.probs == 0.0) | (self.probs == 1.0)))

    @property
    def actions(self) -> np.ndarray:
        if not self.is_deterministic:
            raise InvalidInputError("policy is stochastic")
        return np.argmax(self.probs, axis=1)


def _check_policy(mdp: TabularMDP, policy: Policy) -> None:
    if policy.probs.shape != (mdp.n_states, mdp.n_actions):
        raise InvalidInputError(
            f"policy shape {policy.probs.shape} does not match mdp ({mdp.n_states}, {mdp.n_actions})"
        )


def action_values(mdp: TabularMDP, values: np.ndarray) -> np.ndarray:
    """Q(s, a) = r(s, a) + beta * sum_s' p(s'|s, a) v(s')."""
    return mdp.reward + mdp.discount * (mdp.transition @ values)


def bellman_backup(mdp: TabularMDP, values: np.ndarray) -> np.ndarray:
    return action_values(mdp, values).max(axis=1)


def policy_backup(mdp: TabularMDP, policy: Policy, values: np.ndarray) -> np.ndarray:
    return (policy.probs * action_values(mdp, values)).sum(axis=1)


def greedy_actions(q: np.ndarray, atol: float = 0.0) -> np.ndarray:
    """Lowest action index whose value is within ``atol`` of the row maximum."""
    q = np.asarray(q, dtype=float)
    best = q.max(axis=1, keepdims=True)
    return np.argmax(q >= best - atol, axis=1)


def argmax_sets(q: np.ndarray, atol: float) -> list[frozenset]:
    q = np.asarray(q, dtype=float)
    best = q.max(axis=1, keepdims=True)
    return [frozenset(np.flatnonzero(row).tolist()) for row in (q >= best - atol)]


def _stop_threshold(mdp: TabularMDP, tol: float) -> float:
    # residual <= tol*(1-beta) bounds the distance to the true fixed point by tol
    return tol * (1.0 - mdp.discount)


def evaluate_policy(mdp: TabularMDP, policy: Policy, tol: float = DEFAULT_TOL, method: str = "iterate") -> np.ndarray:
    """Value of ``policy`` by repeated backups (or a direct linear solve).

    The returned vector has backup residual at most ``tol`` and, for the
    iterative method, lies within ``tol`` of the exact value in sup-norm.
    """
    _check_policy(mdp, policy)
    if not tol > 0:
        raise InvalidInputError("tol must be > 0")
    if method == "linear":
        p_pi = np.einsum("sa,sat->st", policy.probs, mdp.transition)
        r_pi = (policy.probs * mdp.reward).sum(axis=1)
        return np.linalg.solve(np.eye(mdp.n_states) - mdp.discount * p_pi, r_pi)
    if method != "iterate":
        raise InvalidInputError(f"unknown method {method!r}")
    threshold = _stop_threshold(mdp, tol)
    v = np.zeros(mdp.n_states)
    while True:
        nv = policy_backup(mdp, policy, v)
        if np.max(np.abs(nv - v)) <= threshold:
            return nv
        v = nv


def value_iteration(mdp: TabularMDP, tol: float = DEFAULT_TOL) -> tuple[np.ndarray, Policy]:
    """Optimal values (within ``tol`` of the Bellman fixed point) and the
    greedy policy with respect to them."""
    if not tol > 0:
        raise InvalidInputError("tol must be > 0")
    threshold = _stop_threshold(mdp, tol)
    v = np.zeros(mdp.n_states)
    while True:
        nv = bellman_backup(mdp, v)
        if np.max(np.abs(nv - v)) <= threshold:
            v = nv
            break
        v = nv
    actions = greedy_actions(action_values(mdp, v))
    return v, Policy.deterministic(actions, mdp.n_actions)


@dataclass
class PolicyIterationResult:
    policy: Policy
    values: np.ndarray
    iterations: int


def policy_iteration(mdp: TabularMDP, max_iterations: int | None = None, atol: float = 1e-12) -> PolicyIterationResult:
    """Howard's policy iteration from the all-zeros policy.

    Policies are evaluated exactly by a linear solve. An action is switched
    only when it improves on the current one by more than ``atol`` (scaled to
    the value magnitude), which rules out cycling between tied actions. The
    final policy is re-read greedily with the lowest-index rule.
    """
    n_s, n_a = mdp.n_states, mdp.n_actions
    if max_iterations is None:
        max_iterations = min(n_a**n_s, 10_000) + 1
    actions = np.zeros(n_s, dtype=int)
    for it in range(1, max_iterations + 1):
        policy = Policy.deterministic(actions, n_a)
        v = evaluate_policy(mdp, policy, method="linear")
        q = action_values(mdp, v)
        scale = atol * max(1.0, float(np.max(np.abs(v))))
        current = q[np.arange(n_s), actions]
        best = q.max(axis=1)
        improve = best > current + scale
        if not np.any(improve):
            final = greedy_actions(q, atol=scale)
            policy = Policy.deterministic(final, n_a)
            return PolicyIterationResult(policy, evaluate_policy(mdp, policy, method="linear"), it)
        actions = np.where(improve, greedy_actions(q, atol=scale), actions)
    raise RuntimeError(f"policy iteration did not stabilise within {max_iterations} improvement steps")


def random_mdp(n_states: int, n_actions: int, discount: float, rng: np.random.Generator) -> TabularMDP:
    """Dirichlet(1) transition rows and standard-normal rewards."""
    p = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    p /= p.sum(axis=2, keepdims=True)
    return TabularMDP(p, rng.standard_normal((n_states, n_actions)), discount)
