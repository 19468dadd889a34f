"""Watkins Q-learning with per-cell decaying learning rates and epsilon-greedy
exploration, plus pure-strategy equilibrium predicates on matrix games."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .environments import make_rng
from .errors import InvalidInputError, RunError
from .mdp import Policy, greedy_actions


@dataclass
class QTable:
    values: np.ndarray
    visits: np.ndarray

    @classmethod
    def zeros(cls, n_states: int, n_actions: int, initial: float = 0.0) -> "QTable":
        return cls(np.full((n_states, n_actions), float(initial)), np.zeros((n_states, n_actions), dtype=np.int64))

    def copy(self) -> "QTable":
        return QTable(self.values.copy(), self.visits.copy())

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def q_update(q: QTable, s: int, a: int, r: float, s_next: int, alpha: float, beta: float) -> QTable:
    """In-place update of cell (s, a) toward r + beta * max_b Q(s_next, b).

    The bootstrap uses the successor state. Returns ``q`` for chaining.
    """
    n_s, n_a = q.shape
    if not (0 <= s < n_s and 0 <= s_next < n_s and 0 <= a < n_a):
        raise InvalidInputError(f"index out of range: s={s}, a={a}, s_next={s_next}")
    if not 0.0 <= alpha < 1.0:
        raise InvalidInputError(f"alpha must lie in [0, 1), got {alpha}")
    if not 0.0 <= beta < 1.0:
        raise InvalidInputError(f"beta must lie in [0, 1), got {beta}")
    target = r + beta * q.values[s_next].max()
    q.values[s, a] = (1.0 - alpha) * q.values[s, a] + alpha * target
    q.visits[s, a] += 1
    return q


@dataclass(frozen=True)
class LearningRateSchedule:
    """``constant``: alpha = alpha0.  ``polynomial``: alpha = (1 + n)^-omega
    where n >= 1 counts visits to the cell including the current one, so the
    first update already uses 2^-omega < 1."""

    kind: str = "polynomial"
    omega: float = 0.7
    alpha0: float = 0.1

    def __post_init__(self):
        if self.kind == "polynomial":
            if not 0.5 < self.omega <= 1.0:
                raise InvalidInputError(f"omega must lie in (0.5, 1], got {self.omega}")
        elif self.kind == "constant":
            if not 0.0 <= self.alpha0 < 1.0:
                raise InvalidInputError(f"alpha0 must lie in [0, 1), got {self.alpha0}")
        else:
            raise InvalidInputError(f"unknown schedule kind {self.kind!r}")

    def rate(self, visits: int) -> float:
        if self.kind == "constant":
            return self.alpha0
        return (1.0 + visits) ** -self.omega


@dataclass(frozen=True)
class ExplorationPolicy:
    """Epsilon-greedy; epsilon = max(eps_min, eps0 * decay**episode)."""

    epsilon0: float = 1.0
    decay: float = 0.9999
    epsilon_min: float = 0.05

    def __post_init__(self):
        if not 0.0 <= self.epsilon_min <= self.epsilon0 <= 1.0:
            raise InvalidInputError("need 0 <= epsilon_min <= epsilon0 <= 1")
        if not 0.0 < self.decay <= 1.0:
            raise InvalidInputError("decay must lie in (0, 1]")

    def epsilon(self, episode: int) -> float:
        return max(self.epsilon_min, self.epsilon0 * self.decay**episode)


def greedy_policy(q: QTable) -> Policy:
    return Policy.deterministic(greedy_actions(q.values), q.shape[1])


@dataclass
class QLearningResult:
    q: QTable
    returns: np.ndarray
    policy: Policy
    steps: int
    checkpoints: list[tuple[int, float]] = field(default_factory=list)


def run_q_learning(
    env,
    schedule: LearningRateSchedule,
    exploration: ExplorationPolicy,
    episodes: int,
    seed: int,
    beta: float | None = None,
    initial_q: float = 0.0,
    q_star: np.ndarray | None = None,
    checkpoint_every: int = 1000,
) -> QLearningResult:
    """Tabular Q-learning against an episodic environment.

    ``env`` needs ``n_states``, ``n_actions``, ``reset()`` and ``step(a) ->
    (reward, next_state, done)``; if it has ``reseed`` it is reseeded from
    ``seed`` so the whole run is reproducible. ``beta`` defaults to
    ``env.mdp.discount``. When ``q_star`` is given, the sup-norm error is
    recorded every ``checkpoint_every`` episodes and after the last one.
    """
    if episodes < 1:
        raise InvalidInputError("episodes must be >= 1")
    if beta is None:
        beta = env.mdp.discount
    if not 0.0 <= beta < 1.0:
        raise InvalidInputError(f"beta must lie in [0, 1), got {beta}")
    if hasattr(env, "reseed"):
        env.reseed(int(make_rng(seed, "q-env").integers(2**62)))
    rng = make_rng(seed, "q-explore")
    n_s, n_a = env.n_states, env.n_actions

    # plain lists: this loop dominates runtime and numpy scalar access is slow
    qv = [[float(initial_q)] * n_a for _ in range(n_s)]
    visits = [[0] * n_a for _ in range(n_s)]
    polynomial = schedule.kind == "polynomial"
    omega, alpha0 = schedule.omega, schedule.alpha0
    returns = np.zeros(episodes)
    checkpoints: list[tuple[int, float]] = []
    uniforms = rng.random(1 << 16)
    ui = 0
    steps = 0

    for ep in range(episodes):
        eps = exploration.epsilon(ep)
        try:
            s = env.reset()
        except Exception as exc:
            raise RunError(f"environment reset failed: {exc}", ep) from exc
        total = 0.0
        done = False
        while not done:
            if ui + 2 > len(uniforms):
                uniforms = rng.random(1 << 16)
                ui = 0
            row = qv[s]
            if uniforms[ui] < eps:
                a = min(int(uniforms[ui + 1] * n_a), n_a - 1)
            else:
                a = row.index(max(row))
            ui += 2
            try:
                r, s2, done = env.step(a)
            except Exception as exc:
                raise RunError(f"environment step failed: {exc}", ep) from exc
            n = visits[s][a] + 1
            visits[s][a] = n
            alpha = (1.0 + n) ** -omega if polynomial else alpha0
            row[a] = (1.0 - alpha) * row[a] + alpha * (r + beta * max(qv[s2]))
            total += r
            s = s2
            steps += 1
        returns[ep] = total
        if q_star is not None and ((ep + 1) % checkpoint_every == 0 or ep + 1 == episodes):
            checkpoints.append((ep + 1, float(np.max(np.abs(np.array(qv) - q_star)))))

    q = QTable(np.array(qv, dtype=float), np.array(visits, dtype=np.int64))
    return QLearningResult(q, returns, greedy_policy(q), steps, checkpoints)


# ---------------------------------------------------------------------------
# matrix games


@dataclass(frozen=True)
class MatrixGame:
    """``payoffs[i]`` is agent i's payoff tensor indexed by the joint action."""

    payoffs: np.ndarray

    def __post_init__(self):
        p = np.array(self.payoffs, dtype=float)
        if p.ndim < 2 or p.shape[0] != p.ndim - 1:
            raise InvalidInputError(f"payoffs must have shape (n_agents, *action_counts), got {p.shape}")
        if not np.all(np.isfinite(p)):
            raise InvalidInputError("payoffs must be finite")
        p.setflags(write=False)
        object.__setattr__(self, "payoffs", p)

    @property
    def n_agents(self) -> int:
        return self.payoffs.shape[0]

    @property
    def action_counts(self) -> tuple[int, ...]:
        return self.payoffs.shape[1:]

    def joint_actions(self):
        return itertools.product(*(range(k) for k in self.action_counts))

    def _check_joint(self, joint) -> tuple[int, ...]:
        joint = tuple(int(a) for a in joint)
        if len(joint) != self.n_agents or any(not 0 <= a < k for a, k in zip(joint, self.action_counts)):
            raise InvalidInputError(f"invalid joint action {joint}")
        return joint


def check_adversarial_equilibrium(game: MatrixGame, joint) -> tuple[list[bool], bool]:
    """Per agent: does no change in the *other* agents' actions lower its
    payoff below the one at ``joint``?  Returns (per-agent flags, all)."""
    joint = game._check_joint(joint)
    flags = []
    for i in range(game.n_agents):
        index = tuple(slice(None) if j != i else joint[i] for j in range(game.n_agents))
        flags.append(bool(game.payoffs[i][joint] <= game.payoffs[i][index].min()))
    return flags, all(flags)


def check_coordination_equilibrium(game: MatrixGame, joint) -> bool:
    """True iff every agent gets its global maximum payoff at ``joint``."""
    joint = game._check_joint(joint)
    return all(game.payoffs[i][joint] == game.payoffs[i].max() for i in range(game.n_agents))


def matching_pennies() -> MatrixGame:
    a = np.array([[1.0, -1.0], [-1.0, 1.0]])
    return MatrixGame(np.stack([a, -a]))
