"""Learning across games.

Each round a game is drawn from a finite set. The learner samples a
partition of the game set (by softmax over partition propensities), looks up
the class holding the drawn game, samples an action (softmax over that
class's attractions), plays it against a stationary opponent, and reinforces
both stocks with the payoff: the propensity net of a reasoning cost
kappa * (classes - 1), the attraction with the raw payoff.

``ode_approximation`` integrates the expected motion of the same process.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .environments import make_rng
from .errors import InvalidInputError
from .qlearning import MatrixGame

MAX_GAMES = 8
FLOOR = 1e-6


@dataclass(frozen=True)
class Partition:
    classes: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        classes = tuple(sorted((tuple(sorted(c)) for c in self.classes), key=lambda c: c[0] if c else -1))
        if any(len(c) == 0 for c in classes):
            raise InvalidInputError("partition classes must be nonempty")
        members = [g for c in classes for g in c]
        if sorted(members) != list(range(len(members))):
            raise InvalidInputError(f"classes {classes} are not an exact cover of 0..{len(members) - 1}")
        object.__setattr__(self, "classes", classes)

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    @property
    def n_games(self) -> int:
        return sum(len(c) for c in self.classes)

    def class_of(self, game: int) -> int:
        for i, c in enumerate(self.classes):
            if game in c:
                return i
        raise InvalidInputError(f"game {game} not covered")

    def labels(self) -> list[int]:
        out = [0] * self.n_games
        for i, c in enumerate(self.classes):
            for g in c:
                out[g] = i
        return out

    def __str__(self):
        return "|".join("".join(str(g) for g in c) for c in self.classes)


def enumerate_partitions(n_games: int, max_games: int = MAX_GAMES) -> list[Partition]:
    """All set partitions of range(n_games), coarsest first, via restricted
    growth strings in lexicographic order."""
    if n_games < 1:
        raise InvalidInputError("n_games must be >= 1")
    if n_games > max_games:
        raise InvalidInputError(f"{n_games} games exceeds the enumeration cap of {max_games}")
    out = []

    def grow(prefix, top):
        if len(prefix) == n_games:
            classes = [[] for _ in range(top + 1)]
            for g, k in enumerate(prefix):
                classes[k].append(g)
            out.append(Partition(tuple(tuple(c) for c in classes)))
            return
        for k in range(top + 2):
            grow(prefix + [k], max(top, k))

    grow([0], 0)
    return out


def extreme_partitions(n_games: int) -> list[Partition]:
    coarse = Partition((tuple(range(n_games)),))
    if n_games == 1:
        return [coarse]
    return [coarse, Partition(tuple((g,) for g in range(n_games)))]


@dataclass(frozen=True)
class GameSet:
    """Games the learner (agent 0) may face; all share its action count."""

    games: tuple[MatrixGame, ...]
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        games = tuple(self.games)
        if not games:
            raise InvalidInputError("game set must be nonempty")
        counts = {g.action_counts[0] for g in games}
        if len(counts) != 1:
            raise InvalidInputError(f"games disagree on the learner's action count: {sorted(counts)}")
        w = np.full(len(games), 1.0 / len(games)) if self.weights is None else np.asarray(self.weights, dtype=float)
        if w.shape != (len(games),) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise InvalidInputError("draw weights must be a probability vector over the games")
        object.__setattr__(self, "games", games)
        object.__setattr__(self, "weights", tuple(float(x) for x in w))

    @property
    def n_games(self) -> int:
        return len(self.games)

    @property
    def n_actions(self) -> int:
        return self.games[0].action_counts[0]


@dataclass(frozen=True)
class OpponentModel:
    """Per game, a fixed distribution over the other agents' joint actions
    (flattened in C order)."""

    strategies: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(float(x) for x in s) for s in self.strategies)
        for s in rows:
            if any(x < 0 for x in s) or abs(sum(s) - 1.0) > 1e-12:
                raise InvalidInputError(f"opponent strategy {s} is not a probability vector")
        object.__setattr__(self, "strategies", rows)

    @classmethod
    def uniform(cls, gameset: GameSet) -> "OpponentModel":
        rows = []
        for g in gameset.games:
            k = int(np.prod(g.action_counts[1:], dtype=int))
            rows.append((1.0 / k,) * k)
        return cls(tuple(rows))


def _learner_matrices(gameset: GameSet, opponents: OpponentModel) -> list[np.ndarray]:
    if len(opponents.strategies) != gameset.n_games:
        raise InvalidInputError("need one opponent strategy per game")
    mats = []
    for g, s in zip(gameset.games, opponents.strategies):
        m = g.payoffs[0].reshape(gameset.n_actions, -1)
        if m.shape[1] != len(s):
            raise InvalidInputError(f"opponent strategy length {len(s)} does not match {m.shape[1]} joint actions")
        mats.append(m)
    return mats


def expected_payoffs(gameset: GameSet, opponents: OpponentModel) -> np.ndarray:
    """u[g, a]: learner's expected payoff for action a in game g."""
    mats = _learner_matrices(gameset, opponents)
    return np.array([m @ np.asarray(s) for m, s in zip(mats, opponents.strategies)])


@dataclass
class LearnerState:
    partitions: list[Partition]
    propensities: np.ndarray
    attractions: list[np.ndarray]  # per partition, shape (n_classes, n_actions)
    kappa: float = 0.0

    @classmethod
    def initial(
        cls,
        partitions: Sequence[Partition],
        n_actions: int,
        kappa: float = 0.0,
        propensity: float = 1.0,
        attraction: float = 1.0,
    ) -> "LearnerState":
        if kappa < 0:
            raise InvalidInputError("kappa must be >= 0")
        if not (propensity > 0 and attraction > 0):
            raise InvalidInputError("initial propensities and attractions must be positive")
        parts = list(partitions)
        return cls(
            parts,
            np.full(len(parts), float(propensity)),
            [np.full((p.n_classes, n_actions), float(attraction)) for p in parts],
            float(kappa),
        )

    def cost(self, index: int) -> float:
        return self.kappa * (self.partitions[index].n_classes - 1)

    def copy(self) -> "LearnerState":
        return LearnerState(list(self.partitions), self.propensities.copy(), [a.copy() for a in self.attractions], self.kappa)


def softmax(x, temperature: float) -> np.ndarray:
    if not temperature > 0:
        raise InvalidInputError("temperature must be > 0")
    z = np.asarray(x, dtype=float) / temperature
    z = np.exp(z - z.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


def _sample(probs, u: float) -> int:
    acc = 0.0
    for i, p in enumerate(probs):
        acc += p
        if u < acc:
            return i
    return len(probs) - 1


def choose_partition(state: LearnerState, temperature: float, rng: np.random.Generator) -> int:
    """Index of a partition drawn with probability softmax(propensity / T)."""
    return _sample(softmax(state.propensities, temperature), rng.random())


def choose_action(state: LearnerState, partition: int, cls: int, temperature: float, rng: np.random.Generator) -> int:
    return _sample(softmax(state.attractions[partition][cls], temperature), rng.random())


def update_learning(state: LearnerState, partition: int, cls: int, action: int, payoff: float) -> LearnerState:
    """In place: propensity += payoff - cost, attraction += payoff, each
    floored at 1e-6."""
    if not math.isfinite(payoff):
        raise InvalidInputError("payoff must be finite")
    state.propensities[partition] = max(FLOOR, state.propensities[partition] + payoff - state.cost(partition))
    row = state.attractions[partition][cls]
    row[action] = max(FLOOR, row[action] + payoff)
    return state


@dataclass(frozen=True)
class AcrossGamesConfig:
    rounds: int = 200_000
    kappa: float = 0.0
    partition_temperature: float = 1.0
    action_temperature: float = 1.0
    candidates: str = "all"  # or "extremes": {coarsest, finest}
    initial_propensity: float = 1.0
    initial_attraction: float = 1.0
    tail_fraction: float = 0.1

    def __post_init__(self):
        if self.rounds < 1:
            raise InvalidInputError("rounds must be >= 1")
        if self.kappa < 0:
            raise InvalidInputError("kappa must be >= 0")
        if not (self.partition_temperature > 0 and self.action_temperature > 0):
            raise InvalidInputError("temperatures must be > 0")
        if self.candidates not in ("all", "extremes"):
            raise InvalidInputError(f"candidates must be 'all' or 'extremes', got {self.candidates!r}")
        if not 0 < self.tail_fraction <= 1:
            raise InvalidInputError("tail_fraction must lie in (0, 1]")

    def partitions(self, n_games: int) -> list[Partition]:
        if self.candidates == "extremes":
            return extreme_partitions(n_games)
        return enumerate_partitions(n_games)


@dataclass
class AcrossGamesRun:
    partitions: list[Partition]
    games: np.ndarray
    partition: np.ndarray
    cls: np.ndarray
    action: np.ndarray
    payoff: np.ndarray
    state: LearnerState
    final_frequencies: np.ndarray = field(default=None)


def run_across_games(gameset: GameSet, opponents: OpponentModel, config: AcrossGamesConfig, seed: int) -> AcrossGamesRun:
    """Per round: draw game, choose partition, locate class, choose action,
    realise payoff against the opponent, update."""
    mats = [m.tolist() for m in _learner_matrices(gameset, opponents)]
    partitions = config.partitions(gameset.n_games)
    state = LearnerState.initial(
        partitions, gameset.n_actions, config.kappa, config.initial_propensity, config.initial_attraction
    )
    labels = [p.labels() for p in partitions]
    costs = [state.cost(i) for i in range(len(partitions))]
    game_cdf = np.cumsum(gameset.weights).tolist()
    opp_cdf = [np.cumsum(s).tolist() for s in opponents.strategies]
    t_p, t_a = config.partition_temperature, config.action_temperature
    rounds = config.rounds

    # the hot loop works on python lists; numpy per-element access is slower
    props = state.propensities.tolist()
    attrs = [a.tolist() for a in state.attractions]
    rng = make_rng(seed, "across-games")
    u = rng.random((rounds, 4)).tolist()
    exp = math.exp

    def pick(values, temp, x):
        m = max(values)
        w = [exp((v - m) / temp) for v in values]
        target = x * sum(w)
        acc = 0.0
        for i, wi in enumerate(w):
            acc += wi
            if target < acc:
                return i
        return len(w) - 1

    def pick_cdf(cdf, x):
        for i, c in enumerate(cdf):
            if x < c:
                return i
        return len(cdf) - 1

    out_g = [0] * rounds
    out_p = [0] * rounds
    out_c = [0] * rounds
    out_a = [0] * rounds
    out_r = [0.0] * rounds
    for t in range(rounds):
        ug, up, ua, uo = u[t]
        g = pick_cdf(game_cdf, ug)
        p = pick(props, t_p, up)
        c = labels[p][g]
        row = attrs[p][c]
        a = pick(row, t_a, ua)
        r = mats[g][a][pick_cdf(opp_cdf[g], uo)]
        props[p] = max(FLOOR, props[p] + r - costs[p])
        row[a] = max(FLOOR, row[a] + r)
        out_g[t], out_p[t], out_c[t], out_a[t], out_r[t] = g, p, c, a, r

    state.propensities = np.array(props)
    state.attractions = [np.array(a) for a in attrs]
    chosen = np.array(out_p)
    tail = chosen[rounds - max(1, int(round(config.tail_fraction * rounds))):]
    freq = np.bincount(tail, minlength=len(partitions)) / tail.size
    return AcrossGamesRun(
        partitions, np.array(out_g), chosen, np.array(out_c), np.array(out_a), np.array(out_r), state, freq
    )


@dataclass
class ODETrajectory:
    partitions: list[Partition]
    times: np.ndarray
    propensities: np.ndarray  # (n_times, n_partitions)
    choice_probabilities: np.ndarray  # softmax of propensities at each time
    attractions: list[np.ndarray]  # endpoint values

    @property
    def final_probabilities(self) -> np.ndarray:
        return self.choice_probabilities[-1]


def ode_approximation(
    gameset: GameSet,
    opponents: OpponentModel,
    config: AcrossGamesConfig,
    horizon: float,
    step: float,
    record_every: int = 1,
) -> ODETrajectory:
    """Explicit Euler on the expected increments per round:

        d prop_P / dt     = s_P (sum_c sum_a s_{a|c} U_P[c, a] - cost_P)
        d attr_P[c, a]/dt = s_P s_{a|c} U_P[c, a]

    with U_P[c, a] = sum_{g in c} w_g u[g, a] (the class-draw probability is
    folded into U) and s the softmax choice probabilities. The floor applied
    by the stochastic update is applied after every step.
    """
    if not step > 0:
        raise InvalidInputError("step must be > 0")
    if not horizon >= 0:
        raise InvalidInputError("horizon must be >= 0")
    u = expected_payoffs(gameset, opponents) * np.asarray(gameset.weights)[:, None]
    partitions = config.partitions(gameset.n_games)
    state = LearnerState.initial(
        partitions, gameset.n_actions, config.kappa, config.initial_propensity, config.initial_attraction
    )
    class_payoffs = [np.array([u[list(c)].sum(axis=0) for c in p.classes]) for p in partitions]
    costs = np.array([state.cost(i) for i in range(len(partitions))])
    prop = state.propensities.copy()
    attrs = [a.copy() for a in state.attractions]

    n_steps = int(math.ceil(horizon / step - 1e-12))
    times, props_rec = [0.0], [prop.copy()]
    t = 0.0
    for k in range(n_steps):
        h = min(step, horizon - t)
        s_p = softmax(prop, config.partition_temperature)
        d_prop = np.empty_like(prop)
        new_attrs = []
        for i, (att, up) in enumerate(zip(attrs, class_payoffs)):
            s_a = softmax(att, config.action_temperature)
            d_prop[i] = s_p[i] * (np.sum(s_a * up) - costs[i])
            new_attrs.append(np.maximum(FLOOR, att + h * s_p[i] * s_a * up))
        prop = np.maximum(FLOOR, prop + h * d_prop)
        attrs = new_attrs
        t += h
        if (k + 1) % record_every == 0 or k + 1 == n_steps:
            times.append(t)
            props_rec.append(prop.copy())
    props_arr = np.array(props_rec)
    return ODETrajectory(
        partitions, np.array(times), props_arr, softmax(props_arr, config.partition_temperature), attrs
    )
