"""Synthetic environments: random streams, the prediction-game loop, biased
bets, log-price processes, an episodic wrapper around tabular MDPs and a
proportional transaction-cost model.

Every environment owns a ``numpy.random.Generator`` derived from an integer
seed plus a stream name, so two environments built from the same seed but
different names draw independent sequences.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .errors import InvalidInputError, RunError

_BUFFER = 4096


def make_rng(seed: int, *names: str) -> np.random.Generator:
    """Return a generator for the named sub-stream of ``seed``.

    Names are hashed with CRC32 (stable across processes, unlike ``hash``).
    """
    key = tuple(zlib.crc32(n.encode("utf-8")) for n in names)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=key)))


class _UniformBuffer:
    """Hands out uniforms from blocks drawn in bulk; the sequence equals
    scalar ``rng.random()`` calls."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self._buf = np.empty(0)
        self._pos = 0

    def next(self) -> float:
        if self._pos >= self._buf.shape[0]:
            self._buf = self.rng.random(_BUFFER)
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return float(u)


# ---------------------------------------------------------------------------
# prediction game


@dataclass(frozen=True)
class PredictionRound:
    index: int
    side_information: Any
    prediction: Any
    outcome: Any
    utility: float


@dataclass
class PredictionGameResult:
    rounds: list[PredictionRound]

    @property
    def cumulative_utility(self) -> float:
        return float(sum(r.utility for r in self.rounds))


class BiasedCoinGame:
    """Reality side of a prediction game: announces the previous outcome as
    side information, then reveals a Bernoulli(p) outcome (1 = heads)."""

    def __init__(self, p: float):
        if not 0.0 <= p <= 1.0:
            raise InvalidInputError(f"p must lie in [0, 1], got {p}")
        self.p = p
        self._last = None

    def announce(self, rng: np.random.Generator):
        return self._last

    def resolve(self, rng: np.random.Generator, x) -> int:
        y = int(rng.random() < self.p)
        self._last = y
        return y


class ConstantGame:
    """Reality that always announces ``x`` and resolves to ``y``."""

    def __init__(self, y, x=None):
        self.x, self.y = x, y

    def announce(self, rng):
        return self.x

    def resolve(self, rng, x):
        return self.y


def match_utility(prediction, outcome) -> float:
    return 1.0 if prediction == outcome else 0.0


def run_prediction_game(
    env,
    predictor: Callable[[Any, Sequence[PredictionRound]], Any],
    n_rounds: int,
    seed: int,
    utility: Callable[[Any, Any], float] = match_utility,
) -> PredictionGameResult:
    """Play ``n_rounds`` of: reality announces x_n, the predictor answers
    gamma_n, reality announces y_n, ``utility(gamma_n, y_n)`` scores it.

    ``predictor(x, history)`` receives the side information and the rounds
    played so far. An exception raised by it is re-raised as ``RunError``
    carrying the (1-based) round number.
    """
    if n_rounds < 1:
        raise InvalidInputError("n_rounds must be >= 1")
    rng = make_rng(seed, "prediction-game")
    rounds: list[PredictionRound] = []
    for n in range(1, n_rounds + 1):
        x = env.announce(rng)
        try:
            gamma = predictor(x, rounds)
        except Exception as exc:
            raise RunError(f"predictor failed: {exc}", n) from exc
        y = env.resolve(rng, x)
        u = float(utility(gamma, y))
        if not np.isfinite(u):
            raise RunError("utility is not finite", n)
        rounds.append(PredictionRound(n, x, gamma, y, u))
    return PredictionGameResult(rounds)


def majority_predictor(x, history: Sequence[PredictionRound]) -> int:
    """Predict the most frequent past outcome (1 on ties and at start)."""
    if not history:
        return 1
    ones = sum(1 for r in history if r.outcome == 1)
    return 1 if 2 * ones >= len(history) else 0


# ---------------------------------------------------------------------------
# biased bets


class BiasedBetEnv:
    """Repeated binary bet: win with probability ``win_probability``; a win
    pays ``payout_ratio`` per unit staked, a loss forfeits the stake."""

    def __init__(self, win_probability: float, payout_ratio: float, seed: int = 0):
        if not 0.0 <= win_probability <= 1.0:
            raise InvalidInputError(f"win_probability must lie in [0, 1], got {win_probability}")
        if not payout_ratio > 0:
            raise InvalidInputError(f"payout_ratio must be > 0, got {payout_ratio}")
        self.win_probability = float(win_probability)
        self.payout_ratio = float(payout_ratio)
        self.reseed(seed)

    def reseed(self, seed: int) -> None:
        self.seed = seed
        self.rng = make_rng(seed, "biased-bet")

    def step_bet(self) -> bool:
        """One outcome; True is a win."""
        return bool(self.rng.random() < self.win_probability)

    def outcomes(self, n: int) -> np.ndarray:
        """``n`` consecutive outcomes, identical to ``n`` calls of step_bet."""
        return self.rng.random(n) < self.win_probability


def step_bet(env: BiasedBetEnv) -> bool:
    return env.step_bet()


# ---------------------------------------------------------------------------
# log-price processes


class _BufferedPrices:
    def reseed(self, seed: int) -> None:
        self.seed = seed
        self.rng = make_rng(seed, "log-price")
        self._buf = np.empty(0)
        self._pos = 0

    def next_log_price(self) -> float:
        if self._pos >= self._buf.shape[0]:
            self._buf = self._block(_BUFFER)
            self._pos = 0
        p = self._buf[self._pos]
        self._pos += 1
        return float(p)

    def draw(self, n: int) -> np.ndarray:
        return np.array([self.next_log_price() for _ in range(n)])


class GaussianPrices(_BufferedPrices):
    """i.i.d. Gaussian log-price deviations."""

    def __init__(self, mu: float = 0.0, sigma: float = 1.0, seed: int = 0):
        if not sigma > 0:
            raise InvalidInputError(f"sigma must be > 0, got {sigma}")
        self.mu, self.sigma = float(mu), float(sigma)
        self.reseed(seed)

    def _block(self, n):
        return self.rng.normal(self.mu, self.sigma, n)


class UniformPrices(_BufferedPrices):
    def __init__(self, lo: float, hi: float, seed: int = 0):
        if not lo < hi:
            raise InvalidInputError("need lo < hi")
        self.lo, self.hi = float(lo), float(hi)
        self.reseed(seed)

    def _block(self, n):
        return self.rng.uniform(self.lo, self.hi, n)


class HistogramPrices(_BufferedPrices):
    """Pick a bin by mass, then a uniform point inside it."""

    def __init__(self, edges, masses, seed: int = 0):
        self.edges = np.asarray(edges, dtype=float)
        self.masses = np.asarray(masses, dtype=float)
        if self.edges.size != self.masses.size + 1:
            raise InvalidInputError("need len(edges) == len(masses) + 1")
        self._cdf = np.cumsum(self.masses / self.masses.sum())
        self.reseed(seed)

    def _block(self, n):
        u = self.rng.random((n, 2))
        i = np.minimum(np.searchsorted(self._cdf, u[:, 0], side="right"), self.masses.size - 1)
        return self.edges[i] + u[:, 1] * (self.edges[i + 1] - self.edges[i])


class RegimeSwitchingPrices(_BufferedPrices):
    """Drift flips between two regimes with probability ``switch_prob`` per
    round (checked before each draw); the draw is drift + N(0, sigma)."""

    def __init__(
        self,
        drifts: tuple[float, float] = (0.1, -0.1),
        switch_prob: float = 0.01,
        sigma: float = 1.0,
        seed: int = 0,
        initial_regime: int = 0,
    ):
        if not sigma > 0:
            raise InvalidInputError(f"sigma must be > 0, got {sigma}")
        if not 0.0 <= switch_prob <= 1.0:
            raise InvalidInputError(f"switch_prob must lie in [0, 1], got {switch_prob}")
        if initial_regime not in (0, 1):
            raise InvalidInputError("initial_regime must be 0 or 1")
        self.drifts = (float(drifts[0]), float(drifts[1]))
        self.switch_prob = float(switch_prob)
        self.sigma = float(sigma)
        self.initial_regime = initial_regime
        self.reseed(seed)

    def reseed(self, seed: int) -> None:
        super().reseed(seed)
        self.regime = self.initial_regime
        self.regimes_visited = [self.regime]

    def next_log_price(self) -> float:
        # drawn one at a time: regime path and noise interleave on one stream
        if self.rng.random() < self.switch_prob:
            self.regime = 1 - self.regime
        self.regimes_visited.append(self.regime)
        return self.drifts[self.regime] + self.sigma * float(self.rng.standard_normal())


class SequencePrices:
    """Deterministic prices cycling through ``values``; handy in tests."""

    def __init__(self, values: Sequence[float]):
        if len(values) == 0:
            raise InvalidInputError("values must be nonempty")
        self.values = [float(v) for v in values]
        self._i = 0

    def reseed(self, seed: int) -> None:
        self._i = 0

    def next_log_price(self) -> float:
        v = self.values[self._i % len(self.values)]
        self._i += 1
        return v


def next_log_price(env) -> float:
    return env.next_log_price()


# ---------------------------------------------------------------------------
# transaction costs


@dataclass(frozen=True)
class TransactionCostModel:
    proportional_cost: float = 0.0

    def __post_init__(self):
        if not self.proportional_cost >= 0:
            raise InvalidInputError("proportional_cost must be >= 0")

    def apply(self, gross_profit: float, traded_value: float) -> float:
        return apply_transaction_cost(self, gross_profit, traded_value)


def apply_transaction_cost(model: TransactionCostModel, gross_profit: float, traded_value: float) -> float:
    """Net profit after paying ``c * traded_value``."""
    if not traded_value > 0:
        raise InvalidInputError(f"traded_value must be > 0, got {traded_value}")
    return gross_profit - model.proportional_cost * traded_value


# ---------------------------------------------------------------------------
# MDP as an episodic environment


@dataclass
class MDPEnvironment:
    """Episodic sampler for a TabularMDP.

    ``reset()`` returns state 0; ``step(a)`` returns ``(reward, next_state,
    done)`` with ``done`` set once ``horizon`` steps have been taken.
    """

    mdp: Any
    horizon: int
    seed: int = 0
    state: int = field(init=False, default=0)
    t: int = field(init=False, default=0)

    def __post_init__(self):
        if self.horizon < 1:
            raise InvalidInputError("horizon must be >= 1")
        self.n_states = self.mdp.n_states
        self.n_actions = self.mdp.n_actions
        cdf = np.cumsum(self.mdp.transition, axis=2)
        cdf[:, :, -1] = 1.0
        self._cdf = [[list(cdf[s, a]) for a in range(self.n_actions)] for s in range(self.n_states)]
        self._reward = self.mdp.reward.tolist()
        self.reseed(self.seed)

    def reseed(self, seed: int) -> None:
        self.seed = seed
        self._u = _UniformBuffer(make_rng(seed, "mdp-env"))

    def reset(self) -> int:
        self.state = 0
        self.t = 0
        return 0

    def step(self, action: int) -> tuple[float, int, bool]:
        s = self.state
        if not (0 <= action < self.n_actions):
            raise InvalidInputError(f"action {action} out of range")
        u = self._u.next()
        row = self._cdf[s][action]
        nxt = 0
        while row[nxt] <= u:
            nxt += 1
        self.state = nxt
        self.t += 1
        return self._reward[s][action], nxt, self.t >= self.horizon


def mdp_as_environment(mdp, episode_horizon: int, seed: int = 0) -> MDPEnvironment:
    return MDPEnvironment(mdp, episode_horizon, seed)
