"""Kelly bet sizing: the fraction formula, W/R estimates from trade history,
bankroll simulation on biased binary bets and an online (estimate-then-bet)
rule."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .environments import BiasedBetEnv
from .errors import ConfigurationError, InsufficientDataError, InvalidInputError

DEFAULT_F_CAP = 0.99
WARMUP_BETS = 10


def kelly_fraction(W: float, R: float) -> float:
    """Theta = W - (1 - W) / R.  May be negative (no edge)."""
    if not R > 0:
        raise InvalidInputError(f"R must be > 0, got {R}")
    return W - (1.0 - W) / R


def log_growth(f: float, W: float, R: float = 1.0) -> float:
    """Expected log growth per bet, W ln(1 + R f) + (1 - W) ln(1 - f)."""
    return W * math.log1p(R * f) + (1.0 - W) * math.log1p(-f)


@dataclass(frozen=True)
class KellyEstimate:
    W: float
    R: float
    n_wins: int
    n_losses: int

    @property
    def fraction(self) -> float:
        return kelly_fraction(self.W, self.R)


def estimate_from_history(pnls: Iterable[float]) -> KellyEstimate:
    """Win frequency and mean-win / mean-|loss| ratio of signed trade pnls.
    Zero pnl counts as a loss."""
    x = np.asarray(list(pnls), dtype=float)
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("pnls must be finite")
    wins, losses = x[x > 0], x[x <= 0]
    if wins.size == 0 and losses.size == 0:
        raise InsufficientDataError("empty history: no wins and no losses")
    if wins.size == 0:
        raise InsufficientDataError("history has no wins")
    if losses.size == 0:
        raise InsufficientDataError("history has no losses")
    mean_loss = float(np.mean(-losses))
    if mean_loss == 0.0:
        raise InsufficientDataError("all losses are zero-pnl; R is undefined")
    return KellyEstimate(
        W=wins.size / x.size,
        R=float(np.mean(wins)) / mean_loss,
        n_wins=int(wins.size),
        n_losses=int(losses.size),
    )


def read_trade_history(path) -> list[float]:
    """One signed pnl per line; blank lines and ``#`` comments skipped.
    A trailing comma/tab-separated column is tolerated (first field is used)."""
    pnls = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        field = line.replace("\t", ",").split(",")[0].strip()
        try:
            pnls.append(float(field))
        except ValueError:
            raise InvalidInputError(f"{path}:{lineno}: not a number: {field!r}") from None
    return pnls


@dataclass
class BankrollRun:
    """Capital is kept in log space: 10^5 favourable bets overflow a float."""

    fractions: np.ndarray  # stake used on bet t, length n_bets
    log_capital: np.ndarray  # length n_bets + 1
    wins: np.ndarray  # bool, length n_bets

    @property
    def capital(self) -> np.ndarray:
        return np.exp(self.log_capital)

    @property
    def log_returns(self) -> np.ndarray:
        return np.diff(self.log_capital)

    @property
    def log_growth_rate(self) -> float:
        return float((self.log_capital[-1] - self.log_capital[0]) / (self.log_capital.size - 1))


def _compound(capital0: float, fractions: np.ndarray, wins: np.ndarray, payout: float) -> np.ndarray:
    factors = np.where(wins, 1.0 + fractions * payout, 1.0 - fractions)
    return math.log(capital0) + np.concatenate([[0.0], np.cumsum(np.log(factors))])


def simulate_bankroll(
    env: BiasedBetEnv,
    fraction_rule: float | str,
    n_bets: int,
    seed: int,
    initial_capital: float = 1.0,
    f_cap: float = DEFAULT_F_CAP,
    window: int | None = None,
) -> BankrollRun:
    """Stake a fixed fraction (a float) or ``"online_kelly"`` each bet.

    Wins multiply capital by 1 + f R, losses by 1 - f. Fixed fractions must
    already lie in [0, f_cap].
    """
    if n_bets < 1:
        raise InvalidInputError("n_bets must be >= 1")
    if not initial_capital > 0:
        raise InvalidInputError("initial_capital must be > 0")
    if not 0.0 <= f_cap < 1.0:
        raise ConfigurationError(f"f_cap must lie in [0, 1), got {f_cap}")
    if isinstance(fraction_rule, str):
        if fraction_rule != "online_kelly":
            raise ConfigurationError(f"unknown fraction rule {fraction_rule!r}")
        return online_kelly(env, window, n_bets, seed, initial_capital=initial_capital, f_cap=f_cap)
    f = float(fraction_rule)
    if not 0.0 <= f <= f_cap:
        raise ConfigurationError(f"fraction {f} outside [0, {f_cap}]")
    env.reseed(seed)
    wins = env.outcomes(n_bets)
    fractions = np.full(n_bets, f)
    return BankrollRun(fractions, _compound(initial_capital, fractions, wins, env.payout_ratio), wins)


def online_kelly(
    env: BiasedBetEnv,
    window: int | None,
    n_bets: int,
    seed: int,
    initial_capital: float = 1.0,
    f_cap: float = DEFAULT_F_CAP,
    warmup: int = WARMUP_BETS,
) -> BankrollRun:
    """Bet max(0, Theta(W_hat, R_hat)) estimated from the last ``window``
    outcomes (all history if None), clamped to f_cap.

    The first ``warmup`` bets stake 0 and only observe; so does any later
    step whose window lacks a win or a loss. Each bet is booked as a unit
    trade with pnl +payout or -1, so R_hat equals the payout ratio as soon as
    both sides have been observed.
    """
    if n_bets < 1:
        raise InvalidInputError("n_bets must be >= 1")
    if window is not None and window < 1:
        raise InvalidInputError("window must be >= 1")
    if not 0.0 <= f_cap < 1.0:
        raise ConfigurationError(f"f_cap must lie in [0, 1), got {f_cap}")
    env.reseed(seed)
    wins = env.outcomes(n_bets)
    cum = np.concatenate([[0], np.cumsum(wins)])
    t = np.arange(n_bets)
    start = np.zeros(n_bets, dtype=int) if window is None else np.maximum(0, t - window)
    n_w = cum[t] - cum[start]
    n = t - start
    n_l = n - n_w
    ok = (n_w > 0) & (n_l > 0) & (t >= warmup)
    W_hat = np.divide(n_w, n, out=np.zeros(n_bets), where=n > 0)
    theta = W_hat - (1.0 - W_hat) / env.payout_ratio
    fractions = np.where(ok, np.clip(theta, 0.0, f_cap), 0.0)
    return BankrollRun(fractions, _compound(initial_capital, fractions, wins, env.payout_ratio), wins)


def log_growth_rate(trajectory) -> float:
    """(ln c_end - ln c_start) / (len - 1)."""
    c = np.asarray(trajectory, dtype=float)
    if c.ndim != 1 or c.size < 2:
        raise InvalidInputError("trajectory needs at least two entries")
    if np.any(~(c > 0)):
        raise InvalidInputError("capital entries must be positive")
    return float((math.log(c[-1]) - math.log(c[0])) / (c.size - 1))
