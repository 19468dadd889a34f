"""Withdrawal-price trading cycles.

A trader buys when the log-price deviation ``p`` falls to ``-a`` or below
(``a`` is the withdrawal price), then sells at a later random draw. The
expected profit per round of this cycle is

    rho(a) = -int_{-inf}^{-a} p eta(p) dp / (1 + int_{-inf}^{-a} eta(p) dp)

and its maximiser is the fixed point rho(a_max) = a_max. Everything here is
in log-price units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import integrate

from .environments import TransactionCostModel, make_rng
from .errors import InvalidInputError, NoFixedPointError, RunError

QUAD_TOL = 1e-10
GAUSS_TRUNCATION = 10.0
BRACKET_LIMIT = 2.0**20


# ---------------------------------------------------------------------------
# densities


class PriceDensity:
    """Base class. Subclasses provide ``support`` and ``pdf``; histogram
    densities override ``moments_below`` with exact bin sums."""

    support: tuple[float, float]

    def pdf(self, p):
        raise NotImplementedError

    def moments_below(self, x: float, tol: float = QUAD_TOL, step: float | None = None) -> tuple[float, float]:
        """(int eta, int p eta) over (-inf, x], by adaptive quadrature or, if
        ``step`` is given, composite Simpson with that step."""
        lo, hi = self.support
        upper = min(x, hi)
        if upper <= lo:
            return 0.0, 0.0
        if step is not None:
            return _simpson(self.pdf, lo, upper, step)
        kw = dict(epsabs=tol / 10, epsrel=0.0, limit=500)
        m0 = integrate.quad(self.pdf, lo, upper, **kw)[0]
        m1 = integrate.quad(lambda p: p * self.pdf(p), lo, upper, **kw)[0]
        return m0, m1

    def total_mass(self, tol: float = QUAD_TOL) -> float:
        return self.moments_below(self.support[1], tol)[0]


def _simpson(pdf, lo: float, hi: float, step: float) -> tuple[float, float]:
    n = max(2, int(math.ceil((hi - lo) / step)))
    n += n % 2
    x = np.linspace(lo, hi, n + 1)
    y = np.array([pdf(v) for v in x], dtype=float)
    return float(integrate.simpson(y, x=x)), float(integrate.simpson(x * y, x=x))


@dataclass(frozen=True)
class GaussianDensity(PriceDensity):
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise InvalidInputError(f"sigma must be > 0, got {self.sigma}")

    @property
    def support(self):
        w = GAUSS_TRUNCATION * self.sigma
        return (self.mu - w, self.mu + w)

    def pdf(self, p):
        z = (p - self.mu) / self.sigma
        return math.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2.0 * math.pi))


@dataclass(frozen=True)
class UniformDensity(PriceDensity):
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise InvalidInputError("need lo < hi")

    @property
    def support(self):
        return (self.lo, self.hi)

    def pdf(self, p):
        return 1.0 / (self.hi - self.lo) if self.lo <= p <= self.hi else 0.0


@dataclass(frozen=True)
class HistogramDensity(PriceDensity):
    """Piecewise-constant density: ``masses[i]`` spread evenly over
    [edges[i], edges[i+1])."""

    edges: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=float)
        m = np.asarray(self.masses, dtype=float)
        if e.ndim != 1 or m.ndim != 1 or e.size != m.size + 1 or m.size < 1:
            raise InvalidInputError("need len(edges) == len(masses) + 1 >= 2")
        if np.any(np.diff(e) <= 0):
            raise InvalidInputError("bin edges must be strictly ascending")
        if np.any(m < 0):
            raise InvalidInputError("masses must be nonnegative")
        total = m.sum()
        if abs(total - 1.0) > 1e-6:
            raise InvalidInputError(f"masses must sum to 1, got {total}")
        object.__setattr__(self, "edges", e)
        object.__setattr__(self, "masses", m / total)

    @classmethod
    def from_samples(cls, samples, bins: int = 200) -> "HistogramDensity":
        counts, edges = np.histogram(np.asarray(samples, dtype=float), bins=bins)
        return cls(edges, counts / counts.sum())

    @classmethod
    def from_centers(cls, centers, masses) -> "HistogramDensity":
        c = np.asarray(centers, dtype=float)
        if c.size < 2:
            raise InvalidInputError("need at least two bin centres")
        if np.any(np.diff(c) <= 0):
            raise InvalidInputError("bin centres must be strictly ascending")
        mid = 0.5 * (c[1:] + c[:-1])
        edges = np.concatenate([[c[0] - (mid[0] - c[0])], mid, [c[-1] + (c[-1] - mid[-1])]])
        return cls(edges, masses)

    @property
    def support(self):
        return (float(self.edges[0]), float(self.edges[-1]))

    def pdf(self, p):
        i = np.searchsorted(self.edges, p, side="right") - 1
        if i < 0 or i >= self.masses.size:
            return 0.0
        return float(self.masses[i] / (self.edges[i + 1] - self.edges[i]))

    def moments_below(self, x, tol=QUAD_TOL, step=None):
        lo_e, hi_e = self.edges[:-1], self.edges[1:]
        right = np.clip(x, lo_e, hi_e)
        frac = (right - lo_e) / (hi_e - lo_e)
        m0 = float(np.sum(self.masses * frac))
        m1 = float(np.sum(self.masses * frac * 0.5 * (lo_e + right)))
        return m0, m1


def read_density_file(path) -> HistogramDensity:
    """Two columns per line, ``bin_centre, mass`` (comma, tab or spaces)."""
    centers, masses = [], []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        try:
            c, m = float(parts[0]), float(parts[1])
        except (ValueError, IndexError):
            raise InvalidInputError(f"{path}:{lineno}: expected two numbers") from None
        centers.append(c)
        masses.append(m)
    return HistogramDensity.from_centers(centers, masses)


# ---------------------------------------------------------------------------
# the profit functional and its fixed point


def profit_rate(eta: PriceDensity, a: float, tol: float = QUAD_TOL, step: float | None = None) -> float:
    if not math.isfinite(a):
        raise InvalidInputError(f"withdrawal price must be finite, got {a}")
    m0, m1 = eta.moments_below(-a, tol=tol, step=step)
    return -m1 / (1.0 + m0)


def fixed_point_withdrawal(eta: PriceDensity, tol: float = 1e-10, max_iter: int = 200) -> float:
    """Bisection on h(a) = rho(a) - a over [0, a_hi], a_hi the first of
    1, 2, 4, ... with h(a_hi) < 0."""
    if not tol > 0:
        raise InvalidInputError("tol must be > 0")

    def h(a):
        return profit_rate(eta, a) - a

    h0 = h(0.0)
    if h0 <= tol:
        return 0.0
    hi = 1.0
    while h(hi) >= 0.0:
        hi *= 2.0
        if hi > BRACKET_LIMIT:
            raise NoFixedPointError("no sign change of rho(a) - a below 2^20")
    lo = 0.0
    mid = 0.5 * (lo + hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        hm = h(mid)
        if abs(hm) <= tol and hi - lo <= tol:
            break
        if hm >= 0.0:
            lo = mid
        else:
            hi = mid
    return mid


def argmax_profit(eta: PriceDensity, lo: float, hi: float, step: float) -> float:
    """Grid maximiser of rho over lo, lo+step, ..., <= hi; the lowest grid
    point wins ties."""
    if not (step > 0 and lo < hi):
        raise InvalidInputError("empty grid: need lo < hi and step > 0")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    grid = lo + step * np.arange(n)
    values = np.array([profit_rate(eta, a) for a in grid])
    return float(grid[int(np.argmax(values))])


# ---------------------------------------------------------------------------
# cycles


@dataclass(frozen=True)
class CycleRecord:
    buy_price: float
    sell_price: float
    waiting_rounds: int = 0  # rounds without a purchase before the buy round
    holding_rounds: int = 1  # rounds from purchase to sale
    withdrawal: float = 0.0  # a in force when buying
    net_profit: float | None = None

    @property
    def profit(self) -> float:
        return self.sell_price - self.buy_price

    @property
    def rounds(self) -> int:
        return self.waiting_rounds + 1 + self.holding_rounds


def adaptive_withdrawal(history: Sequence[CycleRecord], per: str = "round") -> float:
    """Historical average profit; 0 with no completed cycles.

    ``per="round"`` divides total profit by total rounds, the quantity rho
    measures. ``per="cycle"`` is the plain mean of cycle profits.
    """
    if not history:
        return 0.0
    total = sum(c.profit for c in history)
    if per == "round":
        return total / sum(c.rounds for c in history)
    if per == "cycle":
        return total / len(history)
    raise InvalidInputError(f"per must be 'round' or 'cycle', got {per!r}")


@dataclass
class MMMRun:
    cycles: list[CycleRecord] = field(default_factory=list)
    rounds: int = 0

    @property
    def profits(self) -> np.ndarray:
        return np.array([c.profit for c in self.cycles])

    @property
    def net_profits(self) -> np.ndarray:
        return np.array([c.profit if c.net_profit is None else c.net_profit for c in self.cycles])

    @property
    def profit_per_round(self) -> float:
        """Total profit of completed cycles over the rounds they used."""
        return adaptive_withdrawal(self.cycles)


def simulate_mmm(
    price_env,
    strategy: float | str,
    n_rounds: int,
    seed: int,
    max_cycles: int | None = None,
    sale_probability: float = 1.0,
    cost_model: TransactionCostModel | None = None,
    traded_value: float = 2.0,
    average: str = "round",
) -> MMMRun:
    """Run buy/sell cycles for at most ``n_rounds`` draws.

    ``strategy`` is a fixed withdrawal price or ``"adaptive"`` (withdrawal
    reset to the historical average profit after every completed cycle,
    starting from 0). While holding, each round's draw is a sale with
    probability ``sale_probability`` (1 means the next round). With a cost
    model each cycle pays ``c * traded_value`` (default 2: one buy and one
    sell of a unit position).
    """
    if n_rounds < 1:
        raise InvalidInputError("n_rounds must be >= 1")
    if not 0.0 < sale_probability <= 1.0:
        raise InvalidInputError("sale_probability must lie in (0, 1]")
    adaptive = strategy == "adaptive"
    if not adaptive:
        a = float(strategy)
        if math.isnan(a):
            raise InvalidInputError("withdrawal price is NaN")
    else:
        a = 0.0
    if hasattr(price_env, "reseed"):
        price_env.reseed(seed)
    sale_rng = make_rng(seed, "mmm-sale")

    run = MMMRun()
    holding = False
    buy = 0.0
    waited = held = 0
    profit_sum = 0.0
    round_sum = 0
    for t in range(n_rounds):
        try:
            p = price_env.next_log_price()
        except Exception as exc:
            raise RunError(f"price environment failed: {exc}", t) from exc
        run.rounds = t + 1
        if not holding:
            if p <= -a:
                holding, buy, held = True, p, 0
            else:
                waited += 1
            continue
        held += 1
        if sale_probability < 1.0 and sale_rng.random() >= sale_probability:
            continue
        gross = p - buy
        net = None if cost_model is None else cost_model.apply(gross, traded_value)
        rec = CycleRecord(buy, p, waited, held, a, net)
        run.cycles.append(rec)
        holding, waited = False, 0
        if adaptive:
            profit_sum += rec.profit
            round_sum += rec.rounds
            a = profit_sum / round_sum if average == "round" else profit_sum / len(run.cycles)
        if max_cycles is not None and len(run.cycles) >= max_cycles:
            break
    return run
