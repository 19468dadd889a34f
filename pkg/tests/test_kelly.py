import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from marketgames.environments import BiasedBetEnv
from marketgames.errors import ConfigurationError, InsufficientDataError, InvalidInputError
from marketgames.kelly import (
    estimate_from_history,
    kelly_fraction,
    log_growth,
    log_growth_rate,
    online_kelly,
    read_trade_history,
    simulate_bankroll,
)

# --- formula ----------------------------------------------------------------


@pytest.mark.parametrize(
    "W, R, theta",
    [(0.6, 1.0, 0.2), (0.5, 1.0, 0.0), (0.5, 2.0, 0.25), (1.0, 3.0, 1.0), (0.0, 1.0, -1.0), (0.4, 1.0, -0.2)],
)
def test_fraction_examples(W, R, theta):
    assert kelly_fraction(W, R) == pytest.approx(theta, abs=1e-12)


@pytest.mark.parametrize("R", [0.0, -1.0])
def test_fraction_rejects_nonpositive_ratio(R):
    with pytest.raises(InvalidInputError):
        kelly_fraction(0.5, R)


@settings(max_examples=200)
@given(st.floats(0, 1), st.floats(0.01, 100), st.floats(0.01, 100))
def test_fraction_monotone(W, R1, R2):
    lo, hi = sorted((R1, R2))
    assert kelly_fraction(W, lo) <= kelly_fraction(W, hi) + 1e-12
    assert kelly_fraction(W, R1) <= W + 1e-12


@settings(max_examples=200)
@given(st.floats(0, 0.99), st.floats(0, 0.99), st.floats(0.01, 100))
def test_fraction_increasing_in_W(W1, W2, R):
    lo, hi = sorted((W1, W2))
    assert kelly_fraction(lo, R) <= kelly_fraction(hi, R) + 1e-12


@settings(max_examples=100)
@given(st.floats(0.05, 0.95), st.floats(0.2, 5))
def test_fraction_maximises_expected_log_growth(W, R):
    theta = kelly_fraction(W, R)
    assume(0.001 < theta < 0.95)
    g = log_growth(theta, W, R)
    # independent grid search on [0, 0.99]
    grid = np.linspace(0, 0.99, 9901)
    vals = W * np.log1p(R * grid) + (1 - W) * np.log1p(-grid)
    assert g >= vals.max() - 1e-6
    # derivative by central difference vanishes at theta
    h = 1e-6
    d = (log_growth(theta + h, W, R) - log_growth(theta - h, W, R)) / (2 * h)
    assert abs(d) < 1e-5


def test_expected_log_growth_value():
    # 0.6 ln 1.2 + 0.4 ln 0.8
    assert log_growth(0.2, 0.6) == pytest.approx(0.6 * math.log(1.2) + 0.4 * math.log(0.8), abs=1e-15)
    assert log_growth(0.2, 0.6) == pytest.approx(0.020135513550688863, abs=1e-15)


# --- estimates ---------------------------------------------------------------


def test_estimate_examples():
    e = estimate_from_history([2.0, -1.0, 2.0, -1.0])
    assert (e.W, e.R, e.fraction) == (0.5, 2.0, 0.25)
    e = estimate_from_history([1.0, 3.0, -2.0])
    assert e.W == pytest.approx(2 / 3) and e.R == pytest.approx(1.0)


def test_zero_pnl_is_a_loss():
    e = estimate_from_history([1.0, 0.0, -1.0])
    assert e.n_losses == 2 and e.W == pytest.approx(1 / 3)


@pytest.mark.parametrize("pnls, msg", [([1.0, 2.0], "no losses"), ([-1.0], "no wins"), ([], "no wins")])
def test_estimate_insufficient(pnls, msg):
    with pytest.raises(InsufficientDataError, match=msg):
        estimate_from_history(pnls)


@settings(max_examples=100)
@given(st.lists(st.floats(0.01, 100), min_size=1, max_size=20), st.lists(st.floats(0.01, 100), min_size=1, max_size=20))
def test_estimate_matches_definition(wins, losses):
    e = estimate_from_history(wins + [-x for x in losses])
    assert e.W == pytest.approx(len(wins) / (len(wins) + len(losses)))
    assert e.R == pytest.approx(np.mean(wins) / np.mean(losses))
    assert 0 <= e.W <= 1 and e.R > 0


def test_read_trade_history(tmp_path):
    f = tmp_path / "trades.txt"
    f.write_text("# pnl\n2.0\n-1\n\n2.0, extra\n-1.0\t0\n")
    assert read_trade_history(f) == [2.0, -1.0, 2.0, -1.0]
    f.write_text("1.0\nabc\n")
    with pytest.raises(InvalidInputError, match=":2:"):
        read_trade_history(f)


# --- bankroll ----------------------------------------------------------------


def test_always_winning_bankroll():
    run = simulate_bankroll(BiasedBetEnv(1.0, 1.0), 0.5, 3, seed=0)
    np.testing.assert_allclose(run.capital, [1.0, 1.5, 2.25, 3.375], rtol=1e-12)


def test_always_losing_bankroll():
    run = simulate_bankroll(BiasedBetEnv(0.0, 1.0), 0.5, 2, seed=0)
    np.testing.assert_allclose(run.capital, [1.0, 0.5, 0.25], rtol=1e-12)


def test_zero_fraction_keeps_capital():
    run = simulate_bankroll(BiasedBetEnv(0.3, 2.0), 0.0, 100, seed=4, initial_capital=7.0)
    np.testing.assert_allclose(run.capital, 7.0)


@pytest.mark.parametrize("f", [-0.1, 1.0, 0.995])
def test_fraction_outside_cap_is_config_error(f):
    with pytest.raises(ConfigurationError):
        simulate_bankroll(BiasedBetEnv(0.6, 1.0), f, 10, seed=0)


def test_unknown_rule():
    with pytest.raises(ConfigurationError):
        simulate_bankroll(BiasedBetEnv(0.6, 1.0), "martingale", 10, seed=0)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(0.1, 5), st.floats(0, 0.99), st.integers(0, 2**32))
def test_no_ruin_below_one(p, R, f, seed):
    run = simulate_bankroll(BiasedBetEnv(p, R), f, 500, seed=seed)
    assert np.all(np.isfinite(run.log_capital))
    assert run.fractions.min() >= 0 and run.fractions.max() <= 0.99


def test_seeds_reproduce():
    a = simulate_bankroll(BiasedBetEnv(0.6, 1.0), 0.2, 1000, seed=3)
    b = simulate_bankroll(BiasedBetEnv(0.6, 1.0), 0.2, 1000, seed=3)
    c = simulate_bankroll(BiasedBetEnv(0.6, 1.0), 0.2, 1000, seed=4)
    np.testing.assert_array_equal(a.log_capital, b.log_capital)
    assert not np.array_equal(a.wins, c.wins)


def test_log_growth_matches_expectation():
    n = 100_000
    run = simulate_bankroll(BiasedBetEnv(0.6, 1.0), 0.2, n, seed=11)
    se = np.std(run.log_returns) / math.sqrt(n)
    assert abs(run.log_growth_rate - 0.020135513550688863) <= 3 * se
    assert log_growth_rate(np.exp(run.log_capital[:1000])) == pytest.approx(
        (run.log_capital[999] - run.log_capital[0]) / 999, rel=1e-9
    )


def test_log_growth_rate_validation():
    assert log_growth_rate([1.0, math.e]) == pytest.approx(1.0)
    with pytest.raises(InvalidInputError):
        log_growth_rate([1.0])
    with pytest.raises(InvalidInputError):
        log_growth_rate([1.0, 0.0])


# --- online rule -------------------------------------------------------------


def test_online_fair_coin_bets_little():
    tails = []
    for seed in range(20):
        run = online_kelly(BiasedBetEnv(0.5, 1.0), 1000, 20_000, seed)
        tails.append(run.fractions[-2000:].mean())
    assert np.mean(tails) <= 0.05


def test_online_certain_win_never_stakes():
    # window never contains a loss, so no estimate exists and the stake stays 0
    run = simulate_bankroll(BiasedBetEnv(1.0, 1.0), "online_kelly", 200, seed=0)
    assert np.all(run.fractions == 0.0)
    assert np.all(run.capital == 1.0)


def test_online_all_history_converges():
    run = online_kelly(BiasedBetEnv(0.6, 1.0), None, 50_000, seed=5)
    assert abs(run.fractions[-1] - 0.2) <= 0.05
    assert len(run.fractions) == 50_000 and len(run.log_capital) == 50_001


def test_online_uses_only_past_outcomes():
    run = online_kelly(BiasedBetEnv(0.6, 2.0), 50, 400, seed=9)
    w = run.wins.astype(float)
    for t in (10, 60, 399):
        past = w[max(0, t - 50) : t]
        W = past.mean()
        expected = min(max(W - (1 - W) / 2.0, 0.0), 0.99) if 0 < past.sum() < past.size else 0.0
        assert run.fractions[t] == pytest.approx(expected, abs=1e-12)
    assert np.all(run.fractions[:10] == 0)
