"""Runners behind the CLI: one function per experiment kind.

Each runner takes a validated config and one seed and returns the record
rows for that seed plus a dict of scalar summary metrics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import across_games as ag
from . import environments as envs
from . import kelly, mdp, mmm, qlearning
from .config import ExperimentConfig
from .errors import InvalidInputError

COLUMNS = {
    "mdp-solve": ["value_vi", "value_pi", "action_vi", "action_pi"],
    "q-learning": ["mean_return", "q_error"],
    "kelly": ["fraction", "log_capital"],
    "mmm": ["buy_price", "sell_price", "profit", "net_profit", "withdrawal", "cycle_rounds"],
    "across-games": ["game", "partition", "class", "action", "payoff"],
}


@dataclass
class SeedResult:
    rows: list[list]  # [step, *metric columns]
    metrics: dict[str, float]


def _mdp_for(cfg: ExperimentConfig, seed: int) -> mdp.TabularMDP:
    env = cfg.environment
    if env["transition"] is not None:
        return mdp.TabularMDP(np.asarray(env["transition"], float), np.asarray(env["reward"], float), env["discount"])
    rng = envs.make_rng(seed, "random-mdp")
    return mdp.random_mdp(env["n_states"], env["n_actions"], env["discount"], rng)


def run_mdp_solve(cfg: ExperimentConfig, seed: int) -> SeedResult:
    m = _mdp_for(cfg, seed)
    tol = cfg.learner["tol"]
    v_vi, pol_vi = mdp.value_iteration(m, tol)
    pi = mdp.policy_iteration(m)
    v_pi = mdp.evaluate_policy(m, pi.policy, tol)
    rows = [
        [s, v_vi[s], v_pi[s], int(pol_vi.actions[s]), int(pi.policy.actions[s])]
        for s in range(m.n_states)
    ]
    same = mdp.argmax_sets(mdp.action_values(m, v_vi), 1e-8) == mdp.argmax_sets(mdp.action_values(m, v_pi), 1e-8)
    return SeedResult(
        rows,
        {
            "max_value_gap": float(np.max(np.abs(v_vi - v_pi))),
            "argmax_sets_agree": float(same),
            "policy_iteration_steps": float(pi.iterations),
        },
    )


def run_q_learning(cfg: ExperimentConfig, seed: int) -> SeedResult:
    m = _mdp_for(cfg, seed)
    lrn = cfg.learner
    v_star, pol_star = mdp.value_iteration(m, 1e-12)
    q_star = mdp.action_values(m, v_star)
    env = envs.mdp_as_environment(m, cfg.environment["horizon"])
    schedule = qlearning.LearningRateSchedule(lrn["schedule"], lrn["omega"], lrn["alpha0"])
    exploration = qlearning.ExplorationPolicy(lrn["epsilon0"], lrn["epsilon_decay"], lrn["epsilon_min"])
    res = qlearning.run_q_learning(
        env, schedule, exploration, cfg.rounds, seed,
        initial_q=lrn["initial_q"], q_star=q_star, checkpoint_every=cfg.record_every,
    )
    rows = []
    prev = 0
    for episode, err in res.checkpoints:
        rows.append([episode, float(np.mean(res.returns[prev:episode])), err])
        prev = episode
    return SeedResult(
        rows,
        {
            "final_q_error": res.checkpoints[-1][1],
            "greedy_matches_oracle": float(np.array_equal(res.policy.actions, pol_star.actions)),
            "steps": float(res.steps),
        },
    )


def run_kelly(cfg: ExperimentConfig, seed: int) -> SeedResult:
    e, lrn = cfg.environment, cfg.learner
    env = envs.BiasedBetEnv(e["win_probability"], e["payout_ratio"])
    rule = lrn["fraction"] if lrn["rule"] == "fixed" else "online_kelly"
    run = kelly.simulate_bankroll(
        env, rule, cfg.rounds, seed, initial_capital=lrn["initial_capital"], f_cap=lrn["f_cap"], window=lrn["window"]
    )
    log_cap = run.log_capital
    rows = [[0, 0.0, log_cap[0]]]
    for t in range(cfg.record_every, cfg.rounds + 1, cfg.record_every):
        rows.append([t, run.fractions[t - 1], log_cap[t]])
    if rows[-1][0] != cfg.rounds:
        t = cfg.rounds
        rows.append([t, run.fractions[t - 1], log_cap[t]])
    metrics = {
        "log_growth_rate": run.log_growth_rate,
        "final_log_capital": float(log_cap[-1]),
        "mean_fraction": float(np.mean(run.fractions)),
    }
    p, R = e["win_probability"], e["payout_ratio"]
    if lrn["rule"] == "fixed" and 0 < p < 1:
        metrics["expected_log_growth"] = kelly.log_growth(lrn["fraction"], p, R)
    return SeedResult(rows, metrics)


def _mmm_density(env) -> mmm.PriceDensity | None:
    kind = env["density"]
    if kind == "gaussian":
        return mmm.GaussianDensity(env["mu"], env["sigma"])
    if kind == "uniform":
        return mmm.UniformDensity(env["lo"], env["hi"])
    if kind == "histogram":
        return mmm.read_density_file(env["density_file"])
    return None


def _mmm_prices(env, density):
    kind = env["density"]
    if kind == "gaussian":
        return envs.GaussianPrices(env["mu"], env["sigma"])
    if kind == "uniform":
        return envs.UniformPrices(env["lo"], env["hi"])
    if kind == "histogram":
        return envs.HistogramPrices(density.edges, density.masses)
    return envs.RegimeSwitchingPrices(tuple(env["drifts"]), env["switch_prob"], env["sigma"])


def run_mmm(cfg: ExperimentConfig, seed: int) -> SeedResult:
    env, lrn = cfg.environment, cfg.learner
    density = _mmm_density(env)
    a_max = mmm.fixed_point_withdrawal(density) if density is not None else None
    if lrn["strategy"] == "optimal":
        if a_max is None:
            raise InvalidInputError("strategy 'optimal' needs an analytic or histogram density")
        strategy = a_max
    elif lrn["strategy"] == "fixed":
        strategy = lrn["withdrawal"]
    else:
        strategy = "adaptive"
    cost = envs.TransactionCostModel(lrn["proportional_cost"])
    run = mmm.simulate_mmm(
        _mmm_prices(env, density), strategy, cfg.rounds, seed,
        max_cycles=lrn["max_cycles"], sale_probability=lrn["sale_probability"],
        cost_model=cost, traded_value=lrn["traded_value"],
    )
    rows = [
        [i + 1, c.buy_price, c.sell_price, c.profit, c.net_profit, c.withdrawal, c.rounds]
        for i, c in enumerate(run.cycles)
        if (i + 1) % cfg.record_every == 0 or i + 1 == len(run.cycles)
    ]
    n = len(run.cycles)
    metrics = {
        "cycles": float(n),
        "profit_per_round": run.profit_per_round,
        "mean_cycle_profit": float(run.profits.mean()) if n else 0.0,
        "mean_net_profit": float(run.net_profits.mean()) if n else 0.0,
        "final_withdrawal": mmm.adaptive_withdrawal(run.cycles) if strategy == "adaptive" else float(strategy),
    }
    if a_max is not None:
        metrics["a_max"] = a_max
        metrics["rho_at_a_max"] = mmm.profit_rate(density, a_max)
    return SeedResult(rows, metrics)


def build_game_set(games: list[dict]) -> tuple[ag.GameSet, ag.OpponentModel]:
    matrices, opponents, weights = [], [], []
    for g in games:
        m = np.asarray(g["payoffs"], dtype=float)
        matrices.append(qlearning.MatrixGame(np.stack([m, -m])))
        k = m.shape[1]
        opponents.append(tuple(g["opponent"]) if g["opponent"] is not None else (1.0 / k,) * k)
        weights.append(g["weight"])
    gs = ag.GameSet(tuple(matrices), None if weights[0] is None else tuple(weights))
    return gs, ag.OpponentModel(tuple(opponents))


def _across_config(cfg: ExperimentConfig) -> ag.AcrossGamesConfig:
    lrn = cfg.learner
    return ag.AcrossGamesConfig(
        rounds=cfg.rounds,
        kappa=lrn["kappa"],
        partition_temperature=lrn["partition_temperature"],
        action_temperature=lrn["action_temperature"],
        candidates=lrn["candidates"],
        initial_propensity=lrn["initial_propensity"],
        initial_attraction=lrn["initial_attraction"],
        tail_fraction=lrn["tail_fraction"],
    )


def run_across_games(cfg: ExperimentConfig, seed: int) -> SeedResult:
    gs, opp = build_game_set(cfg.environment["games"])
    run = ag.run_across_games(gs, opp, _across_config(cfg), seed)
    rows = [
        [t + 1, int(run.games[t]), int(run.partition[t]), int(run.cls[t]), int(run.action[t]), float(run.payoff[t])]
        for t in range(cfg.record_every - 1, cfg.rounds, cfg.record_every)
    ]
    metrics = {f"final_frequency[{run.partitions[i]}]": float(f) for i, f in enumerate(run.final_frequencies)}
    metrics["mean_payoff"] = float(run.payoff.mean())
    return SeedResult(rows, metrics)


def ode_summary(cfg: ExperimentConfig) -> dict[str, float]:
    gs, opp = build_game_set(cfg.environment["games"])
    traj = ag.ode_approximation(gs, opp, _across_config(cfg), cfg.rounds, cfg.learner["ode_step"], record_every=10**9)
    return {f"ode_probability[{p}]": float(x) for p, x in zip(traj.partitions, traj.final_probabilities)}


RUNNERS = {
    "mdp-solve": run_mdp_solve,
    "q-learning": run_q_learning,
    "kelly": run_kelly,
    "mmm": run_mmm,
    "across-games": run_across_games,
}


def format_value(x) -> str:
    """Integers verbatim, floats with 12 significant digits."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"non-finite value {x} in record")
    s = format(x, ".12g")
    return "0" if s == "-0" else s
