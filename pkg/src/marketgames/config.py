"""Experiment configuration: YAML in, validated ``ExperimentConfig`` out.

Layout::

    kind: kelly              # mdp-solve | q-learning | kelly | mmm | across-games
    seeds: [1, 2, 3]
    output: results/kelly.csv
    rounds: 100000           # bets / episodes / price rounds / game rounds
    record_every: 100        # optional row thinning
    environment: {...}       # kind-specific, see EXPERIMENTS
    learner: {...}

Unknown keys are rejected. Diagnostics carry the line of the offending key.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np
import yaml

from .errors import ConfigurationError


class ConfigError(ConfigurationError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


class ConfigFileError(ConfigError):
    """Config file missing or unreadable."""


class ConfigSyntaxError(ConfigError):
    """File is not valid YAML or not a mapping."""


class ConfigValueError(ConfigError):
    """A key is unknown, missing, or violates its constraint."""


@dataclass(frozen=True)
class Key:
    check: Callable[[Any], bool]
    constraint: str
    default: Any = None
    required: bool = False


def _num(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _pos_int(x) -> bool:
    return _int(x) and x >= 1


def _prob(x) -> bool:
    return _num(x) and 0.0 <= x <= 1.0


def _pos(x) -> bool:
    return _num(x) and x > 0


def _nonneg(x) -> bool:
    return _num(x) and x >= 0


def _one_of(*options):
    return Key(lambda x: x in options, "one of " + ", ".join(map(str, options)), options[0])


def _matrix(ndim: int):
    def check(x):
        try:
            a = np.asarray(x, dtype=float)
        except (TypeError, ValueError):
            return False
        return a.ndim == ndim and a.size > 0 and bool(np.all(np.isfinite(a)))

    return check


_MDP_KEYS = {
    "discount": Key(lambda x: _num(x) and 0.0 <= x < 1.0, "a number in [0, 1)", required=True),
    "transition": Key(_matrix(3), "a nested list p[s][a][s'] of finite numbers"),
    "reward": Key(_matrix(2), "a nested list r[s][a] of finite numbers"),
    "n_states": Key(lambda x: _int(x) and 1 <= x <= 50, "an integer in [1, 50]", 3),
    "n_actions": Key(lambda x: _int(x) and 1 <= x <= 20, "an integer in [1, 20]", 2),
}

EXPERIMENTS: dict[str, dict[str, Any]] = {
    "mdp-solve": {
        "module": "marketgames.mdp",
        "description": "value iteration vs policy iteration on a given or random tabular MDP",
        "rounds": False,
        "environment": dict(_MDP_KEYS),
        "learner": {"tol": Key(_pos, "a positive number", 1e-10)},
    },
    "q-learning": {
        "module": "marketgames.qlearning",
        "description": "Watkins Q-learning on an MDP environment, error against the value-iteration oracle",
        "rounds": True,
        "environment": {**_MDP_KEYS, "horizon": Key(_pos_int, "an integer >= 1", 10)},
        "learner": {
            "schedule": _one_of("polynomial", "constant"),
            "omega": Key(lambda x: _num(x) and 0.5 < x <= 1.0, "a number in (0.5, 1]", 0.7),
            "alpha0": Key(lambda x: _num(x) and 0.0 <= x < 1.0, "a number in [0, 1)", 0.1),
            "epsilon0": Key(_prob, "a number in [0, 1]", 1.0),
            "epsilon_decay": Key(lambda x: _num(x) and 0.0 < x <= 1.0, "a number in (0, 1]", 0.99998),
            "epsilon_min": Key(_prob, "a number in [0, 1]", 0.05),
            "initial_q": Key(_num, "a finite number", 0.0),
        },
    },
    "kelly": {
        "module": "marketgames.kelly",
        "description": "bankroll growth under a fixed or online-estimated Kelly fraction",
        "rounds": True,
        "environment": {
            "win_probability": Key(_prob, "a number in [0, 1]", required=True),
            "payout_ratio": Key(_pos, "a positive number", 1.0),
        },
        "learner": {
            "rule": _one_of("fixed", "online"),
            "fraction": Key(_prob, "a number in [0, 1]", 0.0),
            "window": Key(lambda x: x is None or _pos_int(x), "null or an integer >= 1", None),
            "f_cap": Key(lambda x: _num(x) and 0.0 <= x < 1.0, "a number in [0, 1)", 0.99),
            "initial_capital": Key(_pos, "a positive number", 1.0),
        },
    },
    "mmm": {
        "module": "marketgames.mmm",
        "description": "withdrawal-price cycles: fixed point of the profit rate and simulated trading",
        "rounds": True,
        "environment": {
            "density": _one_of("gaussian", "uniform", "histogram", "regime"),
            "mu": Key(_num, "a finite number", 0.0),
            "sigma": Key(_pos, "a positive number", 1.0),
            "lo": Key(_num, "a finite number", -1.0),
            "hi": Key(_num, "a finite number", 1.0),
            "density_file": Key(lambda x: isinstance(x, str) and x != "", "a file path", None),
            "drifts": Key(lambda x: isinstance(x, list) and len(x) == 2 and all(map(_num, x)), "a list of two numbers", [0.1, -0.1]),
            "switch_prob": Key(_prob, "a number in [0, 1]", 0.01),
        },
        "learner": {
            "strategy": _one_of("optimal", "fixed", "adaptive"),
            "withdrawal": Key(_num, "a finite number", 0.0),
            "sale_probability": Key(lambda x: _num(x) and 0.0 < x <= 1.0, "a number in (0, 1]", 1.0),
            "proportional_cost": Key(_nonneg, "a nonnegative number", 0.0),
            "traded_value": Key(_pos, "a positive number", 2.0),
            "max_cycles": Key(lambda x: x is None or _pos_int(x), "null or an integer >= 1", None),
        },
    },
    "across-games": {
        "module": "marketgames.across_games",
        "description": "partition and action reinforcement over a set of games, with its mean-field ODE",
        "rounds": True,
        "environment": {
            "games": Key(lambda x: isinstance(x, list) and len(x) >= 1, "a nonempty list of games", required=True),
        },
        "learner": {
            "kappa": Key(_nonneg, "a nonnegative number", 0.0),
            "partition_temperature": Key(_pos, "a positive number", 100.0),
            "action_temperature": Key(_pos, "a positive number", 1.0),
            "candidates": _one_of("all", "extremes"),
            "initial_propensity": Key(_pos, "a positive number", 1.0),
            "initial_attraction": Key(_pos, "a positive number", 1.0),
            "tail_fraction": Key(lambda x: _num(x) and 0 < x <= 1, "a number in (0, 1]", 0.1),
            "ode_step": Key(_pos, "a positive number", 1.0),
        },
    },
}

_GAME_KEYS = {
    "payoffs": Key(_matrix(2), "a learner payoff matrix [action][opponent action]", required=True),
    "opponent": Key(lambda x: x is None or (isinstance(x, list) and all(map(_nonneg, x))), "a probability vector", None),
    "weight": Key(_nonneg, "a nonnegative number", None),
}

_TOP_KEYS = {"kind", "seeds", "output", "rounds", "record_every", "environment", "learner"}


@dataclass
class ExperimentConfig:
    kind: str
    seeds: list[int]
    output: Path
    rounds: int | None
    record_every: int
    environment: dict[str, Any]
    learner: dict[str, Any]
    source: Path | None = None
    lines: dict[str, int] = field(default_factory=dict, repr=False)


def _line_index(node, prefix="", out=None) -> dict[str, int]:
    """Map dotted key paths to 1-based source lines."""
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            path = f"{prefix}{k.value}"
            out[path] = k.start_mark.line + 1
            _line_index(v, path + ".", out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            path = f"{prefix[:-1]}[{i}]"
            out.setdefault(path, v.start_mark.line + 1)
            _line_index(v, path + ".", out)
    return out


def _section(raw, name, keys, lines, where):
    raw = {} if raw is None else raw
    if not isinstance(raw, dict):
        raise ConfigValueError(f"{where}: must be a mapping", lines.get(where))
    for k in raw:
        if k not in keys:
            raise ConfigValueError(f"{where}.{k}: unknown key", lines.get(f"{where}.{k}"))
    out = {}
    for k, spec in keys.items():
        path = f"{where}.{k}"
        if k not in raw:
            if spec.required:
                raise ConfigValueError(f"{path}: required key missing", lines.get(where))
            out[k] = spec.default
            continue
        if not spec.check(raw[k]):
            raise ConfigValueError(f"{path}: must be {spec.constraint}, got {raw[k]!r}", lines.get(path))
        out[k] = raw[k]
    return out


def _validate_domain(cfg: ExperimentConfig) -> None:
    """Build the domain objects once so their own checks fire before a run."""
    from . import across_games, kelly, mdp, mmm  # noqa: F401  (local to avoid import cycles)
    from .errors import InvalidInputError

    env, lrn, lines = cfg.environment, cfg.learner, cfg.lines

    def fail(key, msg):
        raise ConfigValueError(f"{key}: {msg}", lines.get(key))

    try:
        if cfg.kind in ("mdp-solve", "q-learning"):
            if (env["transition"] is None) != (env["reward"] is None):
                fail("environment", "give both transition and reward, or neither (random instance)")
            if env["transition"] is not None:
                mdp.TabularMDP(np.asarray(env["transition"], float), np.asarray(env["reward"], float), env["discount"])
        if cfg.kind == "q-learning" and lrn["epsilon_min"] > lrn["epsilon0"]:
            fail("learner.epsilon_min", "must not exceed learner.epsilon0")
        if cfg.kind == "kelly":
            if lrn["rule"] == "fixed" and lrn["fraction"] > lrn["f_cap"]:
                fail("learner.fraction", f"must be <= learner.f_cap ({lrn['f_cap']})")
        if cfg.kind == "mmm":
            if env["density"] == "uniform" and not env["lo"] < env["hi"]:
                fail("environment.lo", "must be < environment.hi")
            if env["density"] == "histogram":
                if env["density_file"] is None:
                    fail("environment.density_file", "required when density is histogram")
                path = Path(env["density_file"])
                if not path.is_absolute() and cfg.source is not None:
                    path = cfg.source.parent / path
                if not path.exists():
                    fail("environment.density_file", f"file not found: {path}")
                env["density_file"] = str(path)
                mmm.read_density_file(path)
        if cfg.kind == "across-games":
            games = env["games"]
            if len(games) > across_games.MAX_GAMES and lrn["candidates"] == "all":
                fail("environment.games", f"at most {across_games.MAX_GAMES} games with candidates: all")
            parsed = []
            for i, g in enumerate(games):
                where = f"environment.games[{i}]"
                parsed.append(_section(g, where, _GAME_KEYS, lines, where))
            n_act = {np.asarray(g["payoffs"]).shape[0] for g in parsed}
            if len(n_act) != 1:
                fail("environment.games", "all games need the same number of learner actions")
            weights = [g["weight"] for g in parsed]
            if any(w is None for w in weights) and any(w is not None for w in weights):
                fail("environment.games", "give a weight for every game or for none")
            if weights[0] is not None and abs(sum(weights) - 1.0) > 1e-12:
                fail("environment.games", "weights must sum to 1")
            for i, g in enumerate(parsed):
                cols = np.asarray(g["payoffs"]).shape[1]
                if g["opponent"] is not None and (len(g["opponent"]) != cols or abs(sum(g["opponent"]) - 1.0) > 1e-12):
                    fail(f"environment.games[{i}].opponent", f"must be a probability vector of length {cols}")
            env["games"] = parsed
    except InvalidInputError as exc:
        raise ConfigValueError(str(exc), lines.get("environment")) from exc


def parse_config(path, out: str | None = None) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigFileError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    try:
        raw = yaml.safe_load(text)
        node = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigSyntaxError(f"invalid YAML: {getattr(exc, 'problem', exc)}", mark.line + 1 if mark else None) from exc
    if not isinstance(raw, dict):
        raise ConfigSyntaxError("config must be a YAML mapping", 1)
    lines = _line_index(node)

    for k in raw:
        if k not in _TOP_KEYS:
            raise ConfigValueError(f"{k}: unknown key", lines.get(str(k)))
    kind = raw.get("kind")
    if kind not in EXPERIMENTS:
        raise ConfigValueError(f"kind: must be one of {', '.join(EXPERIMENTS)}, got {kind!r}", lines.get("kind"))
    spec = EXPERIMENTS[kind]

    seeds = raw.get("seeds")
    if not (isinstance(seeds, list) and len(seeds) >= 1 and all(_int(s) and s >= 0 for s in seeds)):
        raise ConfigValueError("seeds: must be a nonempty list of nonnegative integers", lines.get("seeds", 1))
    if len(set(seeds)) != len(seeds):
        raise ConfigValueError("seeds: duplicates are not allowed", lines.get("seeds"))

    output = out if out is not None else raw.get("output")
    if not isinstance(output, str) or not output:
        raise ConfigValueError("output: must be a file path (or pass --out)", lines.get("output", 1))
    output_path = Path(output)
    if out is None and not output_path.is_absolute():
        output_path = path.parent / output_path

    rounds = raw.get("rounds")
    if spec["rounds"]:
        if not _pos_int(rounds):
            raise ConfigValueError(f"rounds: must be an integer >= 1, got {rounds!r}", lines.get("rounds", 1))
    elif rounds is not None:
        raise ConfigValueError(f"rounds: not used by kind {kind}", lines.get("rounds"))

    default_every = 1000 if kind == "q-learning" else 1
    record_every = raw.get("record_every", default_every)
    if not _pos_int(record_every):
        raise ConfigValueError("record_every: must be an integer >= 1", lines.get("record_every"))

    env = _section(raw.get("environment"), "environment", spec["environment"], lines, "environment")
    lrn = _section(raw.get("learner"), "learner", spec["learner"], lines, "learner")
    cfg = ExperimentConfig(kind, list(seeds), output_path, rounds, record_every, env, lrn, path, lines)
    _validate_domain(cfg)
    return cfg
