import numpy as np
import pytest

from marketgames.mdp import TabularMDP


def chain_mdp():
    """s0 -> s1 -> s1, r(s0)=1, r(s1)=0, one action."""
    p = np.zeros((2, 1, 2))
    p[0, 0, 1] = 1.0
    p[1, 0, 1] = 1.0
    return TabularMDP(p, [[1.0], [0.0]], 0.9)


# the three small ergodic MDPs used by the Q-learning checks
def det2_mdp():
    return TabularMDP([[[1, 0], [0, 1]], [[1, 0], [0, 1]]], [[1.5, 0], [0, 2]], 0.5)


def sto2_mdp():
    return TabularMDP([[[0.7, 0.3], [0.2, 0.8]], [[0.6, 0.4], [0.1, 0.9]]], [[1, 0.25], [0, 0.5]], 0.5)


def sto3_mdp():
    return TabularMDP(
        [
            [[0.5, 0.3, 0.2], [0.1, 0.1, 0.8]],
            [[0.3, 0.4, 0.3], [0.6, 0.2, 0.2]],
            [[0.2, 0.2, 0.6], [0.4, 0.4, 0.2]],
        ],
        [[0.25, 0], [0.5, 0.1], [0, 0.75]],
        0.5,
    )


ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def acceptance_report(request):
    """Record one PASS/FAIL line per criterion; printed in the terminal summary
    and echoed to stdout (visible with -s)."""
    lines = request.config.stash[ACCEPTANCE_KEY]

    def report(name, ok, detail, seconds, limit=None):
        budget = "" if limit is None else f" (limit {limit:g} s)"
        line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}; {seconds:.1f} s{budget}"
        lines.append(line)
        print(line)

    return report


@pytest.fixture
def chain():
    return chain_mdp()


@pytest.fixture(params=["det2", "sto2", "sto3"])
def ergodic_mdp(request):
    return {"det2": det2_mdp, "sto2": sto2_mdp, "sto3": sto3_mdp}[request.param]()


# one small config per experiment kind, shared by the CLI and acceptance tests
SMALL_CONFIGS = {
    "mdp-solve": """\
kind: mdp-solve
seeds: [0, 1]
output: out.csv
environment:
  discount: 0.9
  n_states: 4
  n_actions: 3
""",
    "q-learning": """\
kind: q-learning
seeds: [0, 1]
output: out.csv
rounds: 300
record_every: 50
environment:
  discount: 0.5
  horizon: 5
  transition:
    - [[0.7, 0.3], [0.2, 0.8]]
    - [[0.6, 0.4], [0.1, 0.9]]
  reward: [[1.0, 0.25], [0.0, 0.5]]
learner:
  epsilon_decay: 0.99
""",
    "kelly": """\
kind: kelly
seeds: [0, 1, 2]
output: out.csv
rounds: 2000
record_every: 100
environment:
  win_probability: 0.6
learner:
  rule: online
  window: 500
""",
    "mmm": """\
kind: mmm
seeds: [0, 1]
output: out.csv
rounds: 5000
environment:
  density: regime
  switch_prob: 0.05
learner:
  strategy: adaptive
  proportional_cost: 0.01
""",
    "across-games": """\
kind: across-games
seeds: [0, 1]
output: out.csv
rounds: 3000
record_every: 10
environment:
  games:
    - payoffs: [[1, 0], [0, 1]]
      opponent: [0.25, 0.75]
    - payoffs: [[0, 0], [1, 1]]
learner:
  kappa: 0.1
  ode_step: 10
""",
}
