"""Final frequency of the finest partition as the reasoning cost grows, for
two identical games and for two games with different best replies.

    python3 scripts/cost_sweep.py [ROUNDS] [SEEDS]
"""

import sys

import numpy as np

from marketgames.across_games import AcrossGamesConfig, GameSet, OpponentModel, run_across_games
from marketgames.qlearning import MatrixGame

SCENARIOS = {
    "identical": [[[1, 1], [0, 0]], [[1, 1], [0, 0]]],
    "differing": [[[1, 1], [0, 0]], [[0, 0], [1, 1]]],
}
KAPPAS = [0.0, 0.05, 0.1, 0.2, 0.3, 0.5, 1.0]


def game_set(matrices):
    gs = GameSet(tuple(MatrixGame(np.stack([np.asarray(m, float), -np.asarray(m, float)])) for m in matrices))
    return gs, OpponentModel.uniform(gs)


def main(rounds: int = 20_000, seeds: int = 20) -> None:
    print("scenario    " + "".join(f"k={k:<7g}" for k in KAPPAS))
    for name, matrices in SCENARIOS.items():
        gs, opp = game_set(matrices)
        row = []
        for kappa in KAPPAS:
            cfg = AcrossGamesConfig(rounds=rounds, kappa=kappa, partition_temperature=100.0)
            row.append(np.mean([run_across_games(gs, opp, cfg, s).final_frequencies[-1] for s in range(seeds)]))
        print(f"{name:<12}" + "".join(f"{x:<9.3f}" for x in row))


if __name__ == "__main__":
    main(*(int(x) for x in sys.argv[1:3]))
