"""Learning procedures for market games on synthetic environments.

Submodules:

* ``mdp``          -- tabular MDPs, policy evaluation, value and policy iteration
* ``qlearning``    -- Watkins Q-learning and matrix-game equilibrium predicates
* ``kelly``        -- Kelly fractions, history estimates, bankroll simulation
* ``mmm``          -- withdrawal-price profit functional and its fixed point
* ``across_games`` -- partition/action reinforcement across a set of games
* ``environments`` -- random streams, bet/price/MDP environments, costs
* ``cli``          -- YAML-configured experiment runner
"""

__version__ = "0.1.0"
