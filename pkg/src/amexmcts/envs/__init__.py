from .base import Mdp, is_leaf_state, reachable_states, validate_rewards
from .chain import Chain, ChainLoop, ChainSpec
from .frozenlake import FrozenLake
from .synthetic import SyntheticTree

__all__ = [
    "Chain",
    "ChainLoop",
    "ChainSpec",
    "FrozenLake",
    "Mdp",
    "SyntheticTree",
    "is_leaf_state",
    "reachable_states",
    "validate_rewards",
]
