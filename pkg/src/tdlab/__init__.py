"""Finite-MDP laboratory for approximate TD, Dirichlet forms and reversible policies."""

from tdlab.errors import (
    DimensionError,
    InputError,
    NotReversibleError,
    ReducibleChainError,
    TdlabError,
)
from tdlab.mdp import Chain, Mdp, PolicyTable, induced_chain, expected_reward_vector

__version__ = "0.1.0"

__all__ = [
    "Chain",
    "DimensionError",
    "InputError",
    "Mdp",
    "NotReversibleError",
    "PolicyTable",
    "ReducibleChainError",
    "TdlabError",
    "expected_reward_vector",
    "induced_chain",
]
