"""Deconfounded sequential decision-making toolkit (python surface)."""

from ._drl import (
    Model,
    causal_query,
    generate_sequences,
    oracle_conditional_reward,
    oracle_do_reward,
    oracle_do_reward_mc,
)

__all__ = [
    "Model",
    "causal_query",
    "generate_sequences",
    "oracle_conditional_reward",
    "oracle_do_reward",
    "oracle_do_reward_mc",
]
