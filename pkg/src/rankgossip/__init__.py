"""Rank-based reward gossip games: simulation, limit theory and Nash search."""

from .reward import FiniteKReward, RewardSpec, eval_R, eval_rbar, reward_from_config
from .fpp import (
    EgoDeviation,
    RunResult,
    SpreadStats,
    StrategyProfile,
    Topology,
    ego_rank_distribution,
    percolate,
    percolate_regular,
    spread_stats,
)

__version__ = "0.1.0"
