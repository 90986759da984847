from .topology import EgoDeviation, StrategyProfile, Topology, torus_shells
from .engine import (
    PathBatch,
    RunResult,
    SpreadStats,
    ego_free_paths,
    ego_rank_distribution,
    percolate,
    percolate_regular,
    spread_stats,
)

__all__ = [
    "EgoDeviation",
    "StrategyProfile",
    "Topology",
    "torus_shells",
    "PathBatch",
    "RunResult",
    "SpreadStats",
    "ego_free_paths",
    "ego_rank_distribution",
    "percolate",
    "percolate_regular",
    "spread_stats",
]
