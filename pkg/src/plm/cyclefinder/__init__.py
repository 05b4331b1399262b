"""Constructive search for long alternating cycles in planted matching instances."""
from .cycles import (BLUE, RED, AlternatingCycle, VerifyReport, canonical_key, cycle_from_sequence,
                     dfs_long_cycle, flip_cycle, many_cycles, verify_alternating)
from .pipeline import (CycleFinderConfig, ConfigError, PipelineResult, default_thresholds, expand_cycle,
                       exponential_thresholds, find_cycles)
from .sprinkle import SuperGraph, blue_rate, hubs_disjoint, sprinkle
from .trees import Forest, PairGraph, TreeParams, TwoSidedTree, build_trees, check_disjoint, select_k1

__all__ = [
    "BLUE", "RED", "AlternatingCycle", "VerifyReport", "canonical_key", "cycle_from_sequence",
    "dfs_long_cycle", "flip_cycle", "many_cycles", "verify_alternating",
    "CycleFinderConfig", "ConfigError", "PipelineResult", "default_thresholds", "expand_cycle",
    "exponential_thresholds", "find_cycles",
    "SuperGraph", "blue_rate", "hubs_disjoint", "sprinkle",
    "Forest", "PairGraph", "TreeParams", "TwoSidedTree", "build_trees", "check_disjoint", "select_k1",
]
