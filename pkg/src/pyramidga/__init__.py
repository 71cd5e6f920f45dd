"""Hierarchical coevolutionary GA for constrained assignment problems.

Sub-populations evolve nested portions of a solution string under substitute
fitness measures and are merged upward by cross-level crossover; partner
selection for both recombination and evaluation is pluggable. Ships with two
problem models (nurse rostering, mall tenant selection), a local-search
refiner for rosters, and a seeded benchmark harness.
"""

from .engine import (
    ConfigurationError,
    GeneMask,
    Individual,
    InstanceError,
    PenaltyController,
    PopulationSpec,
    PyramidConfig,
    PyramidState,
    RunResult,
    SubPopulation,
    cross_level_crossover,
    generation_step,
    init_pyramid,
    mutate,
    rank_roulette_select,
    run,
    uniform_crossover,
    update_penalty,
)
from .partnering import (
    EvalStrategy,
    MatingStrategy,
    ToroidalGrid,
    evaluate_with_partners,
    grid_neighbors,
    joined_topology,
    select_mate,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "EvalStrategy",
    "GeneMask",
    "Individual",
    "InstanceError",
    "MatingStrategy",
    "PenaltyController",
    "PopulationSpec",
    "PyramidConfig",
    "PyramidState",
    "RunResult",
    "SubPopulation",
    "ToroidalGrid",
    "cross_level_crossover",
    "evaluate_with_partners",
    "generation_step",
    "grid_neighbors",
    "init_pyramid",
    "joined_topology",
    "mutate",
    "rank_roulette_select",
    "run",
    "select_mate",
    "uniform_crossover",
    "update_penalty",
]
