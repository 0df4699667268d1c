"""Restless-bandit beam scheduling for tracking smart targets.

Library layout:

- ``scenario``: problem instances (dynamics modes, mode-switch probabilities,
  measurement models) with validation and JSON round trip.
- ``tec``: deterministic tracking-error-covariance propagation and costs.
- ``index``: threshold-policy metrics, the MP priority index, baselines.
- ``policy``: top-K beam assignment from per-target indices.
- ``bound``: Lagrangian dual lower bound via grid value iteration.
- ``sim``: seeded episodes and the Monte Carlo experiment harness.
- ``pcl``: numerical probes of the index construction's preconditions.
- ``cli``: command-line front end with bundled experiment presets.
"""

from .scenario import (
    DynamicsMode,
    MeasurementModel,
    ModeProbabilityMatrix,
    ScenarioSpec,
    TargetSpec,
    load_scenario,
    save_scenario,
    validate,
)
from .index import IndexTable, build_index_table, mp_index, myopic_index, tec_index
from .policy import PolicyKind, decide, select
from .sim import monte_carlo, run_episode, suboptimality_gap
from .bound import dual_search, value_iterate

__version__ = "0.1.0"

__all__ = [
    "DynamicsMode",
    "MeasurementModel",
    "ModeProbabilityMatrix",
    "ScenarioSpec",
    "TargetSpec",
    "load_scenario",
    "save_scenario",
    "validate",
    "IndexTable",
    "build_index_table",
    "mp_index",
    "myopic_index",
    "tec_index",
    "PolicyKind",
    "decide",
    "select",
    "monte_carlo",
    "run_episode",
    "suboptimality_gap",
    "dual_search",
    "value_iterate",
    "__version__",
]
