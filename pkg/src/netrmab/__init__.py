"""netrmab: restless multi-armed bandits with network-mediated low-cost
interventions. Provides two-state arm models, Whittle index computation, a
graph-aware budget allocation heuristic with comparison policies, and a
seeded simulation harness.
"""

from ._backend import HAVE_COMPILED, backend_name
from .core import (
    MESSAGE,
    NOACT,
    PULL,
    PULL_COST_MILLI,
    ArmModel,
    Cohort,
    CostModel,
    sample_arm,
    sample_cohort,
    validate_structural,
)
from .graph import (
    DUMMY,
    ArmVertexMapping,
    AugmentedGraph,
    DiGraph,
    construct_augmented,
    map_by_cluster,
    map_random,
    sbm_generate,
    uniform_block_sizes,
)
from .greta import greta_step
from .policies import POLICY_NAMES, make_policy
from .whittle import WhittleTable, build_table, whittle_index

__version__ = "0.1.0"

__all__ = [
    "ArmModel",
    "ArmVertexMapping",
    "AugmentedGraph",
    "Cohort",
    "CostModel",
    "DUMMY",
    "DiGraph",
    "HAVE_COMPILED",
    "MESSAGE",
    "NOACT",
    "POLICY_NAMES",
    "PULL",
    "PULL_COST_MILLI",
    "WhittleTable",
    "backend_name",
    "build_table",
    "construct_augmented",
    "greta_step",
    "make_policy",
    "map_by_cluster",
    "map_random",
    "sample_arm",
    "sample_cohort",
    "sbm_generate",
    "uniform_block_sizes",
    "validate_structural",
    "whittle_index",
]
