"""Synchronous-round simulator for overlay construction protocols."""
from .core import (
    Batch,
    Channel,
    Engine,
    GossipReply,
    Hybrid,
    MetricsLedger,
    ModelConfig,
    RngStream,
    SimulationError,
)
from .expander import expander_degree_reduction
from .graphs import Graph, RootedTree, check_satisfactory, check_wft, generate, is_star
from .harness import ExperimentConfig, RunRecord, run_experiment
from .hybrid_wft import run_hybrid_wft
from .merge_star import run_merge_star, star_to_topology
from .sketch import find_outgoing, hp_test_out
from .treeops import deterministic_wft, rc2t

__version__ = "0.1.0"
