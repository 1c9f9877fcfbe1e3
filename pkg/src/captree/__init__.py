"""Capability trees over benchmark instances: build LM-annotated hierarchies,
score models at every node, extract statistically significant weakness and
strength profiles, and quantitatively compare profiling methods.
"""

from .clustering import ClusteringConfig, kmeans, select_clustering, silhouette
from .core import (
    ArenaRecord,
    CapabilityAnnotation,
    CaptreeError,
    ConfigurationError,
    Embedding,
    EvalResult,
    GroundTruthSpec,
    Instance,
    NodeMetric,
    ProfileItem,
    ProviderError,
    ValidationError,
    WeaknessProfile,
    load_dataset,
    load_eval_result,
    split_profiling_test,
    validate_dataset,
)
from .extraction import (
    ExtractionConfig,
    binomial_test_above,
    binomial_test_below,
    extract_nodes,
    profile_from_nodes,
    sweep_tau,
)
from .gateway import ChatRequest, LlmGateway, MockProvider, ProviderConfig, RemoteProvider, mock_gateway
from .metrics import BradleyTerryFit, annotate_metrics, fit_bradley_terry, rank_models_per_node
from .tree import CapabilityNode, CapabilityTree, build_tree, build_tree_hierarchical, describe_tree

__version__ = "0.1.0"

__all__ = [
    "ArenaRecord",
    "BradleyTerryFit",
    "CapabilityAnnotation",
    "CapabilityNode",
    "CapabilityTree",
    "CaptreeError",
    "ChatRequest",
    "ClusteringConfig",
    "ConfigurationError",
    "Embedding",
    "EvalResult",
    "ExtractionConfig",
    "GroundTruthSpec",
    "Instance",
    "LlmGateway",
    "MockProvider",
    "NodeMetric",
    "ProfileItem",
    "ProviderConfig",
    "ProviderError",
    "RemoteProvider",
    "ValidationError",
    "WeaknessProfile",
    "annotate_metrics",
    "binomial_test_above",
    "binomial_test_below",
    "build_tree",
    "build_tree_hierarchical",
    "describe_tree",
    "extract_nodes",
    "fit_bradley_terry",
    "kmeans",
    "load_dataset",
    "load_eval_result",
    "mock_gateway",
    "profile_from_nodes",
    "rank_models_per_node",
    "select_clustering",
    "silhouette",
    "split_profiling_test",
    "sweep_tau",
    "validate_dataset",
]
