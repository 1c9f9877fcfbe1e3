"""Weakness/strength extraction: an exact one-sided binomial test at every
node, then a root-to-leaf pass that keeps a node only when it and all of its
sufficiently large children are significant. Extracted sets are antichains:
traversal skips the subtree below every extracted node, so no instance is
covered twice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import binom

from .core import ProfileItem, ValidationError, WeaknessProfile
from .tree import CapabilityTree

DEFAULT_ALPHA = 0.05
DEFAULT_MIN_NODE_SIZE = 5  # minimum instances for a node to be extractable
DEFAULT_MIN_CHILD_SIZE = 20  # minimum instances for a child to gate its parent


@dataclass
class ExtractionConfig:
    tau: float
    alpha: float = DEFAULT_ALPHA
    min_node_size: int = DEFAULT_MIN_NODE_SIZE
    min_child_size: int = DEFAULT_MIN_CHILD_SIZE
    direction: str = "below"

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise ValidationError(f"tau {self.tau} outside [0, 1]")
        if not 0.0 < self.alpha < 1.0:
            raise ValidationError(f"alpha {self.alpha} outside (0, 1)")
        if self.min_node_size < 1 or self.min_child_size < 1:
            raise ValidationError("size thresholds must be >= 1")
        if self.direction not in ("below", "above"):
            raise ValidationError(f"direction must be 'below' or 'above', got {self.direction!r}")


def binomial_test_below(successes: float, trials: int, tau: float, alpha: float = DEFAULT_ALPHA) -> tuple[bool, float]:
    """Exact one-sided test of success rate < tau: p = P[X <= successes].

    Fractional success counts (ties in arena win counts) are floored, the
    conservative choice for a 'below' test.
    """
    p_value = _one_sided_p(successes, trials, tau, "below")
    return p_value < alpha, p_value


def binomial_test_above(successes: float, trials: int, tau: float, alpha: float = DEFAULT_ALPHA) -> tuple[bool, float]:
    """Exact one-sided test of success rate > tau: p = P[X >= successes]."""
    p_value = _one_sided_p(successes, trials, tau, "above")
    return p_value < alpha, p_value


def _one_sided_p(successes: float, trials: int, tau: float, direction: str) -> float:
    if trials < 1:
        raise ValidationError("binomial test needs at least one trial")
    if not 0 <= successes <= trials:
        raise ValidationError(f"successes {successes} outside 0..{trials}")
    if not 0.0 <= tau <= 1.0:
        raise ValidationError(f"tau {tau} outside [0, 1]")
    if direction == "below":
        return float(binom.cdf(math.floor(successes), trials, tau))
    return float(binom.sf(math.ceil(successes) - 1, trials, tau))


def _collect_counts(tree: CapabilityTree, model_name: str) -> tuple[list[str], np.ndarray, np.ndarray]:
    node_ids, successes, trials = [], [], []
    for node in tree.nodes.values():
        metric = node.metrics.get(model_name)
        if metric is None:
            raise ValidationError(f"node {node.node_id} lacks metrics for model {model_name!r}")
        node_ids.append(node.node_id)
        successes.append(metric.successes)
        trials.append(metric.trials)
    return node_ids, np.asarray(successes, dtype=float), np.asarray(trials, dtype=int)


def _significance_map(
    node_ids: list[str], successes: np.ndarray, trials: np.ndarray, config: ExtractionConfig
) -> dict[str, bool]:
    if (trials < 1).any():
        raise ValidationError("every node needs at least one trial")
    if config.direction == "below":
        p_values = binom.cdf(np.floor(successes), trials, config.tau)
    else:
        p_values = binom.sf(np.ceil(successes) - 1, trials, config.tau)
    flags = p_values < config.alpha
    return {nid: bool(flag) for nid, flag in zip(node_ids, flags)}


def _traverse_extract(tree: CapabilityTree, significant: dict[str, bool], config: ExtractionConfig) -> list[str]:
    extracted: list[str] = []
    stack = [tree.root_id]
    while stack:
        node = tree.nodes[stack.pop()]
        if node.size >= config.min_node_size and significant[node.node_id]:
            all_children_pass = all(
                significant[child]
                for child in node.children
                if tree.nodes[child].size >= config.min_child_size
            )
            if all_children_pass:
                extracted.append(node.node_id)
                continue  # skip the subtree: extracted nodes never overlap
        stack.extend(node.children)
    return sorted(extracted)


def extract_nodes(tree: CapabilityTree, model_name: str, config: ExtractionConfig) -> list[str]:
    """Two-pass extraction; returns extracted node ids in sorted order."""
    node_ids, successes, trials = _collect_counts(tree, model_name)
    significant = _significance_map(node_ids, successes, trials, config)
    return _traverse_extract(tree, significant, config)


def profile_from_nodes(
    tree: CapabilityTree,
    node_ids: list[str],
    tau: float | None,
    direction: str = "weakness",
) -> WeaknessProfile:
    """Materialize a profile from extracted nodes, verifying the antichain guard."""
    ordered = sorted(node_ids)
    id_set = set(ordered)
    for node_id in ordered:
        if node_id not in tree.nodes:
            raise ValidationError(f"unknown node id {node_id!r}")
        if any(anc in id_set for anc in tree.ancestors(node_id)):
            raise ValidationError(f"node {node_id} has an extracted ancestor; sets must not overlap")
    items = []
    for node_id in ordered:
        node = tree.nodes[node_id]
        if not node.description:
            raise ValidationError(f"node {node_id} has no description")
        items.append(ProfileItem(description=node.description, source=node_id))
    return WeaknessProfile(items=items, method="tree", direction=direction, tau=tau)


DEFAULT_TAU_GRID = [i / 100 for i in range(101)]


def sweep_tau(
    tree: CapabilityTree,
    model_name: str,
    grid: list[float] | None = None,
    alpha: float = DEFAULT_ALPHA,
    min_node_size: int = DEFAULT_MIN_NODE_SIZE,
    min_child_size: int = DEFAULT_MIN_CHILD_SIZE,
    direction: str = "below",
) -> list[WeaknessProfile]:
    """Extract at every grid threshold, keep each distinct node set once.

    A profile produced by several thresholds is tagged with the lowest one.
    Profiles come back ordered by that threshold.
    """
    grid = DEFAULT_TAU_GRID if grid is None else sorted(grid)
    all_ids, successes, trials = _collect_counts(tree, model_name)
    seen: dict[frozenset[str], float] = {}
    for tau in grid:
        config = ExtractionConfig(
            tau=tau,
            alpha=alpha,
            min_node_size=min_node_size,
            min_child_size=min_child_size,
            direction=direction,
        )
        significant = _significance_map(all_ids, successes, trials, config)
        node_ids = frozenset(_traverse_extract(tree, significant, config))
        if node_ids not in seen:
            seen[node_ids] = tau
    profile_direction = "weakness" if direction == "below" else "strength"
    profiles = [
        profile_from_nodes(tree, sorted(node_ids), tau, profile_direction)
        for node_ids, tau in seen.items()
    ]
    profiles.sort(key=lambda p: p.tau)
    return profiles
