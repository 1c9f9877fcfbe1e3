from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest

from captree.core import NodeMetric, ValidationError
from captree.extraction import (
    ExtractionConfig,
    binomial_test_above,
    binomial_test_below,
    extract_nodes,
    profile_from_nodes,
    sweep_tau,
)
from captree.tree import CapabilityNode, CapabilityTree


# --- independent oracles ----------------------------------------------------


def exact_cdf(successes: int, trials: int, tau: Fraction) -> Fraction:
    """P[X <= successes] by direct exact summation (comb-based, no shortcuts)."""
    total = Fraction(0)
    for k in range(successes + 1):
        total += math.comb(trials, k) * tau**k * (1 - tau) ** (trials - k)
    return total


def reference_extract(tree, model, tau, alpha, min_node, min_child) -> set[str]:
    """Iterative re-statement of the two-pass extraction, scored by the
    Fraction oracle rather than the library's test."""
    significant = {}
    for node in tree.nodes.values():
        metric = node.metrics[model]
        p = exact_cdf(int(metric.successes), metric.trials, Fraction(tau).limit_denominator(10**6))
        significant[node.node_id] = p < Fraction(alpha).limit_denominator(10**6)
    chosen: set[str] = set()
    stack = [tree.root_id]
    while stack:
        node = tree.nodes[stack.pop()]
        gating = [
            c for c in node.children if tree.nodes[c].size >= min_child and not significant[c]
        ]
        if node.size >= min_node and significant[node.node_id] and not gating:
            chosen.add(node.node_id)
            continue
        stack.extend(node.children)
    return chosen


# --- tree fixtures ----------------------------------------------------------


_COUNTER = [0]


def fake_node(nodes, successes, size, children=(), depth=0):
    _COUNTER[0] += 1
    node_id = f"f{_COUNTER[0]:05d}"
    if children:
        instance_ids = tuple(sorted(i for c in children for i in nodes[c].instance_ids))
    else:
        instance_ids = tuple(f"{node_id}:{j}" for j in range(size))
    node = CapabilityNode(
        node_id=node_id,
        instance_ids=instance_ids,
        depth=depth,
        children=tuple(children),
        description=f"capability {node_id}",
        metrics={"m": NodeMetric(kind="binary", successes=successes, trials=len(instance_ids))},
    )
    nodes[node_id] = node
    return node_id


def random_metric_tree(rng: np.random.Generator, n_leaves: int, accuracy: float) -> CapabilityTree:
    """Random topology over synthetic leaves with Bernoulli leaf correctness."""
    nodes: dict[str, CapabilityNode] = {}

    def build(leaf_ids: list[str], depth: int) -> str:
        if len(leaf_ids) == 1:
            correct = int(rng.random() < accuracy)
            node_id = f"r{leaf_ids[0]}"
            nodes[node_id] = CapabilityNode(
                node_id=node_id,
                instance_ids=(leaf_ids[0],),
                depth=depth,
                description=f"leaf {leaf_ids[0]}",
                metrics={"m": NodeMetric(kind="binary", successes=correct, trials=1)},
            )
            return node_id
        n_groups = int(rng.integers(2, min(4, len(leaf_ids)) + 1))
        cuts = sorted(rng.choice(range(1, len(leaf_ids)), size=n_groups - 1, replace=False))
        groups = [leaf_ids[a:b] for a, b in zip([0] + cuts, cuts + [len(leaf_ids)])]
        children = [build(group, depth + 1) for group in groups]
        successes = sum(nodes[c].metrics["m"].successes for c in children)
        node_id = "p" + "-".join(c[-4:] for c in children)[:40] + str(len(nodes))
        nodes[node_id] = CapabilityNode(
            node_id=node_id,
            instance_ids=tuple(sorted(i for c in children for i in nodes[c].instance_ids)),
            depth=depth,
            children=tuple(children),
            description=f"group {node_id}",
            metrics={"m": NodeMetric(kind="binary", successes=successes, trials=len(leaf_ids))},
        )
        return node_id

    leaf_ids = [f"L{j:04d}" for j in range(n_leaves)]
    root = build(leaf_ids, 0)
    return CapabilityTree(root_id=root, nodes=nodes)


# --- binomial test ----------------------------------------------------------


class TestBinomialTest:
    def test_five_of_twenty_at_half(self):
        significant, p = binomial_test_below(5, 20, 0.5, alpha=0.05)
        assert significant
        # exact value: sum_{k<=5} C(20,k) / 2^20 = 21700 / 1048576
        assert p == pytest.approx(21700 / 1048576, abs=1e-12)
        assert p == pytest.approx(0.0207, abs=1e-4)

    def test_all_correct_is_never_below(self):
        significant, p = binomial_test_below(20, 20, 0.5)
        assert p == pytest.approx(1.0)
        assert not significant

    def test_single_trial_failure(self):
        significant, p = binomial_test_below(0, 1, 0.5, alpha=0.05)
        assert p == pytest.approx(0.5)
        assert not significant

    def test_tau_zero_never_significant_below(self):
        _, p = binomial_test_below(0, 50, 0.0)
        assert p == pytest.approx(1.0)

    def test_tau_one_degeneracy(self):
        # any miss makes the below-test certain; a perfect score never does
        assert binomial_test_below(49, 50, 1.0)[1] == pytest.approx(0.0)
        assert binomial_test_below(50, 50, 1.0)[1] == pytest.approx(1.0)

    def test_above_direction_mirrors(self):
        significant, p = binomial_test_above(15, 20, 0.5, alpha=0.05)
        assert significant
        assert p == pytest.approx(float(1 - exact_cdf(14, 20, Fraction(1, 2))), abs=1e-12)

    def test_domain_violations(self):
        with pytest.raises(ValidationError):
            binomial_test_below(5, 0, 0.5)
        with pytest.raises(ValidationError):
            binomial_test_below(6, 5, 0.5)
        with pytest.raises(ValidationError):
            binomial_test_below(1, 5, 1.5)

    @pytest.mark.parametrize("trials", [1, 3, 7, 20, 60, 137])
    def test_matches_exact_fraction_oracle(self, trials):
        for tau_tenths in range(1, 10):
            tau = Fraction(tau_tenths, 10)
            for successes in range(trials + 1):
                _, p = binomial_test_below(successes, trials, tau_tenths / 10)
                assert abs(p - float(exact_cdf(successes, trials, tau))) < 1e-12


# --- extraction -------------------------------------------------------------


class TestExtractNodes:
    @staticmethod
    def seven_node_tree():
        """Root is significant but gated by a healthy large child; the weak
        child's subtree is the only extraction."""
        nodes = {}
        a1 = fake_node(nodes, successes=14, size=15)
        a2 = fake_node(nodes, successes=11, size=15)
        child_a = fake_node(nodes, successes=25, size=30, children=(a1, a2))
        b1 = fake_node(nodes, successes=4, size=25)
        b2 = fake_node(nodes, successes=1, size=5)
        child_b = fake_node(nodes, successes=5, size=30, children=(b1, b2))
        root = fake_node(nodes, successes=30, size=60, children=(child_a, child_b))
        return CapabilityTree(root_id=root, nodes=nodes), child_b

    def test_hand_traced_seven_node_tree(self):
        tree, child_b = self.seven_node_tree()
        config = ExtractionConfig(tau=0.5, alpha=0.05, min_node_size=5, min_child_size=20)
        assert extract_nodes(tree, "m", config) == [child_b]

    def test_tau_zero_extracts_nothing(self):
        tree, _ = self.seven_node_tree()
        config = ExtractionConfig(tau=0.0)
        assert extract_nodes(tree, "m", config) == []

    def test_tau_one_extracts_near_root_when_errors_exist(self):
        tree, _ = self.seven_node_tree()
        config = ExtractionConfig(tau=1.0)
        extracted = extract_nodes(tree, "m", config)
        # every node with a miss and >= 5 instances is certain at tau=1,
        # so extraction happens at the root and covers everything below
        assert extracted == [tree.root_id]

    def test_missing_metrics_rejected(self):
        tree, _ = self.seven_node_tree()
        with pytest.raises(ValidationError):
            extract_nodes(tree, "other-model", ExtractionConfig(tau=0.5))

    @pytest.mark.parametrize("accuracy", [0.2, 0.5, 0.8])
    def test_matches_independent_reference_on_random_trees(self, accuracy):
        rng = np.random.default_rng(hash(accuracy) % 2**32)
        for trial in range(40):
            n_leaves = int(rng.integers(2, 101))
            tree = random_metric_tree(rng, n_leaves, accuracy)
            tau = float(rng.integers(0, 101)) / 100
            config = ExtractionConfig(tau=tau)
            got = set(extract_nodes(tree, "m", config))
            want = reference_extract(tree, "m", tau, 0.05, 5, 20)
            assert got == want

    def test_extracted_sets_are_antichains(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            tree = random_metric_tree(rng, int(rng.integers(5, 80)), 0.4)
            extracted = set(extract_nodes(tree, "m", ExtractionConfig(tau=0.6)))
            for node_id in extracted:
                assert not any(a in extracted for a in tree.ancestors(node_id))


class TestSweep:
    def test_zero_only_grid_gives_single_empty_profile(self):
        tree, _ = TestExtractNodes.seven_node_tree()
        profiles = sweep_tau(tree, "m", grid=[0.0])
        assert len(profiles) == 1
        assert profiles[0].items == []
        assert profiles[0].tau == 0.0

    def test_duplicate_extractions_keep_lowest_tau(self):
        tree, child_b = TestExtractNodes.seven_node_tree()
        profiles = sweep_tau(tree, "m", grid=[0.5, 0.51])
        by_nodes = {tuple(p.node_ids()): p.tau for p in profiles}
        if (child_b,) in by_nodes:
            assert by_nodes[(child_b,)] == 0.5

    def test_coverage_monotone_in_tau(self):
        rng = np.random.default_rng(23)
        for _ in range(15):
            tree = random_metric_tree(rng, int(rng.integers(10, 90)), 0.5)
            previous: set[str] = set()
            for tau in [i / 20 for i in range(21)]:
                extracted = extract_nodes(tree, "m", ExtractionConfig(tau=tau))
                covered = {i for nid in extracted for i in tree.nodes[nid].instance_ids}
                assert previous <= covered
                previous = covered

    def test_profiles_are_distinct_node_sets(self):
        tree, _ = TestExtractNodes.seven_node_tree()
        profiles = sweep_tau(tree, "m")
        sets = [tuple(p.node_ids()) for p in profiles]
        assert len(sets) == len(set(sets))


class TestProfileFromNodes:
    def test_empty_list_gives_empty_profile(self):
        tree, _ = TestExtractNodes.seven_node_tree()
        profile = profile_from_nodes(tree, [], tau=0.3)
        assert profile.items == []
        assert profile.method == "tree"

    def test_descriptions_kept_verbatim(self):
        tree, child_b = TestExtractNodes.seven_node_tree()
        sibling = tree.nodes[tree.root_id].children[0]
        profile = profile_from_nodes(tree, [child_b, sibling], tau=0.4)
        descriptions = {item.description for item in profile.items}
        assert descriptions == {tree.nodes[child_b].description, tree.nodes[sibling].description}

    def test_ancestor_pair_rejected(self):
        tree, child_b = TestExtractNodes.seven_node_tree()
        descendant = tree.nodes[child_b].children[0]
        with pytest.raises(ValidationError):
            profile_from_nodes(tree, [child_b, descendant], tau=0.4)

    def test_undescribed_node_rejected(self):
        tree, child_b = TestExtractNodes.seven_node_tree()
        tree.nodes[child_b].description = ""
        with pytest.raises(ValidationError):
            profile_from_nodes(tree, [child_b], tau=0.4)
