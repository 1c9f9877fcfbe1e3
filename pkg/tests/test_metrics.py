from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from captree.clustering import ClusteringConfig
from captree.core import ArenaRecord, Embedding, EvalResult, ValidationError
from captree.metrics import (
    BradleyTerryConfig,
    annotate_metrics,
    arena_counts,
    fit_bradley_terry,
    rank_models_per_node,
)
from captree.tree import build_tree

from conftest import make_instances, random_unit_vectors


def small_tree(n=12, seed=0):
    instances = make_instances(n)
    matrix = random_unit_vectors(n, 6, seed=seed)
    embeddings = [Embedding(inst.id, row, "t") for inst, row in zip(instances, matrix)]
    return instances, build_tree(instances, embeddings, ClusteringConfig(seed=seed, restarts=2))


class TestAnnotateMetrics:
    def test_binary_arithmetic(self):
        instances, tree = small_tree(4)
        result = EvalResult(
            kind="binary",
            per_instance={instances[0].id: 1, instances[1].id: 1, instances[2].id: 0, instances[3].id: 1},
        )
        tree = annotate_metrics(tree, result, "m")
        metric = tree.root.metrics["m"]
        assert (metric.successes, metric.trials) == (3, 4)
        assert metric.value == pytest.approx(0.75)

    def test_judged_pair_doubles_trials(self):
        instances, tree = small_tree(3)
        result = EvalResult(
            kind="judged_pair",
            per_instance={instances[0].id: 2, instances[1].id: 0, instances[2].id: 1},
        )
        tree = annotate_metrics(tree, result, "m")
        metric = tree.root.metrics["m"]
        assert (metric.successes, metric.trials) == (3, 6)
        assert metric.value == pytest.approx(0.5)

    def test_root_value_is_whole_set_accuracy(self):
        instances, tree = small_tree(20, seed=3)
        correct = {inst.id for i, inst in enumerate(instances) if i % 3 == 0}
        result = EvalResult(kind="binary", per_instance={i.id: int(i.id in correct) for i in instances})
        tree = annotate_metrics(tree, result, "m")
        assert tree.root.metrics["m"].value == pytest.approx(len(correct) / len(instances))

    @given(seed=st.integers(min_value=0, max_value=50))
    @settings(max_examples=10)
    def test_counts_are_additive_parent_equals_children(self, seed):
        instances, tree = small_tree(25, seed=seed)
        rng = np.random.default_rng(seed)
        result = EvalResult(
            kind="binary", per_instance={inst.id: int(rng.random() < 0.5) for inst in instances}
        )
        tree = annotate_metrics(tree, result, "m")
        for node in tree.nodes.values():
            if node.is_leaf:
                continue
            child_s = sum(tree.node(c).metrics["m"].successes for c in node.children)
            child_t = sum(tree.node(c).metrics["m"].trials for c in node.children)
            assert (child_s, child_t) == (node.metrics["m"].successes, node.metrics["m"].trials)

    def test_missing_instance_result_rejected(self):
        instances, tree = small_tree(3)
        result = EvalResult(kind="binary", per_instance={instances[0].id: 1})
        with pytest.raises(ValidationError):
            annotate_metrics(tree, result, "m")

    def test_arena_kind_rejected(self):
        _, tree = small_tree(3)
        with pytest.raises(ValidationError):
            annotate_metrics(tree, EvalResult(kind="arena", records=[]), "m")


def records(pairs: list[tuple[str, str, str]], instance_id="x") -> list[ArenaRecord]:
    return [ArenaRecord(instance_id, a, b, w) for a, b, w in pairs]


class TestBradleyTerry:
    def test_two_model_three_of_four(self):
        fit = fit_bradley_terry(
            records([("A", "B", "a"), ("A", "B", "a"), ("A", "B", "a"), ("A", "B", "b")])
        )
        assert fit.converged
        assert fit.ratings["A"] > fit.ratings["B"]
        assert fit.rating_gap_probability("A", "B") == pytest.approx(0.75, abs=0.02)
        # unregularized optimum has gap log(3); the penalty shrinks it slightly
        gap = fit.ratings["A"] - fit.ratings["B"]
        assert gap == pytest.approx(math.log(3), abs=0.05)
        assert gap < math.log(3)

    def test_symmetric_records_give_zero_ratings(self):
        fit = fit_bradley_terry(
            records([("A", "B", "a"), ("A", "B", "b"), ("B", "C", "a"), ("B", "C", "b"),
                     ("A", "C", "a"), ("A", "C", "b")])
        )
        for rating in fit.ratings.values():
            assert abs(rating) < 1e-6

    def test_ten_zero_chain_ranks_transitively(self):
        chain = records([("A", "B", "a")] * 10 + [("B", "C", "a")] * 10)
        fit = fit_bradley_terry(chain)
        assert [m for m, _ in sorted(fit.ranks.items(), key=lambda kv: kv[1])] == ["A", "B", "C"]

        # brute-force grid oracle over mean-centered rating pairs
        lam = fit.regularization

        def penalized_nll(theta):
            total = 0.5 * lam * sum(t * t for t in theta.values())
            for rec in chain:
                gap = theta[rec.model_a] - theta[rec.model_b]
                total += math.log1p(math.exp(-gap))
            return total

        fitted = penalized_nll(fit.ratings)
        grid = np.linspace(-6, 6, 41)
        for ta, tb in itertools.product(grid, grid):
            theta = {"A": ta, "B": tb, "C": -ta - tb}
            assert fitted <= penalized_nll(theta) + 1e-6

    def test_duplication_preserves_ranking(self):
        base = records(
            [("A", "B", "a"), ("A", "B", "a"), ("B", "C", "a"), ("C", "A", "tie"), ("B", "C", "b")]
        )
        once = fit_bradley_terry(base)
        twice = fit_bradley_terry(base + base)
        assert once.ranks == twice.ranks

    def test_ties_count_half_each(self):
        fit = fit_bradley_terry(records([("A", "B", "tie")] * 8))
        assert fit.ratings["A"] == pytest.approx(fit.ratings["B"], abs=1e-9)

    def test_empty_records_rejected(self):
        with pytest.raises(ValidationError):
            fit_bradley_terry([])

    def test_mean_centered(self):
        fit = fit_bradley_terry(records([("A", "B", "a")] * 3 + [("B", "C", "a")] * 2))
        assert sum(fit.ratings.values()) == pytest.approx(0.0, abs=1e-9)


class TestArenaCounts:
    def test_ties_split_between_sides(self):
        counts = arena_counts(records([("A", "B", "tie"), ("A", "B", "a")]))
        assert counts["A"] == (1.5, 2)
        assert counts["B"] == (0.5, 2)


class TestRankModelsPerNode:
    @staticmethod
    def arena_tree():
        instances, tree = small_tree(30, seed=7)
        group_a = {inst.id for inst in instances[:15]}
        recs = []
        for inst in instances:
            if inst.id in group_a:
                recs.extend(records([("A", "B", "a")] * 2, instance_id=inst.id))
            else:
                recs.extend(records([("A", "B", "b")] * 2, instance_id=inst.id))
        return instances, tree, EvalResult(kind="arena", records=recs), group_a

    def test_root_ranking_is_global_fit(self):
        _, tree, result, _ = self.arena_tree()
        ranked = rank_models_per_node(tree, result, min_comparisons=1)
        global_fit = fit_bradley_terry(result.records)
        root = ranked.root
        assert root.metrics["A"].rank == global_fit.ranks["A"]
        assert root.metrics["B"].rank == global_fit.ranks["B"]

    def test_local_records_dominate_node_ranking(self):
        instances, tree, result, group_a = self.arena_tree()
        ranked = rank_models_per_node(tree, result, min_comparisons=1)
        for node in ranked.nodes.values():
            ids = set(node.instance_ids)
            if ids <= group_a and node.metrics:
                assert node.metrics["A"].rank == 1  # A wins every local comparison

    def test_small_nodes_left_unranked(self):
        _, tree, result, _ = self.arena_tree()
        ranked = rank_models_per_node(tree, result, min_comparisons=20)
        for node in ranked.nodes.values():
            ids = set(node.instance_ids)
            n_records = sum(1 for r in result.records if r.instance_id in ids)
            if n_records < 20:
                assert not node.metrics
            else:
                assert node.metrics["A"].rank is not None
