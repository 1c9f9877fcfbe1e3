"""Per-node performance: accuracy / win-rate aggregation and pairwise-comparison
ratings (regularized Bradley-Terry, the rating model behind arena-style Elo).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .core import ArenaRecord, EvalResult, NodeMetric, ValidationError
from .tree import CapabilityTree


def annotate_metrics(tree: CapabilityTree, eval_result: EvalResult, model_name: str) -> CapabilityTree:
    """Attach successes/trials for ``model_name`` at every node.

    Binary results contribute one trial per instance; judged pairs contribute
    two (one per judged order), with the win count as successes.
    """
    if eval_result.kind not in ("binary", "judged_pair"):
        raise ValidationError("annotate_metrics needs a binary or judged_pair eval result")
    covered = eval_result.instance_ids()
    missing = set(tree.root.instance_ids) - covered
    if missing:
        raise ValidationError(f"eval result missing leaf instances: {sorted(missing)[:5]}")
    nodes = {}
    for node in tree.nodes.values():
        successes, trials = eval_result.success_trials(node.instance_ids)
        metrics = dict(node.metrics)
        metrics[model_name] = NodeMetric(kind=eval_result.kind, successes=successes, trials=trials)
        nodes[node.node_id] = dataclasses.replace(node, metrics=metrics)
    return CapabilityTree(root_id=tree.root_id, nodes=nodes, method=tree.method)


@dataclass
class BradleyTerryFit:
    ratings: dict[str, float]
    ranks: dict[str, int]
    iterations: int
    converged: bool
    regularization: float
    comparisons: int

    def rating_gap_probability(self, model_a: str, model_b: str) -> float:
        """Model probability that ``model_a`` beats ``model_b``."""
        gap = self.ratings[model_a] - self.ratings[model_b]
        return float(1.0 / (1.0 + np.exp(-gap)))


@dataclass
class BradleyTerryConfig:
    regularization: float = 0.01
    gradient_tolerance: float = 1e-8
    max_iterations: int = 1000


def fit_bradley_terry(
    records: list[ArenaRecord], config: BradleyTerryConfig | None = None
) -> BradleyTerryFit:
    """Maximum-likelihood ratings from pairwise records; ties count half a win each.

    The L2 penalty (toward zero) keeps undefeated models finite. Newton steps
    run until the gradient norm drops below tolerance; ratings are mean-centered
    and ranked by descending rating with name tie-breaks.
    """
    config = config or BradleyTerryConfig()
    if not records:
        raise ValidationError("cannot fit ratings from zero comparisons")
    models = sorted({r.model_a for r in records} | {r.model_b for r in records})
    index = {m: i for i, m in enumerate(models)}
    n = len(models)
    wins = np.zeros((n, n))  # wins[i, j] = times i beat j (ties split)
    for rec in records:
        a, b = index[rec.model_a], index[rec.model_b]
        if a == b:
            raise ValidationError(f"arena record compares {rec.model_a!r} with itself")
        if rec.winner == "a":
            wins[a, b] += 1.0
        elif rec.winner == "b":
            wins[b, a] += 1.0
        else:
            wins[a, b] += 0.5
            wins[b, a] += 0.5

    lam = config.regularization

    def objective(t: np.ndarray) -> float:
        gap = t[:, None] - t[None, :]
        # -log sigmoid(gap) computed stably
        return float((wins * np.logaddexp(0.0, -gap)).sum() + 0.5 * lam * (t**2).sum())

    def gradient(t: np.ndarray) -> np.ndarray:
        gap = t[:, None] - t[None, :]
        p = 1.0 / (1.0 + np.exp(-gap))  # p[i, j] = P[i beats j]
        return -((wins * (1.0 - p)).sum(axis=1) - (wins.T * p).sum(axis=1)) + lam * t

    theta = np.zeros(n)
    converged = False
    iterations = 0
    for iterations in range(1, config.max_iterations + 1):
        grad = gradient(theta)
        if float(np.linalg.norm(grad)) < config.gradient_tolerance:
            converged = True
            break
        gap = theta[:, None] - theta[None, :]
        p = 1.0 / (1.0 + np.exp(-gap))
        weight = (wins + wins.T) * p * (1.0 - p)
        hess = np.diag(weight.sum(axis=1) + lam) - weight
        step = np.linalg.solve(hess, grad)
        # damped Newton: halve until the penalized objective stops increasing
        base = objective(theta)
        scale = 1.0
        for _ in range(30):
            candidate = theta - scale * step
            if objective(candidate) <= base:
                break
            scale *= 0.5
        theta = theta - scale * step
    theta = theta - theta.mean()

    order = sorted(models, key=lambda m: (-theta[index[m]], m))
    ranks = {m: i + 1 for i, m in enumerate(order)}
    return BradleyTerryFit(
        ratings={m: float(theta[index[m]]) for m in models},
        ranks=ranks,
        iterations=iterations,
        converged=converged,
        regularization=lam,
        comparisons=len(records),
    )


DEFAULT_MIN_COMPARISONS = 20


def arena_counts(records: list[ArenaRecord]) -> dict[str, tuple[float, int]]:
    """Per-model (successes, trials) with ties counted half for each side."""
    counts: dict[str, tuple[float, int]] = {}
    for rec in records:
        for model, other_winner in ((rec.model_a, "b"), (rec.model_b, "a")):
            wins, total = counts.get(model, (0.0, 0))
            if rec.winner == "tie":
                wins += 0.5
            elif rec.winner != other_winner:
                wins += 1.0
            counts[model] = (wins, total + 1)
    return counts


def rank_models_per_node(
    tree: CapabilityTree,
    eval_result: EvalResult,
    min_comparisons: int = DEFAULT_MIN_COMPARISONS,
    config: BradleyTerryConfig | None = None,
) -> CapabilityTree:
    """Fit ratings at every node with enough linked comparisons; others stay unranked."""
    if eval_result.kind != "arena":
        raise ValidationError("per-node ranking needs arena records")
    by_instance: dict[str, list[ArenaRecord]] = {}
    for rec in eval_result.records:
        by_instance.setdefault(rec.instance_id, []).append(rec)
    nodes = {}
    for node in tree.nodes.values():
        records = [r for iid in node.instance_ids for r in by_instance.get(iid, ())]
        metrics = dict(node.metrics)
        if len(records) >= min_comparisons:
            fit = fit_bradley_terry(records, config)
            counts = arena_counts(records)
            for model, (successes, trials) in counts.items():
                metrics[model] = NodeMetric(
                    kind="arena",
                    successes=successes,
                    trials=trials,
                    rating=fit.ratings[model],
                    rank=fit.ranks[model],
                )
        nodes[node.node_id] = dataclasses.replace(node, metrics=metrics)
    return CapabilityTree(root_id=tree.root_id, nodes=nodes, method=tree.method)
