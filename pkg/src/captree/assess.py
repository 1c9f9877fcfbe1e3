"""Assessment instruments for comparing weakness-profiling methods:
LM-judged associated instances, low-performance identification curves,
synthetic evaluation results with planted weaknesses, precision/recall/F1
against the planted profile, test-instance placement by centroid descent,
and weakness-guided data-input generation.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

import numpy as np

from .core import (
    EvalResult,
    GroundTruthSpec,
    Instance,
    ValidationError,
    WeaknessProfile,
    stable_hash_int,
)
from .gateway import ChatRequest, LlmGateway
from .prompts import ASSOCIATION_TEMPLATES, INPUT_GENERATION_TEMPLATES, template_for
from .tree import CapabilityTree

IN_CONTEXT_EXAMPLES = 5


@dataclass
class AssociationIndex:
    """capability description -> ids of test-set instances judged to test it."""

    capabilities: dict[str, frozenset[str]] = field(default_factory=dict)
    judge_model: str = ""
    prompt_version: str = ""

    def of(self, capability: str) -> frozenset[str]:
        try:
            return self.capabilities[capability]
        except KeyError:
            raise ValidationError(f"no associated-instance set for capability {capability!r}") from None

    def union(self, capabilities: list[str]) -> frozenset[str]:
        out: frozenset[str] = frozenset()
        for cap in capabilities:
            out = out | self.of(cap)
        return out

    def to_json(self) -> dict:
        return {
            "judge_model": self.judge_model,
            "prompt_version": self.prompt_version,
            "capabilities": {c: sorted(ids) for c, ids in sorted(self.capabilities.items())},
        }

    @classmethod
    def from_json(cls, obj: dict) -> "AssociationIndex":
        return cls(
            capabilities={c: frozenset(ids) for c, ids in obj["capabilities"].items()},
            judge_model=obj.get("judge_model", ""),
            prompt_version=obj.get("prompt_version", ""),
        )


def _is_yes(reply: str) -> bool:
    return reply.strip().upper().rstrip(".").strip() == "YES"


def associated_instances(
    capability: str, test_instances: list[Instance], gateway: LlmGateway
) -> frozenset[str]:
    """One YES/NO judgment per instance; anything but YES means not associated."""
    requests = []
    for inst in test_instances:
        template = template_for(ASSOCIATION_TEMPLATES, inst.benchmark_family, "association")
        system, user = template.render(
            input=inst.input, output=inst.reference_output, capability=capability
        )
        requests.append(
            ChatRequest(
                system_prompt=system,
                user_prompt=user,
                max_new_tokens=template.max_new_tokens,
                temperature=template.temperature,
                model=gateway.config.chat_model,
            )
        )
    replies = gateway.chat_many(requests)
    return frozenset(
        inst.id for inst, reply in zip(test_instances, replies) if _is_yes(str(reply))
    )


def build_association_index(
    capabilities: list[str], test_instances: list[Instance], gateway: LlmGateway
) -> AssociationIndex:
    index = AssociationIndex(
        judge_model=gateway.config.chat_model, prompt_version=gateway.config.prompt_version
    )
    for cap in dict.fromkeys(capabilities):  # preserve order, drop duplicates
        index.capabilities[cap] = associated_instances(cap, test_instances, gateway)
    return index


# ---------------------------------------------------------------------------
# Low-performance identification curves
# ---------------------------------------------------------------------------


@dataclass
class CurvePoint:
    x: int
    y: float


def performance_over(ids: frozenset[str] | set[str], f: EvalResult) -> float:
    """F(S): mean per-instance performance over an instance-id set."""
    if not ids:
        raise ValidationError("F(S) is undefined for an empty set")
    return sum(f.value_of(i) for i in ids) / len(ids)


def _profile_mean_weakness_performance(profile: WeaknessProfile, f: EvalResult, index: AssociationIndex) -> float | None:
    # Weaknesses with no associated instances contribute nothing and shrink
    # the divisor; a profile where every set is empty has no defined value.
    values = []
    for desc in profile.descriptions():
        ids = index.of(desc)
        if ids:
            values.append(performance_over(ids, f))
    if not values:
        return None
    return sum(values) / len(values)


def low_performance_curves(
    profiles: list[WeaknessProfile],
    f: EvalResult,
    index: AssociationIndex,
    max_profile_size: int = 20,
    max_covered: int | None = None,
) -> tuple[list[CurvePoint], list[CurvePoint]]:
    """Two minimization curves over the swept profiles.

    Curve 1: x = minimum profile size M', y = lowest mean performance across
    identified weaknesses among profiles of size >= M'.
    Curve 2: x = minimum covered-instance count N', y = lowest F over the
    union of associated instances among profiles covering >= N' instances.
    Points with no qualifying profile are omitted.
    """
    per_profile_mean = []
    per_profile_union = []
    for profile in profiles:
        per_profile_mean.append(_profile_mean_weakness_performance(profile, f, index))
        per_profile_union.append(index.union(profile.descriptions()))

    curve_m: list[CurvePoint] = []
    for m_min in range(1, max_profile_size + 1):
        candidates = [
            mean
            for profile, mean in zip(profiles, per_profile_mean)
            if len(profile) >= m_min and mean is not None
        ]
        if candidates:
            curve_m.append(CurvePoint(x=m_min, y=min(candidates)))

    if max_covered is None:
        max_covered = max((len(u) for u in per_profile_union), default=0)
    curve_n: list[CurvePoint] = []
    for n_min in range(1, max_covered + 1):
        candidates = [
            performance_over(union, f)
            for union in per_profile_union
            if len(union) >= n_min
        ]
        if candidates:
            curve_n.append(CurvePoint(x=n_min, y=min(candidates)))
    return curve_m, curve_n


# ---------------------------------------------------------------------------
# Ground-truth weakness assessment
# ---------------------------------------------------------------------------


def generate_synthetic_eval(
    spec: GroundTruthSpec, instances: list[Instance], kind: str = "binary"
) -> EvalResult:
    """Sample an evaluation result whose true weaknesses are the planted ones.

    Each instance succeeds with probability p * d^m where m counts the planted
    weaknesses it is associated with. Judged-pair results draw twice, once per
    judged order.
    """
    if kind not in ("binary", "judged_pair"):
        raise ValidationError("synthetic eval supports binary and judged_pair kinds")
    rng = np.random.default_rng(spec.seed)
    per_instance: dict[str, int] = {}
    for inst in instances:
        prob = spec.solve_probability(inst.id)
        draws = 1 if kind == "binary" else 2
        per_instance[inst.id] = int(sum(rng.random() < prob for _ in range(draws)))
    return EvalResult(kind=kind, per_instance=per_instance)


@dataclass
class GroundTruthScores:
    precision: float
    recall: float
    f1: float


def ground_truth_scores(
    identified: list[str], planted: list[str], index: AssociationIndex
) -> GroundTruthScores:
    """Overlap of associated instances between a profile and the planted one.

    Identified weaknesses with empty associated sets contribute zero to the
    precision sum rather than dividing by zero.
    """
    if not identified or not planted:
        raise ValidationError("both profiles must be non-empty")
    planted_union = index.union(planted)
    identified_union = index.union(identified)
    precision_terms = []
    for cap in identified:
        ids = index.of(cap)
        precision_terms.append(len(ids & planted_union) / len(ids) if ids else 0.0)
    recall_terms = []
    for cap in planted:
        ids = index.of(cap)
        recall_terms.append(len(ids & identified_union) / len(ids) if ids else 0.0)
    precision = sum(precision_terms) / len(identified)
    recall = sum(recall_terms) / len(planted)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return GroundTruthScores(precision=precision, recall=recall, f1=f1)


def f1_curve(
    profiles: list[WeaknessProfile],
    planted: list[str],
    index: AssociationIndex,
    max_profile_size: int = 20,
) -> list[CurvePoint]:
    """F1 of the size-M' profile for each M'; lowest threshold wins when several match."""
    best_by_size: dict[int, WeaknessProfile] = {}
    for profile in profiles:
        size = len(profile)
        current = best_by_size.get(size)
        if current is None or (profile.tau or 0.0) < (current.tau or 0.0):
            best_by_size[size] = profile
    curve = []
    for m in range(1, max_profile_size + 1):
        profile = best_by_size.get(m)
        if profile is None:
            continue
        scores = ground_truth_scores(profile.descriptions(), planted, index)
        curve.append(CurvePoint(x=m, y=scores.f1))
    return curve


# ---------------------------------------------------------------------------
# Placement of unseen instances by centroid descent
# ---------------------------------------------------------------------------


def place_instance(tree: CapabilityTree, embedding: np.ndarray) -> list[str]:
    """Visited node ids from the root to a leaf or fallback node.

    At each non-leaf the walk descends into the child whose stored centroid is
    nearest in Euclidean distance; exact ties go to the lowest node id.
    """
    vector = np.asarray(embedding, dtype=np.float64)
    path = [tree.root_id]
    node = tree.root
    while not node.is_leaf and not node.fallback:
        if node.child_centroids is None or len(node.child_centroids) != len(node.children):
            raise ValidationError(f"node {node.node_id} lacks child centroids")
        gaps = np.linalg.norm(node.child_centroids.astype(np.float64) - vector, axis=1)
        best = min(range(len(node.children)), key=lambda i: (gaps[i], node.children[i]))
        node = tree.nodes[node.children[best]]
        path.append(node.node_id)
    return path


@dataclass
class ThresholdPerformance:
    tau: float
    instance_ids: list[str]
    value: float | None  # None when no instance lands in an extracted subtree

    @property
    def count(self) -> int:
        return len(self.instance_ids)


def weakness_instance_performance(
    tree: CapabilityTree,
    profiles: list[WeaknessProfile],
    placements: dict[str, list[str]],
    f: EvalResult,
) -> list[ThresholdPerformance]:
    """Per threshold: F over test instances whose placement path crosses an extracted node."""
    out = []
    for profile in profiles:
        extracted = set(profile.node_ids())
        hit_ids = sorted(
            iid for iid, path in placements.items() if extracted.intersection(path)
        )
        value = performance_over(frozenset(hit_ids), f) if hit_ids else None
        out.append(ThresholdPerformance(tau=profile.tau or 0.0, instance_ids=hit_ids, value=value))
    return out


# ---------------------------------------------------------------------------
# Weakness-guided data-input generation
# ---------------------------------------------------------------------------


def generate_data_inputs(
    profile: WeaknessProfile,
    profiling_instances: list[Instance],
    count: int,
    gateway: LlmGateway,
    family: str,
    seed: int = 0,
    tree: CapabilityTree | None = None,
) -> list[str]:
    """One generated input per requested item, each guided by a sampled weakness.

    In-context examples come from the weakness node's linked instances when the
    profile carries tree provenance (and the tree is given), otherwise from the
    whole profiling set; pools smaller than the example count sample with
    replacement.
    """
    if count < 0:
        raise ValidationError("count must be >= 0")
    if count == 0:
        return []
    if not profile.items:
        raise ValidationError("cannot generate data from an empty profile")
    if not profiling_instances:
        raise ValidationError("need profiling instances for in-context examples")
    template = template_for(INPUT_GENERATION_TEMPLATES, family, "input generation")
    by_id = {inst.id: inst for inst in profiling_instances}
    rng = random.Random(stable_hash_int(str(seed), "data-inputs") % 2**63)

    requests = []
    for _ in range(count):
        item = profile.items[rng.randrange(len(profile.items))]
        pool = profiling_instances
        if tree is not None and isinstance(item.source, str) and item.source in tree.nodes:
            node_pool = [by_id[i] for i in tree.nodes[item.source].instance_ids if i in by_id]
            if node_pool:
                pool = node_pool
        if len(pool) >= IN_CONTEXT_EXAMPLES:
            examples = rng.sample(pool, IN_CONTEXT_EXAMPLES)
        else:
            examples = [pool[rng.randrange(len(pool))] for _ in range(IN_CONTEXT_EXAMPLES)]
        example_block = "\n\n".join(
            f"Example {i + 1}:\n{inst.input}" for i, inst in enumerate(examples)
        )
        system, user = template.render(
            capability=item.description,
            instance_num=IN_CONTEXT_EXAMPLES,
            example_inputs=example_block,
        )
        requests.append(
            ChatRequest(
                system_prompt=system,
                user_prompt=user,
                max_new_tokens=template.max_new_tokens,
                temperature=template.temperature,
                model=gateway.config.chat_model,
            )
        )
    return [str(text) for text in gateway.chat_many(requests)]
