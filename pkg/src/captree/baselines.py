"""The two comparison profiling methods.

textdiff: sample failed vs. successful instances, ask a diagnostic model for
candidate weaknesses, keep the candidates with the lowest performance over
their associated instances.

qualeval: derive a flat capability list from instance chunks, iteratively
shrink it, score every (instance, capability) pair, assign each instance to
exactly two capabilities under proportional capacities (integral min-cost
flow), and keep the lowest-performing capabilities.
"""

from __future__ import annotations

import json
import logging
import math
import random
import re
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .assess import AssociationIndex, build_association_index
from .core import (
    EvalResult,
    Instance,
    ProfileItem,
    ValidationError,
    WeaknessProfile,
    stable_hash_int,
)
from .gateway import ChatRequest, LlmGateway
from .prompts import (
    CATEGORIZE_INITIALIZATION_TEMPLATES,
    CATEGORIZE_SCORING_TEMPLATES,
    CATEGORIZE_SHRINKING_TEMPLATES,
    DIAGNOSTIC_TEMPLATES,
    PromptTemplate,
    template_for,
)

log = logging.getLogger(__name__)

TEXTDIFF_SAMPLE_SIZE = 50
TEXTDIFF_CANDIDATES = 20


def _chat(gateway: LlmGateway, template: PromptTemplate, **values) -> str:
    system, user = template.render(**values)
    return gateway.chat(
        ChatRequest(
            system_prompt=system,
            user_prompt=user,
            max_new_tokens=template.max_new_tokens,
            temperature=template.temperature,
            model=gateway.config.chat_model,
        )
    )


_LINE_MARKER = re.compile(r"^\s*(?:[-*•]+|\d+[.)])\s*")


def _parse_phrase_lines(text: str) -> list[str]:
    lines = []
    for raw in text.splitlines():
        line = _LINE_MARKER.sub("", raw).strip()
        if line:
            lines.append(line)
    return lines


def _format_pairs(instances: list[Instance]) -> str:
    blocks = []
    for i, inst in enumerate(instances, start=1):
        blocks.append(f"Case {i}:\nInput:\n{inst.input}\nOutput:\n{inst.reference_output}")
    return "\n\n".join(blocks)


def split_by_outcome(instances: list[Instance], eval_result: EvalResult) -> tuple[list[Instance], list[Instance]]:
    """(failed, succeeded) pools; judged pairs fail at 0 wins and succeed at 2."""
    failed, succeeded = [], []
    for inst in instances:
        value = eval_result.per_instance.get(inst.id)
        if value is None:
            raise ValidationError(f"eval result missing instance {inst.id!r}")
        if eval_result.kind == "binary":
            (succeeded if value == 1 else failed).append(inst)
        elif eval_result.kind == "judged_pair":
            if value == 0:
                failed.append(inst)
            elif value == 2:
                succeeded.append(inst)
        else:
            raise ValidationError("outcome split needs a binary or judged_pair eval result")
    return failed, succeeded


@dataclass
class TextDiffRun:
    candidates: list[str]
    candidate_performance: list[float | None]  # None when no associated instances
    index: AssociationIndex
    profile: WeaknessProfile


def textdiff_profile(
    instances: list[Instance],
    eval_result: EvalResult,
    profile_size: int,
    gateway: LlmGateway,
    seed: int = 0,
    family: str | None = None,
) -> TextDiffRun:
    """Contrastive diagnostic profiling over sampled failed/successful instances."""
    if not 1 <= profile_size <= TEXTDIFF_CANDIDATES:
        raise ValidationError(f"profile_size must be 1..{TEXTDIFF_CANDIDATES}")
    family = family or instances[0].benchmark_family
    failed, succeeded = split_by_outcome(instances, eval_result)
    if len(failed) < TEXTDIFF_SAMPLE_SIZE or len(succeeded) < TEXTDIFF_SAMPLE_SIZE:
        raise ValidationError(
            f"need at least {TEXTDIFF_SAMPLE_SIZE} failed and {TEXTDIFF_SAMPLE_SIZE} successful "
            f"instances, have {len(failed)}/{len(succeeded)}"
        )
    rng = random.Random(stable_hash_int(str(seed), "textdiff") % 2**63)
    negative = rng.sample(failed, TEXTDIFF_SAMPLE_SIZE)
    positive = rng.sample(succeeded, TEXTDIFF_SAMPLE_SIZE)

    template = template_for(DIAGNOSTIC_TEMPLATES, family, "diagnostic")
    reply = _chat(
        gateway,
        template,
        negative_inputs_and_outputs=_format_pairs(negative),
        positive_inputs_and_outputs=_format_pairs(positive),
    )
    candidates = _parse_phrase_lines(reply)
    if len(candidates) < profile_size:
        raise ValidationError(
            f"diagnostic output has {len(candidates)} usable lines, need {profile_size}"
        )
    if len(candidates) != TEXTDIFF_CANDIDATES:
        log.warning("diagnostic output has %d candidates, expected %d", len(candidates), TEXTDIFF_CANDIDATES)

    index = build_association_index(candidates, instances, gateway)
    performance: list[float | None] = []
    for cap in candidates:
        ids = index.of(cap)
        if ids:
            performance.append(sum(eval_result.value_of(i) for i in ids) / len(ids))
        else:
            performance.append(None)
    ranked = sorted(
        range(len(candidates)),
        key=lambda i: (performance[i] if performance[i] is not None else math.inf, i),
    )
    items = [ProfileItem(description=candidates[i], source=i) for i in ranked[:profile_size]]
    profile = WeaknessProfile(items=items, method="textdiff", direction="weakness")
    return TextDiffRun(
        candidates=candidates, candidate_performance=performance, index=index, profile=profile
    )


# ---------------------------------------------------------------------------
# qualeval
# ---------------------------------------------------------------------------


@dataclass
class QualEvalConfig:
    chunk_size: int = 20
    capability_count: int = 20
    shrink_factor: int = 4
    assignments_per_instance: int = 2
    max_shrink_rounds: int = 10
    capacity_slack: int = 1

    def __post_init__(self):
        if self.capability_count < 1:
            raise ValidationError("capability_count must be >= 1")
        if self.shrink_factor < 2:
            raise ValidationError("shrink_factor must be >= 2")
        if self.chunk_size < 1:
            raise ValidationError("chunk_size must be >= 1")


@dataclass
class RelevanceMatrix:
    instance_ids: list[str]
    capabilities: list[str]
    scores: np.ndarray  # (n_instances, n_capabilities), ints in 1..5
    flagged_cells: list[tuple[str, int]] = field(default_factory=list)
    rationales: list[dict[int, str]] = field(default_factory=list)

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=int)
        if self.scores.shape != (len(self.instance_ids), len(self.capabilities)):
            raise ValidationError("relevance matrix shape does not match ids x capabilities")
        if self.scores.min(initial=1) < 1 or self.scores.max(initial=5) > 5:
            raise ValidationError("relevance scores must lie in 1..5")


def qualeval_derive_capabilities(
    instances: list[Instance],
    gateway: LlmGateway,
    config: QualEvalConfig | None = None,
    seed: int = 0,
    family: str | None = None,
) -> list[str]:
    """Chunked proposal then iterative shrinking down to the target count."""
    config = config or QualEvalConfig()
    if not instances:
        raise ValidationError("cannot derive capabilities from zero instances")
    family = family or instances[0].benchmark_family
    init_template = template_for(CATEGORIZE_INITIALIZATION_TEMPLATES, family, "capability initialization")
    shrink_template = template_for(CATEGORIZE_SHRINKING_TEMPLATES, family, "capability shrinking")

    shuffled = list(instances)
    random.Random(stable_hash_int(str(seed), "qualeval-chunks") % 2**63).shuffle(shuffled)
    chunks = [shuffled[i : i + config.chunk_size] for i in range(0, len(shuffled), config.chunk_size)]
    capabilities: list[str] = []
    for chunk in chunks:
        reply = _chat(
            gateway,
            init_template,
            instance_num=len(chunk),
            inputs_and_outputs=_format_pairs(chunk),
        )
        capabilities.extend(_parse_phrase_lines(reply))
    if not capabilities:
        raise ValidationError("capability proposal calls produced no capabilities")

    target = config.capability_count
    rounds = 0
    while len(capabilities) != target and rounds < config.max_shrink_rounds:
        rounds += 1
        batch = config.capability_count * config.shrink_factor
        groups = [capabilities[i : i + batch] for i in range(0, len(capabilities), batch)]
        shrunk: list[str] = []
        for group in groups:
            reply = _chat(
                gateway,
                shrink_template,
                current_num_capabilities=len(group),
                capability_list="\n".join(group),
            )
            shrunk.extend(_parse_phrase_lines(reply))
        if not shrunk:
            raise ValidationError("capability shrinking produced an empty list")
        if shrunk == capabilities:
            break  # the model is not consolidating further; stop re-asking
        capabilities = shrunk
    if len(capabilities) > target:
        log.warning("truncating capability list from %d to %d", len(capabilities), target)
        capabilities = capabilities[:target]
    elif len(capabilities) < target:
        log.warning("capability list converged at %d items (target %d)", len(capabilities), target)
    return capabilities


def qualeval_score(
    instances: list[Instance],
    capabilities: list[str],
    gateway: LlmGateway,
    family: str | None = None,
) -> RelevanceMatrix:
    """One scoring call per instance over the full capability list."""
    if not capabilities:
        raise ValidationError("scoring needs at least one capability")
    family = family or instances[0].benchmark_family
    template = template_for(CATEGORIZE_SCORING_TEMPLATES, family, "relevance scoring")
    listed = "\n".join(f"{i + 1}. {cap}" for i, cap in enumerate(capabilities))

    requests = []
    for inst in instances:
        system, user = template.render(
            capability_num=len(capabilities),
            input=inst.input,
            output=inst.reference_output,
            capability_list=listed,
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

    scores = np.ones((len(instances), len(capabilities)), dtype=int)
    flagged: list[tuple[str, int]] = []
    rationales: list[dict[int, str]] = []
    for row, (inst, reply) in enumerate(zip(instances, replies)):
        parsed = _parse_score_json(str(reply))
        notes: dict[int, str] = {}
        for col in range(len(capabilities)):
            entry = parsed.get(str(col + 1)) if parsed is not None else None
            score = None
            if isinstance(entry, dict):
                raw = entry.get("score")
                if isinstance(raw, (int, float)) and not isinstance(raw, bool):
                    score = max(1, min(5, int(round(raw))))
                if isinstance(entry.get("reasoning"), str):
                    notes[col] = entry["reasoning"]
            if score is None:
                flagged.append((inst.id, col))
                score = 1
            scores[row, col] = score
        rationales.append(notes)
    if flagged:
        log.warning("defaulted %d unparsable relevance cells to 1", len(flagged))
    return RelevanceMatrix(
        instance_ids=[inst.id for inst in instances],
        capabilities=list(capabilities),
        scores=scores,
        flagged_cells=flagged,
        rationales=rationales,
    )


def _parse_score_json(reply: str) -> dict | None:
    text = reply.strip()
    fenced = re.search(r"```(?:json)?\s*(.*?)```", text, flags=re.S)
    if fenced:
        text = fenced.group(1).strip()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError:
        return None
    return obj if isinstance(obj, dict) else None


def qualeval_assign(
    matrix: RelevanceMatrix, config: QualEvalConfig | None = None
) -> dict[str, tuple[int, ...]]:
    """Assign each instance exactly two distinct capabilities, maximizing total
    relevance under per-capability capacities proportional to score mass.

    Solved as an integral min-cost flow (costs 5-score), so the optimum is
    exact. Capacities are ceil(2N * s_j / sum(s)) plus slack; infeasible
    capacities escalate the slack and log it.
    """
    config = config or QualEvalConfig()
    n, m = matrix.scores.shape
    per = config.assignments_per_instance
    if m < per:
        raise ValidationError(f"cannot assign {per} distinct capabilities from {m}")
    column_mass = matrix.scores.sum(axis=0)
    total_mass = int(column_mass.sum())
    demand = per * n

    slack = config.capacity_slack
    for attempt in range(6):
        capacities = [
            math.ceil(demand * int(column_mass[j]) / total_mass) + slack for j in range(m)
        ]
        flow = _solve_assignment_flow(matrix.scores, capacities, demand, per)
        if flow is not None:
            if attempt > 0:
                log.warning("assignment capacities escalated to slack=%d", slack)
            break
        slack += 1
    else:
        raise ValidationError("assignment infeasible even after escalating capacity slack")

    assignment: dict[str, tuple[int, ...]] = {}
    for row, iid in enumerate(matrix.instance_ids):
        chosen = tuple(col for col in range(m) if flow[f"i{row}"].get(f"c{col}", 0) > 0)
        if len(chosen) != per:
            raise ValidationError(f"instance {iid!r} received {len(chosen)} assignments")
        assignment[iid] = chosen
    return assignment


def _solve_assignment_flow(scores: np.ndarray, capacities: list[int], demand: int, per: int):
    n, m = scores.shape
    graph = nx.DiGraph()
    graph.add_node("src", demand=-demand)
    graph.add_node("sink", demand=demand)
    for row in range(n):
        graph.add_edge("src", f"i{row}", capacity=per, weight=0)
    for row in range(n):
        for col in range(m):
            graph.add_edge(f"i{row}", f"c{col}", capacity=1, weight=int(5 - scores[row, col]))
    for col in range(m):
        graph.add_edge(f"c{col}", "sink", capacity=int(capacities[col]), weight=0)
    try:
        return nx.min_cost_flow(graph)
    except nx.NetworkXUnfeasible:
        return None


def assignment_objective(matrix: RelevanceMatrix, assignment: dict[str, tuple[int, ...]]) -> int:
    total = 0
    for row, iid in enumerate(matrix.instance_ids):
        total += int(sum(matrix.scores[row, col] for col in assignment[iid]))
    return total


def qualeval_profile(
    matrix: RelevanceMatrix,
    assignment: dict[str, tuple[int, ...]],
    eval_result: EvalResult,
    profile_size: int,
) -> WeaknessProfile:
    """Lowest-performing capabilities over their assigned instances."""
    m = len(matrix.capabilities)
    if not 1 <= profile_size <= m:
        raise ValidationError(f"profile_size must be 1..{m}")
    assigned_ids: dict[int, list[str]] = {col: [] for col in range(m)}
    for iid, cols in assignment.items():
        for col in cols:
            assigned_ids[col].append(iid)
    performance = []
    for col in range(m):
        ids = assigned_ids[col]
        if ids:
            performance.append(sum(eval_result.value_of(i) for i in ids) / len(ids))
        else:
            performance.append(math.inf)
    ranked = sorted(range(m), key=lambda col: (performance[col], col))
    items = [
        ProfileItem(description=matrix.capabilities[col], source=col)
        for col in ranked[:profile_size]
    ]
    return WeaknessProfile(items=items, method="qualeval", direction="weakness")
