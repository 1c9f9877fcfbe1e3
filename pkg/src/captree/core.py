"""Shared domain types: benchmark instances, evaluation results, tree nodes,
weakness profiles, and the file formats everything else reads and writes.

All types are plain dataclasses treated as immutable after construction;
builder functions in other modules own their data until they return it.
"""

from __future__ import annotations

import hashlib
import json
import random
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

BENCHMARK_FAMILIES = ("math", "mmlu", "code", "instruction")

EVAL_KINDS = ("binary", "judged_pair", "arena")

PROFILE_METHODS = ("tree", "textdiff", "qualeval")


def stable_hash_int(*parts: str) -> int:
    """Platform-stable 64-bit hash used wherever derived seeds must reproduce."""
    digest = hashlib.sha256("\x1f".join(parts).encode("utf-8", "surrogatepass")).digest()
    return int.from_bytes(digest[:8], "big")


class CaptreeError(Exception):
    """Base class for all library errors."""


class ValidationError(CaptreeError):
    """Inputs violate a documented invariant (bad dataset, bad sizes, ...)."""


class ConfigurationError(CaptreeError):
    """Missing template, unknown family, or inconsistent configuration."""


class ProviderError(CaptreeError):
    """A chat/embedding provider failed after retries were exhausted."""


@dataclass
class Instance:
    """One benchmark item; the leaf unit of every structure in this package."""

    id: str
    input: str
    reference_output: str
    benchmark_family: str
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.input:
            raise ValidationError(f"instance {self.id!r} has empty input")
        if self.benchmark_family not in BENCHMARK_FAMILIES:
            raise ValidationError(
                f"instance {self.id!r}: unknown benchmark family {self.benchmark_family!r}"
            )


@dataclass
class ArenaRecord:
    instance_id: str
    model_a: str
    model_b: str
    winner: str  # "a" | "b" | "tie"

    def __post_init__(self):
        if self.winner not in ("a", "b", "tie"):
            raise ValidationError(f"arena record {self.instance_id!r}: bad winner {self.winner!r}")


@dataclass
class EvalResult:
    """Per-instance evaluation outcomes of one of three kinds.

    binary      -> per_instance[id] in {0, 1} (correctness)
    judged_pair -> per_instance[id] in {0, 1, 2} (wins over two judged orders)
    arena       -> records: pairwise comparisons keyed by instance id
    """

    kind: str
    per_instance: dict[str, int] = field(default_factory=dict)
    records: list[ArenaRecord] = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in EVAL_KINDS:
            raise ValidationError(f"unknown eval kind {self.kind!r}")
        if self.kind == "binary":
            bad = {i: v for i, v in self.per_instance.items() if v not in (0, 1)}
        elif self.kind == "judged_pair":
            bad = {i: v for i, v in self.per_instance.items() if v not in (0, 1, 2)}
        else:
            bad = {}
        if bad:
            some = sorted(bad)[:5]
            raise ValidationError(f"eval kind {self.kind}: out-of-range values for ids {some}")

    def instance_ids(self) -> set[str]:
        if self.kind == "arena":
            return {r.instance_id for r in self.records}
        return set(self.per_instance)

    def value_of(self, instance_id: str) -> float:
        """Per-instance performance in [0, 1]; judged wins are averaged over the two orders."""
        if self.kind == "binary":
            return float(self.per_instance[instance_id])
        if self.kind == "judged_pair":
            return self.per_instance[instance_id] / 2.0
        raise ValidationError("arena results have no scalar per-instance value")

    def success_trials(self, instance_ids: Iterable[str]) -> tuple[float, int]:
        """Aggregate (successes, trials) over a set of instances.

        Trials count one per instance for binary results and two per instance
        for judged pairs, matching how the preference of each judged order is
        a separate Bernoulli outcome.
        """
        ids = list(instance_ids)
        missing = [i for i in ids if i not in self.per_instance]
        if missing:
            raise ValidationError(f"eval result missing instances: {sorted(missing)[:5]}")
        if self.kind == "binary":
            return float(sum(self.per_instance[i] for i in ids)), len(ids)
        if self.kind == "judged_pair":
            return float(sum(self.per_instance[i] for i in ids)), 2 * len(ids)
        raise ValidationError("use arena records directly for rating fits")


@dataclass
class CapabilityAnnotation:
    instance_id: str
    phrase: str
    annotator_model: str
    prompt_version: str

    def __post_init__(self):
        if not self.phrase.strip():
            raise ValidationError(f"annotation for {self.instance_id!r} has empty phrase")


@dataclass
class Embedding:
    instance_id: str
    vector: np.ndarray
    model_tag: str = ""

    def __post_init__(self):
        self.vector = np.asarray(self.vector, dtype=np.float32)
        if self.vector.ndim != 1 or self.vector.size == 0:
            raise ValidationError(f"embedding for {self.instance_id!r} must be a non-empty 1-d vector")
        if not np.all(np.isfinite(self.vector)):
            raise ValidationError(f"embedding for {self.instance_id!r} contains non-finite values")

    @property
    def dim(self) -> int:
        return int(self.vector.shape[0])


@dataclass
class NodeMetric:
    """Per-model performance at one tree node."""

    kind: str
    successes: float
    trials: int
    rating: float | None = None
    rank: int | None = None

    @property
    def value(self) -> float:
        return self.successes / self.trials if self.trials > 0 else 0.0

    def to_json(self) -> dict:
        out: dict = {
            "kind": self.kind,
            "successes": self.successes,
            "trials": self.trials,
            "value": self.value,
        }
        if self.rating is not None:
            out["rating"] = self.rating
        if self.rank is not None:
            out["rank"] = self.rank
        return out

    @classmethod
    def from_json(cls, obj: Mapping) -> "NodeMetric":
        return cls(
            kind=obj["kind"],
            successes=obj["successes"],
            trials=obj["trials"],
            rating=obj.get("rating"),
            rank=obj.get("rank"),
        )


@dataclass
class ProfileItem:
    description: str
    source: str | int  # tree node id, or baseline capability index

    def __post_init__(self):
        if not self.description.strip():
            raise ValidationError("profile item has empty description")


@dataclass
class WeaknessProfile:
    """A set of capability descriptions with provenance and the threshold that produced it."""

    items: list[ProfileItem]
    method: str
    direction: str = "weakness"
    tau: float | None = None

    def __post_init__(self):
        if self.method not in PROFILE_METHODS:
            raise ValidationError(f"unknown profiling method {self.method!r}")
        if self.direction not in ("weakness", "strength"):
            raise ValidationError(f"unknown direction {self.direction!r}")
        if self.tau is not None and not 0.0 <= self.tau <= 1.0:
            raise ValidationError(f"tau {self.tau} outside [0, 1]")

    def __len__(self) -> int:
        return len(self.items)

    def descriptions(self) -> list[str]:
        return [it.description for it in self.items]

    def node_ids(self) -> list[str]:
        return [it.source for it in self.items if isinstance(it.source, str)]

    def to_json(self) -> dict:
        items = []
        for it in self.items:
            key = "node_id" if isinstance(it.source, str) else "capability_index"
            items.append({"description": it.description, key: it.source})
        out: dict = {"method": self.method, "direction": self.direction, "items": items}
        if self.tau is not None:
            out["tau"] = self.tau
        return out

    @classmethod
    def from_json(cls, obj: Mapping) -> "WeaknessProfile":
        items = [
            ProfileItem(d["description"], d["node_id"] if "node_id" in d else d["capability_index"])
            for d in obj["items"]
        ]
        return cls(items=items, method=obj["method"], direction=obj["direction"], tau=obj.get("tau"))


@dataclass
class GroundTruthSpec:
    """Planted weaknesses plus the sampling law for synthetic evaluation results."""

    weaknesses: list[str]
    base_probability: float
    decrease_rate: float
    association: dict[str, frozenset[int]]
    seed: int

    def __post_init__(self):
        if not self.weaknesses:
            raise ValidationError("ground-truth spec needs at least one weakness")
        if not 0.0 < self.base_probability <= 1.0:
            raise ValidationError(f"base probability {self.base_probability} outside (0, 1]")
        if not 0.0 < self.decrease_rate < 1.0:
            raise ValidationError(f"decrease rate {self.decrease_rate} outside (0, 1)")
        n_w = len(self.weaknesses)
        for iid, idxs in self.association.items():
            if any(j < 0 or j >= n_w for j in idxs):
                raise ValidationError(f"association for {iid!r} references unknown weakness index")

    def solve_probability(self, instance_id: str) -> float:
        m = len(self.association.get(instance_id, ()))
        prob = self.base_probability * self.decrease_rate**m
        if not 0.0 < prob <= 1.0:
            raise ValidationError(f"success probability {prob} outside (0, 1] for {instance_id!r}")
        return prob


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, message: str) -> None:
        self.violations.append(message)


def validate_dataset(instances: Sequence[Instance], eval_result: EvalResult | None = None) -> ValidationReport:
    """Report-only consistency check of a dataset and an optional eval result."""
    report = ValidationReport()
    seen: set[str] = set()
    for inst in instances:
        if inst.id in seen:
            report.add(f"duplicate instance id {inst.id!r}")
        seen.add(inst.id)
    if eval_result is not None:
        if eval_result.kind == "arena":
            referenced = {r.instance_id for r in eval_result.records}
        else:
            referenced = set(eval_result.per_instance)
            for iid, v in eval_result.per_instance.items():
                hi = 1 if eval_result.kind == "binary" else 2
                if not 0 <= v <= hi:
                    report.add(f"eval value {v} for {iid!r} outside 0..{hi}")
        for iid in sorted(referenced - seen):
            report.add(f"eval references unknown instance id {iid!r}")
    return report


def split_profiling_test(
    instances: Sequence[Instance], sizes: tuple[int, int], seed: int
) -> tuple[list[Instance], list[Instance]]:
    """Disjoint random (profiling, test) subsets of the requested sizes, deterministic under seed."""
    n_prof, n_test = sizes
    if n_prof < 0 or n_test < 0:
        raise ValidationError("split sizes must be non-negative")
    if n_prof + n_test > len(instances):
        raise ValidationError(
            f"split sizes {n_prof}+{n_test} exceed dataset size {len(instances)}"
        )
    order = list(range(len(instances)))
    random.Random(seed).shuffle(order)
    profiling = [instances[i] for i in sorted(order[:n_prof])]
    test = [instances[i] for i in sorted(order[n_prof : n_prof + n_test])]
    return profiling, test


# ---------------------------------------------------------------------------
# On-disk formats.
#
# Dataset: JSONL, one object per line:
#   {"id", "input", "output", "family", "metadata": {...}}
# Eval files: JSONL; binary {"id", "correct"}, judged {"id", "wins"},
#   arena {"id", "model_a", "model_b", "winner"}.
# Embeddings: binary sidecar, 8-byte header (uint32 dim, uint32 count, LE)
#   then row-major float32; ids in a JSON list alongside.
# ---------------------------------------------------------------------------


def _read_jsonl(path: str | Path) -> list[dict]:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}:{lineno}: bad JSON ({exc})") from exc
    return rows


def _write_jsonl(path: str | Path, rows: Iterable[Mapping]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")


def load_dataset(path: str | Path) -> list[Instance]:
    """Read a JSONL dataset; rows without an id get '{file-stem}:{line-number}'."""
    stem = Path(path).stem
    instances = []
    for lineno, row in enumerate(_read_jsonl(path), start=1):
        instances.append(
            Instance(
                id=str(row.get("id") or f"{stem}:{lineno}"),
                input=row["input"],
                reference_output=row.get("output", ""),
                benchmark_family=row["family"],
                metadata={str(k): str(v) for k, v in (row.get("metadata") or {}).items()},
            )
        )
    return instances


def save_dataset(path: str | Path, instances: Sequence[Instance]) -> None:
    _write_jsonl(
        path,
        (
            {
                "id": inst.id,
                "input": inst.input,
                "output": inst.reference_output,
                "family": inst.benchmark_family,
                "metadata": inst.metadata,
            }
            for inst in instances
        ),
    )


def load_eval_result(path: str | Path, kind: str) -> EvalResult:
    rows = _read_jsonl(path)
    if kind == "binary":
        return EvalResult(kind, per_instance={str(r["id"]): int(r["correct"]) for r in rows})
    if kind == "judged_pair":
        return EvalResult(kind, per_instance={str(r["id"]): int(r["wins"]) for r in rows})
    if kind == "arena":
        records = [
            ArenaRecord(str(r["id"]), str(r["model_a"]), str(r["model_b"]), str(r["winner"]))
            for r in rows
        ]
        return EvalResult(kind, records=records)
    raise ValidationError(f"unknown eval kind {kind!r}")


def save_eval_result(path: str | Path, result: EvalResult) -> None:
    if result.kind == "binary":
        rows = [{"id": i, "correct": v} for i, v in sorted(result.per_instance.items())]
    elif result.kind == "judged_pair":
        rows = [{"id": i, "wins": v} for i, v in sorted(result.per_instance.items())]
    else:
        rows = [
            {"id": r.instance_id, "model_a": r.model_a, "model_b": r.model_b, "winner": r.winner}
            for r in result.records
        ]
    _write_jsonl(path, rows)


def save_annotations(path: str | Path, annotations: Sequence[CapabilityAnnotation]) -> None:
    _write_jsonl(
        path,
        (
            {
                "id": a.instance_id,
                "phrase": a.phrase,
                "annotator_model": a.annotator_model,
                "prompt_version": a.prompt_version,
            }
            for a in annotations
        ),
    )


def load_annotations(path: str | Path) -> list[CapabilityAnnotation]:
    return [
        CapabilityAnnotation(str(r["id"]), r["phrase"], r["annotator_model"], r["prompt_version"])
        for r in _read_jsonl(path)
    ]


def save_embedding_matrix(path: str | Path, ids: Sequence[str], matrix: np.ndarray) -> None:
    """Write the binary embedding sidecar and its id index file."""
    matrix = np.ascontiguousarray(matrix, dtype=np.float32)
    if matrix.ndim != 2 or matrix.shape[0] != len(ids):
        raise ValidationError("embedding matrix must be 2-d with one row per id")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<II", matrix.shape[1], matrix.shape[0]))
        fh.write(matrix.tobytes(order="C"))
    Path(ids_path_for(path)).write_text(
        json.dumps(list(ids), ensure_ascii=False), encoding="utf-8"
    )


def load_embedding_matrix(path: str | Path) -> tuple[list[str], np.ndarray]:
    with open(path, "rb") as fh:
        header = fh.read(8)
        if len(header) != 8:
            raise ValidationError(f"{path}: truncated embedding header")
        dim, count = struct.unpack("<II", header)
        data = np.frombuffer(fh.read(), dtype=np.float32)
    if data.size != dim * count:
        raise ValidationError(f"{path}: expected {dim * count} floats, found {data.size}")
    ids = json.loads(Path(ids_path_for(path)).read_text(encoding="utf-8"))
    if len(ids) != count:
        raise ValidationError(f"{path}: id index lists {len(ids)} ids for {count} rows")
    return [str(i) for i in ids], data.reshape(count, dim).copy()


def ids_path_for(path: str | Path) -> Path:
    return Path(path).with_suffix(Path(path).suffix + ".ids.json")


def save_embeddings(path: str | Path, embeddings: Sequence[Embedding]) -> None:
    ids = [e.instance_id for e in embeddings]
    matrix = np.stack([e.vector for e in embeddings]) if embeddings else np.zeros((0, 0), np.float32)
    save_embedding_matrix(path, ids, matrix)


def load_embeddings(path: str | Path, model_tag: str = "") -> list[Embedding]:
    ids, matrix = load_embedding_matrix(path)
    return [Embedding(i, matrix[row], model_tag) for row, i in enumerate(ids)]
