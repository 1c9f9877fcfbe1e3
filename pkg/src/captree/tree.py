"""Capability-tree construction: recursive K-Means with Silhouette-selected
cluster counts (plus the agglomerative alternative), bottom-up natural
language descriptions, and tree persistence.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np
from scipy.cluster.hierarchy import linkage

from .annotate import AnnotationError, DEFAULT_FAILURE_CAP
from .clustering import ClusteringConfig, select_clustering
from .core import (
    CapabilityAnnotation,
    Embedding,
    Instance,
    NodeMetric,
    ValidationError,
    stable_hash_int,
)
from .gateway import ChatRequest, LlmGateway
from .prompts import DESCRIPTION_TEMPLATES, template_for

log = logging.getLogger(__name__)


@dataclass
class CapabilityNode:
    node_id: str
    instance_ids: tuple[str, ...]  # sorted
    depth: int
    children: tuple[str, ...] = ()
    description: str = ""
    child_centroids: np.ndarray | None = None  # rows aligned with ``children``
    fallback: bool = False
    metrics: dict[str, NodeMetric] = field(default_factory=dict)

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def size(self) -> int:
        return len(self.instance_ids)


@dataclass
class CapabilityTree:
    root_id: str
    nodes: dict[str, CapabilityNode]
    method: str = "kmeans"  # or "hierarchical"

    @property
    def root(self) -> CapabilityNode:
        return self.nodes[self.root_id]

    def node(self, node_id: str) -> CapabilityNode:
        return self.nodes[node_id]

    def __len__(self) -> int:
        return len(self.nodes)

    def walk(self) -> Iterator[CapabilityNode]:
        """Depth-first, children in stored order."""
        stack = [self.root_id]
        while stack:
            node = self.nodes[stack.pop()]
            yield node
            stack.extend(reversed(node.children))

    def leaves(self) -> list[CapabilityNode]:
        return [n for n in self.walk() if n.is_leaf]

    def parent_map(self) -> dict[str, str]:
        parents: dict[str, str] = {}
        for node in self.nodes.values():
            for child in node.children:
                parents[child] = node.node_id
        return parents

    def ancestors(self, node_id: str) -> Iterator[str]:
        parents = self.parent_map()
        cur = node_id
        while cur in parents:
            cur = parents[cur]
            yield cur

    def check_partition(self) -> None:
        """Raise unless every node's children exactly partition its instances."""
        for node in self.nodes.values():
            if node.is_leaf:
                if node.size != 1:
                    raise ValidationError(f"leaf {node.node_id} links {node.size} instances")
                continue
            combined: list[str] = []
            for child_id in node.children:
                combined.extend(self.nodes[child_id].instance_ids)
            if len(combined) != len(set(combined)):
                raise ValidationError(f"children of {node.node_id} overlap")
            if set(combined) != set(node.instance_ids):
                raise ValidationError(f"children of {node.node_id} do not cover it")
        if len(self.leaves()) != self.root.size:
            raise ValidationError("leaf count differs from root instance count")


def _node_id(instance_ids: Sequence[str]) -> str:
    digest = hashlib.sha256("\x1f".join(instance_ids).encode("utf-8", "surrogatepass")).hexdigest()
    return f"n{digest[:12]}"


def _order_children(pairs: list[tuple[CapabilityNode, np.ndarray | None]]) -> list[tuple[CapabilityNode, np.ndarray | None]]:
    return sorted(pairs, key=lambda p: (-p[0].size, p[0].node_id))


def _embedding_matrix(
    instances: Sequence[Instance], embeddings: Iterable[Embedding] | Mapping[str, np.ndarray]
) -> tuple[list[str], np.ndarray]:
    if isinstance(embeddings, Mapping):
        by_id = dict(embeddings)
    else:
        by_id = {e.instance_id: e.vector for e in embeddings}
    missing = [inst.id for inst in instances if inst.id not in by_id]
    if missing:
        raise ValidationError(f"missing embeddings for instances: {sorted(missing)[:5]}")
    ids = [inst.id for inst in instances]
    matrix = np.asarray([by_id[i] for i in ids], dtype=np.float64)
    if matrix.ndim != 2:
        raise ValidationError("embeddings must share one dimension")
    return ids, matrix


def build_tree(
    instances: Sequence[Instance],
    embeddings: Iterable[Embedding] | Mapping[str, np.ndarray],
    config: ClusteringConfig | None = None,
) -> CapabilityTree:
    """Recursive construction: cluster each node's embeddings, recurse per cluster.

    A node whose cluster-count sweep finds no positive Silhouette score turns
    all linked instances into direct leaf children. Children are ordered by
    descending size, then node id.
    """
    if not instances:
        raise ValidationError("cannot build a tree over zero instances")
    config = config or ClusteringConfig()
    ids, matrix = _embedding_matrix(instances, embeddings)
    nodes: dict[str, CapabilityNode] = {}

    def add_leaf(instance_id: str, depth: int) -> CapabilityNode:
        leaf = CapabilityNode(node_id=_node_id([instance_id]), instance_ids=(instance_id,), depth=depth)
        nodes[leaf.node_id] = leaf
        return leaf

    def build(row_indices: np.ndarray, depth: int) -> CapabilityNode:
        node_instance_ids = tuple(sorted(ids[i] for i in row_indices))
        if len(row_indices) == 1:
            return add_leaf(node_instance_ids[0], depth)
        node_seed = stable_hash_int(str(config.seed), *node_instance_ids) % 2**32
        local = dataclasses.replace(config, seed=node_seed)
        selection = select_clustering(matrix[row_indices], local)
        if selection.is_fallback:
            child_pairs = [(add_leaf(ids[i], depth + 1), None) for i in row_indices]
            ordered = _order_children(child_pairs)
            node = CapabilityNode(
                node_id=_node_id(node_instance_ids),
                instance_ids=node_instance_ids,
                depth=depth,
                children=tuple(c.node_id for c, _ in ordered),
                fallback=True,
            )
            nodes[node.node_id] = node
            return node
        clustering = selection.clustering
        assert clustering is not None
        child_pairs = []
        for label in range(clustering.k):
            member_rows = row_indices[clustering.assignments == label]
            child = build(member_rows, depth + 1)
            child_pairs.append((child, clustering.centroids[label]))
        ordered = _order_children(child_pairs)
        node = CapabilityNode(
            node_id=_node_id(node_instance_ids),
            instance_ids=node_instance_ids,
            depth=depth,
            children=tuple(c.node_id for c, _ in ordered),
            child_centroids=np.asarray([cent for _, cent in ordered], dtype=np.float32),
        )
        nodes[node.node_id] = node
        return node

    root = build(np.arange(len(ids)), depth=0)
    return CapabilityTree(root_id=root.node_id, nodes=nodes, method="kmeans")


def build_tree_hierarchical(
    instances: Sequence[Instance],
    embeddings: Iterable[Embedding] | Mapping[str, np.ndarray],
) -> CapabilityTree:
    """Agglomerative alternative: average linkage over cosine distance.

    Always produces a binary tree with exactly n-1 internal nodes; each
    internal node's child centroids are the means of the children's member
    embeddings.
    """
    if not instances:
        raise ValidationError("cannot build a tree over zero instances")
    ids, matrix = _embedding_matrix(instances, embeddings)
    nodes: dict[str, CapabilityNode] = {}
    n = len(ids)
    if n == 1:
        leaf = CapabilityNode(node_id=_node_id([ids[0]]), instance_ids=(ids[0],), depth=0)
        nodes[leaf.node_id] = leaf
        return CapabilityTree(root_id=leaf.node_id, nodes=nodes, method="hierarchical")

    merges = linkage(matrix, method="average", metric="cosine")
    members: dict[int, list[int]] = {i: [i] for i in range(n)}
    pending: dict[int, CapabilityNode] = {}
    for i in range(n):
        leaf = CapabilityNode(node_id=_node_id([ids[i]]), instance_ids=(ids[i],), depth=0)
        nodes[leaf.node_id] = leaf
        pending[i] = leaf
    for row, (left, right, _dist, _count) in enumerate(merges):
        left, right = int(left), int(right)
        rows = members[left] + members[right]
        members[n + row] = rows
        pair = []
        for cluster_index in (left, right):
            child = pending.pop(cluster_index)
            centroid = matrix[members[cluster_index]].mean(axis=0)
            pair.append((child, centroid))
        ordered = _order_children(pair)
        node_instance_ids = tuple(sorted(ids[i] for i in rows))
        node = CapabilityNode(
            node_id=_node_id(node_instance_ids),
            instance_ids=node_instance_ids,
            depth=0,
            children=tuple(c.node_id for c, _ in ordered),
            child_centroids=np.asarray([cent for _, cent in ordered], dtype=np.float32),
        )
        nodes[node.node_id] = node
        pending[n + row] = node

    (root,) = pending.values()
    tree = CapabilityTree(root_id=root.node_id, nodes=nodes, method="hierarchical")
    _assign_depths(tree)
    return tree


def _assign_depths(tree: CapabilityTree) -> None:
    queue: list[tuple[str, int]] = [(tree.root_id, 0)]
    while queue:
        node_id, depth = queue.pop()
        node = tree.nodes[node_id]
        node.depth = depth
        queue.extend((c, depth + 1) for c in node.children)


def describe_tree(
    tree: CapabilityTree,
    annotations: Sequence[CapabilityAnnotation] | Mapping[str, str],
    gateway: LlmGateway,
    family: str,
    failure_cap: float = DEFAULT_FAILURE_CAP,
) -> CapabilityTree:
    """Fill in every node description, children before parents.

    Leaves take their annotation phrase directly; each internal node gets one
    chat call summarizing its children's descriptions. Nodes at the same depth
    are described in one bounded-parallel batch.
    """
    if isinstance(annotations, Mapping):
        phrase_of = dict(annotations)
    else:
        phrase_of = {a.instance_id: a.phrase for a in annotations}
    template = template_for(DESCRIPTION_TEMPLATES, family, "description")

    described: dict[str, CapabilityNode] = {}
    failures: dict[str, str] = {}
    for node in tree.walk():
        if node.is_leaf:
            phrase = phrase_of.get(node.instance_ids[0], "").strip()
            if not phrase:
                raise ValidationError(f"no annotation phrase for leaf instance {node.instance_ids[0]!r}")
            described[node.node_id] = dataclasses.replace(node, description=phrase)
        else:
            described[node.node_id] = dataclasses.replace(node)

    internal_by_depth: dict[int, list[CapabilityNode]] = {}
    for node in tree.nodes.values():
        if not node.is_leaf:
            internal_by_depth.setdefault(node.depth, []).append(node)

    for depth in sorted(internal_by_depth, reverse=True):
        batch = sorted(internal_by_depth[depth], key=lambda n: n.node_id)
        requests = []
        for node in batch:
            lines = [
                f"Group {i + 1}: {described[child].description}"
                for i, child in enumerate(node.children)
            ]
            system, user = template.render(
                group_number=len(node.children), skill_descriptions="\n".join(lines)
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
        results = gateway.chat_many(requests, collect_errors=True)
        for node, result in zip(batch, results):
            if isinstance(result, Exception):
                failures[node.node_id] = str(result)
                continue
            described[node.node_id].description = result.strip()

    if failures:
        internal_count = sum(len(v) for v in internal_by_depth.values())
        if len(failures) / max(internal_count, 1) > failure_cap:
            raise AnnotationError(
                f"{len(failures)}/{internal_count} node descriptions failed: {sorted(failures)}"
            )
        log.warning("description failures within cap: %s", sorted(failures))
    return CapabilityTree(root_id=tree.root_id, nodes=described, method=tree.method)


# ---------------------------------------------------------------------------
# Persistence: node records as JSON, centroids in a binary sidecar keyed by
# node id through a JSON row index.
# ---------------------------------------------------------------------------

TREE_FORMAT = "captree-tree-v1"


def tree_to_json(tree: CapabilityTree) -> dict:
    nodes = {}
    for node in tree.nodes.values():
        record: dict = {
            "instance_ids": list(node.instance_ids),
            "depth": node.depth,
            "children": list(node.children),
            "description": node.description,
            "fallback": node.fallback,
        }
        if node.metrics:
            record["metrics"] = {m: metric.to_json() for m, metric in sorted(node.metrics.items())}
        nodes[node.node_id] = record
    return {"format": TREE_FORMAT, "method": tree.method, "root": tree.root_id, "nodes": nodes}


def tree_from_json(obj: Mapping, centroids: Mapping[str, np.ndarray] | None = None) -> CapabilityTree:
    if obj.get("format") != TREE_FORMAT:
        raise ValidationError(f"unsupported tree format {obj.get('format')!r}")
    centroids = centroids or {}
    nodes: dict[str, CapabilityNode] = {}
    for node_id, record in obj["nodes"].items():
        metrics = {
            model: NodeMetric.from_json(m) for model, m in record.get("metrics", {}).items()
        }
        nodes[node_id] = CapabilityNode(
            node_id=node_id,
            instance_ids=tuple(record["instance_ids"]),
            depth=record["depth"],
            children=tuple(record["children"]),
            description=record.get("description", ""),
            child_centroids=centroids.get(node_id),
            fallback=record.get("fallback", False),
            metrics=metrics,
        )
    return CapabilityTree(root_id=obj["root"], nodes=nodes, method=obj.get("method", "kmeans"))


def save_tree(tree: CapabilityTree, json_path: str | Path, centroids_path: str | Path | None = None) -> None:
    Path(json_path).write_text(
        json.dumps(tree_to_json(tree), sort_keys=True, indent=1, ensure_ascii=False),
        encoding="utf-8",
    )
    if centroids_path is None:
        return
    with_centroids = [
        node for node in sorted(tree.nodes.values(), key=lambda n: n.node_id)
        if node.child_centroids is not None and len(node.child_centroids)
    ]
    index: dict[str, list[int]] = {}
    if with_centroids:
        dim = int(with_centroids[0].child_centroids.shape[1])
        rows = []
        start = 0
        for node in with_centroids:
            block = np.ascontiguousarray(node.child_centroids, dtype=np.float32)
            if block.shape[1] != dim:
                raise ValidationError("child centroid dimensions differ across nodes")
            rows.append(block)
            index[node.node_id] = [start, block.shape[0]]
            start += block.shape[0]
        stacked = np.concatenate(rows, axis=0)
    else:
        dim = 0
        stacked = np.zeros((0, 0), dtype=np.float32)
    with open(centroids_path, "wb") as fh:
        fh.write(struct.pack("<II", dim, stacked.shape[0]))
        fh.write(stacked.tobytes(order="C"))
    Path(str(centroids_path) + ".idx.json").write_text(
        json.dumps(index, sort_keys=True), encoding="utf-8"
    )


def load_tree(json_path: str | Path, centroids_path: str | Path | None = None) -> CapabilityTree:
    obj = json.loads(Path(json_path).read_text(encoding="utf-8"))
    centroids: dict[str, np.ndarray] = {}
    if centroids_path is not None and Path(centroids_path).exists():
        with open(centroids_path, "rb") as fh:
            dim, count = struct.unpack("<II", fh.read(8))
            data = np.frombuffer(fh.read(), dtype=np.float32)
        if data.size != dim * count:
            raise ValidationError(f"{centroids_path}: expected {dim * count} floats, found {data.size}")
        stacked = data.reshape(count, dim) if count else np.zeros((0, 0), np.float32)
        index = json.loads(Path(str(centroids_path) + ".idx.json").read_text(encoding="utf-8"))
        for node_id, (start, length) in index.items():
            centroids[node_id] = stacked[start : start + length].copy()
    return tree_from_json(obj, centroids)
