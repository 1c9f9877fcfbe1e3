"""Artifact-directory plumbing: run manifests, the UI export bundle, and a
read-only static file server for browsing exported bundles.

Directory layout produced by the CLI:

    <artifact>/
      manifest.json
      tree.json
      centroids.bin, centroids.bin.idx.json
      annotations.jsonl
      embeddings.bin, embeddings.bin.ids.json
      profiles/   extraction and sweep outputs
      reports/    curves and score reports
"""

from __future__ import annotations

import http.server
import json
import os
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .core import Instance, ValidationError, WeaknessProfile
from .tree import CapabilityTree

PREVIEW_CHARS = 500


def timestamp() -> str:
    """UTC ISO timestamp; honors SOURCE_DATE_EPOCH for reproducible artifacts."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        return datetime.fromtimestamp(int(epoch), tz=timezone.utc).isoformat()
    return datetime.now(tz=timezone.utc).isoformat()


@dataclass
class RunManifest:
    command: str
    config: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    prompt_versions: dict = field(default_factory=dict)
    provider: str = ""
    created_at: str = ""

    def to_json(self) -> dict:
        return {
            "command": self.command,
            "config": self.config,
            "seeds": self.seeds,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "prompt_versions": self.prompt_versions,
            "provider": self.provider,
            "created_at": self.created_at or timestamp(),
        }


def write_manifest(directory: str | Path, manifest: RunManifest) -> Path:
    path = Path(directory) / "manifest.json"
    path.write_text(
        json.dumps(manifest.to_json(), sort_keys=True, indent=1, ensure_ascii=False),
        encoding="utf-8",
    )
    return path


def write_json(path: str | Path, payload) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(payload, sort_keys=True, indent=1, ensure_ascii=False), encoding="utf-8"
    )
    return path


def write_curve_csv(path: str | Path, points) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["x,y"] + [f"{p.x},{p.y}" for p in points]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def export_ui_bundle(
    tree: CapabilityTree,
    instances: list[Instance],
    profiles: list[WeaknessProfile] | None = None,
) -> dict:
    """Single JSON document the browser explorer consumes.

    Node records carry sizes, depths, and per-model success counts (no
    centroids); leaves get truncated instance previews. Key order and node
    order are stable, so re-exports are byte-identical.
    """
    by_id = {inst.id: inst for inst in instances}
    nodes = []
    previews = {}
    for node in sorted(tree.nodes.values(), key=lambda n: n.node_id):
        if not node.description:
            raise ValidationError(f"cannot export an undescribed tree (node {node.node_id})")
        record = {
            "id": node.node_id,
            "description": node.description,
            "children": list(node.children),
            "size": node.size,
            "depth": node.depth,
            "fallback": node.fallback,
            "metrics": {},
        }
        for model, metric in sorted(node.metrics.items()):
            entry = {
                "successes": metric.successes,
                "trials": metric.trials,
                "value": metric.value,
            }
            if metric.rank is not None:
                entry["rank"] = metric.rank
            record["metrics"][model] = entry
        nodes.append(record)
        if node.is_leaf:
            inst = by_id.get(node.instance_ids[0])
            if inst is None:
                raise ValidationError(f"leaf instance {node.instance_ids[0]!r} missing from dataset")
            previews[node.node_id] = {
                "instance_id": inst.id,
                "input": inst.input[:PREVIEW_CHARS],
                "output": inst.reference_output[:PREVIEW_CHARS],
            }
    bundle_profiles = []
    for profile in profiles or []:
        bundle_profiles.append(
            {
                "method": profile.method,
                "direction": profile.direction,
                "tau": profile.tau,
                "node_ids": sorted(profile.node_ids()),
            }
        )
    return {
        "format": "captree-bundle-v1",
        "root": tree.root_id,
        "nodes": nodes,
        "previews": previews,
        "profiles": bundle_profiles,
    }


class _BundleHandler(http.server.SimpleHTTPRequestHandler):
    bundle_path: Path
    ui_dir: Path | None

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def do_GET(self):  # noqa: N802 (http.server API)
        route = self.path.split("?", 1)[0]
        if route in ("/bundle.json", "/bundle"):
            return self._send_file(self.bundle_path, "application/json")
        if self.ui_dir is not None:
            rel = route.lstrip("/") or "index.html"
            candidate = (self.ui_dir / rel).resolve()
            if candidate.is_file() and self.ui_dir.resolve() in candidate.parents:
                ctype = self.guess_type(str(candidate))
                return self._send_file(candidate, ctype)
        self.send_error(404, "not found")

    def _send_file(self, path: Path, content_type: str) -> None:
        try:
            body = path.read_bytes()
        except OSError:
            self.send_error(404, "not found")
            return
        self.send_response(200)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


def serve_bundle(
    bundle_path: str | Path, port: int, ui_dir: str | Path | None = None
) -> http.server.ThreadingHTTPServer:
    """Start a read-only HTTP server for the bundle (and UI assets, if given).

    Returns the running server; callers own shutdown. Raises OSError when the
    port is taken.
    """
    bundle = Path(bundle_path)
    if not bundle.is_file():
        raise ValidationError(f"bundle {bundle} does not exist")
    handler = type(
        "Handler",
        (_BundleHandler,),
        {"bundle_path": bundle, "ui_dir": Path(ui_dir) if ui_dir else None},
    )
    server = http.server.ThreadingHTTPServer(("127.0.0.1", port), handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server
