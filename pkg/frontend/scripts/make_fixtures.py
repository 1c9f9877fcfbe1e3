#!/usr/bin/env python3
"""Regenerate the explorer's test fixtures with the pipeline CLI.

Each fixture is a full export bundle over a mock-built tree with a planted
weak region, carrying the CLI's extraction profiles at tau 0.2 / 0.4 / 0.6 so
the client-side extraction can be checked for exact node-set parity.

Usage (from the repository root):
    python3 frontend/scripts/make_fixtures.py
"""

from __future__ import annotations

import json
import sys
import tempfile
from pathlib import Path

import numpy as np

REPO = Path(__file__).resolve().parents[2]
sys.path.insert(0, str(REPO / "src"))

from captree.cli import main as captree_main
from captree.core import EvalResult, Instance, save_dataset, save_eval_result

FIXTURES = REPO / "frontend" / "tests" / "fixtures"
TAUS = (0.2, 0.4, 0.6)


def run(argv: list[str]) -> None:
    code = captree_main(argv)
    if code != 0:
        raise SystemExit(f"command failed ({code}): {' '.join(argv)}")


def make_fixture(tag: str, n: int, seed: int, weak_share: float) -> None:
    instances = [
        Instance(
            id=f"{tag}{i:04d}",
            input=f"fixture {tag} problem {i}: evaluate the expression.",
            reference_output=f"fixture {tag} solution {i}",
            benchmark_family="math",
        )
        for i in range(n)
    ]
    with tempfile.TemporaryDirectory() as tmp:
        work = Path(tmp)
        dataset = work / "dataset.jsonl"
        save_dataset(dataset, instances)
        artifact = work / "artifact"
        build = [
            "build", "--dataset", str(dataset), "--out", str(artifact),
            "--provider", "mock", "--seed", str(seed),
            "--cache-dir", str(work / "cache"),
        ]
        run(build)

        # plant weakness on the largest internal nodes until ~weak_share of
        # the dataset performs badly, so extraction differs across taus
        tree = json.loads((artifact / "tree.json").read_text())
        internal = sorted(
            (
                (node_id, set(rec["instance_ids"]))
                for node_id, rec in tree["nodes"].items()
                if rec["children"] and node_id != tree["root"]
            ),
            key=lambda kv: (-len(kv[1]), kv[0]),
        )
        weak_ids: set[str] = set()
        for _, ids in internal:
            if len(weak_ids) >= weak_share * n:
                break
            if not (ids & weak_ids):
                weak_ids |= ids
        rng = np.random.default_rng(seed)
        eval_path = work / "eval.jsonl"
        save_eval_result(
            eval_path,
            EvalResult(
                kind="binary",
                per_instance={
                    inst.id: int(rng.random() < (0.12 if inst.id in weak_ids else 0.82))
                    for inst in instances
                },
            ),
        )
        run(build + ["--eval", f"target:binary:{eval_path}"])

        profile_paths = []
        for tau in TAUS:
            out = artifact / "profiles" / f"extract_tau{tau:.2f}_below.json"
            run([
                "extract", "--artifact", str(artifact), "--model", "target",
                "--tau", str(tau), "--out", str(out),
            ])
            profile_paths += ["--profiles", str(out)]
        bundle = FIXTURES / f"bundle_{tag}.json"
        run([
            "export-ui", "--artifact", str(artifact), "--dataset", str(dataset),
            *profile_paths, "--out", str(bundle),
        ])
        extracted = json.loads(bundle.read_text())
        counts = {p["tau"]: len(p["node_ids"]) for p in extracted["profiles"]}
        print(f"{bundle.name}: {len(extracted['nodes'])} nodes, extractions per tau: {counts}")


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    make_fixture("a", n=70, seed=3, weak_share=0.25)
    make_fixture("b", n=120, seed=11, weak_share=0.35)
    make_fixture("c", n=180, seed=29, weak_share=0.2)


if __name__ == "__main__":
    main()
