#!/usr/bin/env python3
"""End-to-end offline demo: synthesize a small benchmark, build a described
capability tree with the mock provider, extract weaknesses at one threshold,
sweep thresholds, and export the browser bundle.

Usage:
    python3 scripts/run_mock_pipeline.py --out /tmp/captree-demo --n 120 --seed 7
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from captree.cli import main as captree_main
from captree.core import EvalResult, Instance, save_dataset, save_eval_result


def synthesize_dataset(n: int) -> list[Instance]:
    topics = ["algebra", "geometry", "combinatorics", "number theory", "calculus"]
    return [
        Instance(
            id=f"demo{i:04d}",
            input=f"{topics[i % len(topics)]} exercise {i}: compute the requested quantity.",
            reference_output=f"worked {topics[i % len(topics)]} solution {i}",
            benchmark_family="math",
        )
        for i in range(n)
    ]


def plant_weak_node(artifact: Path, instances: list[Instance], seed: int) -> tuple[EvalResult, str]:
    """Simulate a model that is weak on one of the tree's capability clusters."""
    tree = json.loads((artifact / "tree.json").read_text())
    internal = [
        (node_id, record)
        for node_id, record in tree["nodes"].items()
        if record["children"] and node_id != tree["root"]
    ]
    in_band = [kv for kv in internal if 8 <= len(kv[1]["instance_ids"]) <= len(instances) // 2]
    candidates = sorted(in_band or internal, key=lambda kv: (-len(kv[1]["instance_ids"]), kv[0]))
    node_id, record = candidates[0]
    weak_ids = set(record["instance_ids"])
    rng = np.random.default_rng(seed)
    per_instance = {
        inst.id: int(rng.random() < (0.1 if inst.id in weak_ids else 0.8))
        for inst in instances
    }
    return EvalResult(kind="binary", per_instance=per_instance), record["description"]


def run(argv: list[str]) -> int:
    code = captree_main(argv)
    if code != 0:
        raise SystemExit(f"command failed ({code}): {' '.join(argv)}")
    return code


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="/tmp/captree-demo")
    parser.add_argument("--n", type=int, default=120)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--tau", type=float, default=0.4)
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    instances = synthesize_dataset(args.n)
    dataset = out / "dataset.jsonl"
    eval_path = out / "eval.jsonl"
    save_dataset(dataset, instances)

    artifact = out / "artifact"
    build_argv = [
        "build", "--dataset", str(dataset), "--out", str(artifact),
        "--provider", "mock", "--seed", str(args.seed),
        "--cache-dir", str(out / "cache"),
    ]
    run(build_argv)  # first pass: discover the capability clusters
    eval_result, weak_description = plant_weak_node(artifact, instances, args.seed)
    save_eval_result(eval_path, eval_result)
    print(f"\nplanted weakness on: {weak_description!r}\n")
    run(build_argv + ["--eval", f"demo-model:binary:{eval_path}"])  # warm cache: fast
    run([
        "extract", "--artifact", str(artifact), "--model", "demo-model",
        "--tau", str(args.tau),
    ])
    run(["sweep", "--artifact", str(artifact), "--model", "demo-model"])
    run([
        "export-ui", "--artifact", str(artifact), "--dataset", str(dataset),
        "--profiles", str(artifact / "profiles" / f"extract_tau{args.tau:.2f}_below.json"),
        "--profiles", str(artifact / "profiles" / "sweep_below.json"),
        "--out", str(artifact / "bundle.json"),
    ])

    profile = json.loads(
        (artifact / "profiles" / f"extract_tau{args.tau:.2f}_below.json").read_text()
    )
    print(f"\nweaknesses extracted at tau={args.tau}:")
    for item in profile["items"]:
        print(f"  - {item['description']}  (node {item['node_id']})")
    print(f"\nartifacts under {artifact}")
    print(f"explore with: captree serve --bundle {artifact / 'bundle.json'} --port 8377")


if __name__ == "__main__":
    main()
