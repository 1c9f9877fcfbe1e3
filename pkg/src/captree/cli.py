"""Command-line entry point.

Subcommands: validate, split, build, extract, sweep, assess-low, assess-gt,
place, gen-data, baseline-textdiff, baseline-qualeval, export-ui, serve.

Exit codes: 0 success, 1 usage, 2 validation/input, 3 provider, 4 internal.
A JSON config file (--config) supplies flag defaults; explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import annotate as annotate_mod
from . import assess as assess_mod
from . import baselines as baselines_mod
from .artifacts import (
    RunManifest,
    export_ui_bundle,
    serve_bundle,
    write_curve_csv,
    write_json,
    write_manifest,
)
from .clustering import ClusteringConfig
from .core import (
    CaptreeError,
    ConfigurationError,
    EvalResult,
    GroundTruthSpec,
    Instance,
    ProviderError,
    ValidationError,
    WeaknessProfile,
    load_dataset,
    load_eval_result,
    save_annotations,
    save_dataset,
    save_embeddings,
    save_eval_result,
    split_profiling_test,
    validate_dataset,
)
from .extraction import ExtractionConfig, extract_nodes, profile_from_nodes, sweep_tau
from .gateway import LlmGateway, MockProvider, ProviderConfig, RemoteProvider
from .metrics import annotate_metrics, rank_models_per_node
from .prompts import PROMPT_VERSION
from .tree import CapabilityTree, build_tree, build_tree_hierarchical, describe_tree, load_tree, save_tree

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_PROVIDER = 3
EXIT_INTERNAL = 4


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors must exit 1, not argparse's 2
        raise _UsageError(message)


def _add_provider_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--provider", choices=("mock", "remote"), default="mock")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--mock-dim", type=int, default=64, help="embedding dim of the mock provider")
    sub.add_argument("--base-url", default="https://api.openai.com/v1")
    sub.add_argument("--api-key-env", default="OPENAI_API_KEY")
    sub.add_argument("--chat-model", default="gpt-4o-mini-2024-07-18")
    sub.add_argument("--embed-model", default="text-embedding-3-small")
    sub.add_argument("--max-parallel", type=int, default=8)
    sub.add_argument("--cache-dir", default=None)


def _gateway(args: argparse.Namespace) -> LlmGateway:
    config = ProviderConfig(
        base_url=args.base_url,
        api_key_env_name=args.api_key_env,
        chat_model=args.chat_model,
        embed_model=args.embed_model,
        max_parallel_requests=args.max_parallel,
        cache_dir=args.cache_dir,
    )
    if args.provider == "mock":
        provider = MockProvider(seed=args.seed, embed_dim=args.mock_dim)
    else:
        provider = RemoteProvider(config)
    return LlmGateway(provider, config)


def _provider_tag(args: argparse.Namespace) -> str:
    return f"mock(seed={args.seed})" if args.provider == "mock" else f"remote({args.base_url})"


def _family_of(instances: list[Instance]) -> str:
    families = {inst.benchmark_family for inst in instances}
    if len(families) != 1:
        raise ValidationError(f"dataset mixes benchmark families {sorted(families)}")
    return families.pop()


def _load_profiles(path: str | Path) -> list[WeaknessProfile]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(payload, dict) and "profiles" in payload:
        payload = payload["profiles"]
    if isinstance(payload, dict):
        payload = [payload]
    return [WeaknessProfile.from_json(obj) for obj in payload]


def _artifact_tree(artifact: str | Path) -> CapabilityTree:
    directory = Path(artifact)
    tree_path = directory / "tree.json"
    if not tree_path.exists():
        raise ValidationError(f"no tree.json under {directory}")
    return load_tree(tree_path, directory / "centroids.bin")


def _parse_eval_specs(specs: list[str]) -> list[tuple[str, str, str]]:
    """NAME:KIND:PATH triples from the repeatable --eval flag."""
    parsed = []
    for spec in specs:
        parts = spec.split(":", 2)
        if len(parts) != 3:
            raise _UsageError(f"--eval expects NAME:KIND:PATH, got {spec!r}")
        name, kind, path = parts
        if kind not in ("binary", "judged_pair", "arena"):
            raise _UsageError(f"--eval kind must be binary|judged_pair|arena, got {kind!r}")
        parsed.append((name, kind, path))
    return parsed


def _parse_grid(spec: str) -> list[float]:
    """START:STOP:STEP inclusive grid, e.g. 0:1:0.01."""
    try:
        start, stop, step = (float(part) for part in spec.split(":"))
    except ValueError:
        raise _UsageError(f"--grid expects START:STOP:STEP, got {spec!r}") from None
    if step <= 0 or stop < start:
        raise _UsageError("--grid needs step > 0 and stop >= start")
    count = int(round((stop - start) / step))
    return [round(start + i * step, 10) for i in range(count + 1) if start + i * step <= stop + 1e-9]


# ---------------------------------------------------------------------------
# Subcommand implementations
# ---------------------------------------------------------------------------


def cmd_validate(args) -> int:
    instances = load_dataset(args.dataset)
    eval_result = load_eval_result(args.eval, args.kind) if args.eval else None
    report = validate_dataset(instances, eval_result)
    if report.ok:
        print(f"OK: {len(instances)} instances")
        return EXIT_OK
    for violation in report.violations:
        print(f"violation: {violation}")
    return EXIT_VALIDATION


def cmd_split(args) -> int:
    instances = load_dataset(args.dataset)
    profiling, test = split_profiling_test(
        instances, (args.profiling_size, args.test_size), args.seed
    )
    save_dataset(args.out_profiling, profiling)
    save_dataset(args.out_test, test)
    print(f"wrote {len(profiling)} profiling / {len(test)} test instances")
    return EXIT_OK


def cmd_build(args) -> int:
    started = time.time()
    instances = load_dataset(args.dataset)
    report = validate_dataset(instances)
    if not report.ok:
        raise ValidationError("; ".join(report.violations))
    family = _family_of(instances)
    gateway = _gateway(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    run = annotate_mod.annotate_all(instances, gateway)
    embeddings = annotate_mod.embed_all(run.annotations, gateway)
    save_annotations(out / "annotations.jsonl", run.annotations)
    save_embeddings(out / "embeddings.bin", embeddings)

    if args.method == "hierarchical":
        tree = build_tree_hierarchical(instances, embeddings)
    else:
        config = ClusteringConfig(k_max=args.k_max, seed=args.seed)
        tree = build_tree(instances, embeddings, config)
    tree = describe_tree(tree, run.annotations, gateway, family)

    eval_inputs = {}
    for name, kind, path in _parse_eval_specs(args.eval or []):
        if not Path(path).exists():
            raise ValidationError(f"eval file not found: {path}")
        eval_result = load_eval_result(path, kind)
        eval_inputs[name] = path
        if kind == "arena":
            tree = rank_models_per_node(tree, eval_result, min_comparisons=args.min_comparisons)
        else:
            tree = annotate_metrics(tree, eval_result, name)
    tree.check_partition()
    save_tree(tree, out / "tree.json", out / "centroids.bin")

    write_manifest(
        out,
        RunManifest(
            command="build",
            config={
                "method": args.method,
                "k_max": args.k_max,
                "min_comparisons": args.min_comparisons,
            },
            seeds={"pipeline": args.seed},
            inputs={"dataset": str(args.dataset), **eval_inputs},
            outputs={"tree": "tree.json", "centroids": "centroids.bin"},
            prompt_versions={"pipeline": PROMPT_VERSION},
            provider=_provider_tag(args),
        ),
    )
    print(
        f"built {tree.method} tree: {len(tree)} nodes, {len(tree.leaves())} leaves "
        f"({time.time() - started:.1f}s)"
    )
    return EXIT_OK


def cmd_extract(args) -> int:
    tree = _artifact_tree(args.artifact)
    config = ExtractionConfig(
        tau=args.tau,
        alpha=args.alpha,
        min_node_size=args.sigma1,
        min_child_size=args.sigma2,
        direction=args.direction,
    )
    node_ids = extract_nodes(tree, args.model, config)
    direction = "weakness" if args.direction == "below" else "strength"
    profile = profile_from_nodes(tree, node_ids, args.tau, direction)
    out = Path(args.out) if args.out else Path(args.artifact) / "profiles" / (
        f"extract_tau{args.tau:.2f}_{args.direction}.json"
    )
    write_json(out, profile.to_json())
    print(f"extracted {len(node_ids)} nodes -> {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    tree = _artifact_tree(args.artifact)
    grid = _parse_grid(args.grid) if args.grid else None
    profiles = sweep_tau(
        tree,
        args.model,
        grid=grid,
        alpha=args.alpha,
        min_node_size=args.sigma1,
        min_child_size=args.sigma2,
        direction=args.direction,
    )
    out = Path(args.out) if args.out else Path(args.artifact) / "profiles" / f"sweep_{args.direction}.json"
    write_json(out, {"profiles": [p.to_json() for p in profiles]})
    print(f"{len(profiles)} distinct profiles -> {out}")
    return EXIT_OK


def cmd_assess_low(args) -> int:
    profiles = _load_profiles(args.profiles)
    test_instances = load_dataset(args.test_dataset)
    f = load_eval_result(args.test_eval, args.kind)
    gateway = _gateway(args)
    descriptions = [d for p in profiles for d in p.descriptions()]
    index = assess_mod.build_association_index(descriptions, test_instances, gateway)
    curve_m, curve_n = assess_mod.low_performance_curves(profiles, f, index, max_profile_size=args.max_m)
    out_dir = Path(args.out_dir)
    write_json(out_dir / "association_index.json", index.to_json())
    write_curve_csv(out_dir / "low_performance_m.csv", curve_m)
    write_curve_csv(out_dir / "low_performance_n.csv", curve_n)
    write_json(
        out_dir / "low_performance.json",
        {
            "profile_size_curve": [{"x": p.x, "y": p.y} for p in curve_m],
            "covered_instances_curve": [{"x": p.x, "y": p.y} for p in curve_n],
        },
    )
    print(f"low-performance curves ({len(curve_m)}/{len(curve_n)} points) -> {out_dir}")
    return EXIT_OK


def cmd_assess_gt(args) -> int:
    instances = load_dataset(args.dataset)
    planted = json.loads(Path(args.weaknesses).read_text(encoding="utf-8"))
    if not isinstance(planted, list) or not all(isinstance(w, str) for w in planted):
        raise ValidationError("--weaknesses must be a JSON list of capability strings")
    gateway = _gateway(args)
    tree = _artifact_tree(args.artifact)

    planted_index = assess_mod.build_association_index(planted, instances, gateway)
    association = {
        inst.id: frozenset(
            i for i, cap in enumerate(planted) if inst.id in planted_index.of(cap)
        )
        for inst in instances
    }
    spec = GroundTruthSpec(
        weaknesses=planted,
        base_probability=args.p,
        decrease_rate=args.d,
        association=association,
        seed=args.seed,
    )
    synthetic = assess_mod.generate_synthetic_eval(spec, instances, kind=args.kind)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_eval_result(out_dir / "synthetic_eval.jsonl", synthetic)

    tree = annotate_metrics(tree, synthetic, args.model)
    profiles = sweep_tau(tree, args.model)
    write_json(out_dir / "sweep_synthetic.json", {"profiles": [p.to_json() for p in profiles]})

    test_instances = load_dataset(args.test_dataset) if args.test_dataset else instances
    descriptions = [d for p in profiles for d in p.descriptions()] + planted
    index = assess_mod.build_association_index(descriptions, test_instances, gateway)
    curve = assess_mod.f1_curve(profiles, planted, index, max_profile_size=args.max_m)
    rows = []
    for profile in profiles:
        if not profile.items:
            continue
        scores = assess_mod.ground_truth_scores(profile.descriptions(), planted, index)
        rows.append(
            {
                "tau": profile.tau,
                "size": len(profile),
                "precision": scores.precision,
                "recall": scores.recall,
                "f1": scores.f1,
            }
        )
    write_curve_csv(out_dir / "f1_curve.csv", curve)
    write_json(
        out_dir / "ground_truth.json",
        {
            "base_probability": args.p,
            "decrease_rate": args.d,
            "seed": args.seed,
            "profiles": rows,
            "f1_curve": [{"x": p.x, "y": p.y} for p in curve],
        },
    )
    best = max((r["f1"] for r in rows), default=0.0)
    print(f"ground-truth assessment: {len(rows)} profiles, best F1 {best:.3f} -> {out_dir}")
    return EXIT_OK


def cmd_place(args) -> int:
    tree = _artifact_tree(args.artifact)
    instances = load_dataset(args.dataset)
    gateway = _gateway(args)
    run = annotate_mod.annotate_all(instances, gateway)
    embeddings = annotate_mod.embed_all(run.annotations, gateway)
    by_id = annotate_mod.embeddings_by_id(embeddings)
    placements = {iid: assess_mod.place_instance(tree, vec) for iid, vec in sorted(by_id.items())}
    out_dir = Path(args.out_dir)
    write_json(out_dir / "placements.json", placements)
    message = f"placed {len(placements)} instances -> {out_dir}"

    if args.profiles and args.test_eval:
        profiles = _load_profiles(args.profiles)
        f = load_eval_result(args.test_eval, args.kind)
        rows = assess_mod.weakness_instance_performance(tree, profiles, placements, f)
        write_json(
            out_dir / "placement_performance.json",
            [
                {"tau": r.tau, "count": r.count, "value": r.value, "instance_ids": r.instance_ids}
                for r in rows
            ],
        )
        message += f" (+ per-threshold performance over {len(rows)} profiles)"
    print(message)
    return EXIT_OK


def cmd_gen_data(args) -> int:
    instances = load_dataset(args.dataset)
    profiles = _load_profiles(args.profile)
    if args.tau is not None:
        matching = [p for p in profiles if p.tau is not None and abs(p.tau - args.tau) < 1e-9]
        if not matching:
            raise ValidationError(f"no profile with tau={args.tau} in {args.profile}")
        profile = matching[0]
    else:
        non_empty = [p for p in profiles if p.items]
        if not non_empty:
            raise ValidationError(f"{args.profile} holds no non-empty profile")
        profile = non_empty[0]
    tree = None
    if args.artifact:
        tree = _artifact_tree(args.artifact)
    gateway = _gateway(args)
    texts = assess_mod.generate_data_inputs(
        profile,
        instances,
        args.count,
        gateway,
        family=_family_of(instances),
        seed=args.seed,
        tree=tree,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        for text in texts:
            fh.write(json.dumps({"input": text}, ensure_ascii=False) + "\n")
    print(f"generated {len(texts)} data inputs -> {out}")
    return EXIT_OK


def cmd_baseline_textdiff(args) -> int:
    instances = load_dataset(args.dataset)
    eval_result = load_eval_result(args.eval, args.kind)
    gateway = _gateway(args)
    run = baselines_mod.textdiff_profile(
        instances, eval_result, args.profile_size, gateway, seed=args.seed
    )
    out_dir = Path(args.out_dir)
    write_json(
        out_dir / "candidates.json",
        {
            "candidates": run.candidates,
            "performance": run.candidate_performance,
        },
    )
    write_json(out_dir / "association_index.json", run.index.to_json())
    write_json(out_dir / "profile.json", run.profile.to_json())
    print(f"textdiff profile of {len(run.profile)} weaknesses -> {out_dir}")
    return EXIT_OK


def cmd_baseline_qualeval(args) -> int:
    instances = load_dataset(args.dataset)
    eval_result = load_eval_result(args.eval, args.kind)
    gateway = _gateway(args)
    config = baselines_mod.QualEvalConfig()
    capabilities = baselines_mod.qualeval_derive_capabilities(
        instances, gateway, config, seed=args.seed
    )
    matrix = baselines_mod.qualeval_score(instances, capabilities, gateway)
    assignment = baselines_mod.qualeval_assign(matrix, config)
    profile = baselines_mod.qualeval_profile(matrix, assignment, eval_result, args.profile_size)
    out_dir = Path(args.out_dir)
    write_json(out_dir / "capabilities.json", capabilities)
    write_json(
        out_dir / "relevance_matrix.json",
        {
            "instance_ids": matrix.instance_ids,
            "capabilities": matrix.capabilities,
            "scores": matrix.scores.tolist(),
            "flagged_cells": [[iid, col] for iid, col in matrix.flagged_cells],
        },
    )
    write_json(out_dir / "assignment.json", {iid: list(cols) for iid, cols in assignment.items()})
    write_json(out_dir / "profile.json", profile.to_json())
    print(f"qualeval profile of {len(profile)} weaknesses -> {out_dir}")
    return EXIT_OK


def cmd_export_ui(args) -> int:
    tree = _artifact_tree(args.artifact)
    instances = load_dataset(args.dataset)
    profiles: list[WeaknessProfile] = []
    for path in args.profiles or []:
        profiles.extend(_load_profiles(path))
    bundle = export_ui_bundle(tree, instances, profiles)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(
        json.dumps(bundle, sort_keys=True, indent=1, ensure_ascii=False), encoding="utf-8"
    )
    print(f"bundle with {len(bundle['nodes'])} nodes -> {out}")
    return EXIT_OK


def cmd_serve(args) -> int:
    try:
        server = serve_bundle(args.bundle, args.port, args.ui_dir)
    except OSError as exc:
        raise ValidationError(f"cannot bind port {args.port}: {exc}") from exc
    print(f"serving {args.bundle} on http://127.0.0.1:{args.port}/bundle.json (Ctrl-C stops)")
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        server.shutdown()
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="captree", description=__doc__)
    parser.add_argument("--config", default=None, help="JSON file of flag defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a dataset (and optional eval file)")
    p.add_argument("--dataset", required=True)
    p.add_argument("--eval", default=None)
    p.add_argument("--kind", choices=("binary", "judged_pair", "arena"), default="binary")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("split", help="random profiling/test split")
    p.add_argument("--dataset", required=True)
    p.add_argument("--profiling-size", type=int, required=True)
    p.add_argument("--test-size", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-profiling", required=True)
    p.add_argument("--out-test", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("build", help="annotate, embed, build, describe, and score a tree")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="artifact directory")
    p.add_argument("--eval", action="append", help="NAME:KIND:PATH, repeatable")
    p.add_argument("--method", choices=("kmeans", "hierarchical"), default="kmeans")
    p.add_argument("--k-max", type=int, default=10)
    p.add_argument("--min-comparisons", type=int, default=20)
    _add_provider_flags(p)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("extract", help="extract significant nodes at one threshold")
    p.add_argument("--artifact", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--sigma1", type=int, default=5)
    p.add_argument("--sigma2", type=int, default=20)
    p.add_argument("--direction", choices=("below", "above"), default="below")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("sweep", help="sweep thresholds, dedupe profiles")
    p.add_argument("--artifact", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--grid", default=None, help="START:STOP:STEP (default 0:1:0.01)")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--sigma1", type=int, default=5)
    p.add_argument("--sigma2", type=int, default=20)
    p.add_argument("--direction", choices=("below", "above"), default="below")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("assess-low", help="low-performance identification curves")
    p.add_argument("--profiles", required=True, help="sweep output JSON")
    p.add_argument("--test-dataset", required=True)
    p.add_argument("--test-eval", required=True)
    p.add_argument("--kind", choices=("binary", "judged_pair"), default="binary")
    p.add_argument("--max-m", type=int, default=20)
    p.add_argument("--out-dir", required=True)
    _add_provider_flags(p)
    p.set_defaults(func=cmd_assess_low)

    p = sub.add_parser("assess-gt", help="ground-truth weakness assessment on synthetic evals")
    p.add_argument("--artifact", required=True)
    p.add_argument("--dataset", required=True, help="profiling set the tree was built on")
    p.add_argument("--weaknesses", required=True, help="JSON list of planted capability strings")
    p.add_argument("--p", type=float, default=0.7)
    p.add_argument("--d", type=float, default=0.2)
    p.add_argument("--kind", choices=("binary", "judged_pair"), default="binary")
    p.add_argument("--model", default="synthetic")
    p.add_argument("--test-dataset", default=None, help="separate test set (default: profiling set)")
    p.add_argument("--max-m", type=int, default=20)
    p.add_argument("--out-dir", required=True)
    _add_provider_flags(p)
    p.set_defaults(func=cmd_assess_gt)

    p = sub.add_parser("place", help="place test instances by centroid descent")
    p.add_argument("--artifact", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--profiles", default=None, help="sweep output for per-threshold performance")
    p.add_argument("--test-eval", default=None)
    p.add_argument("--kind", choices=("binary", "judged_pair"), default="binary")
    p.add_argument("--out-dir", required=True)
    _add_provider_flags(p)
    p.set_defaults(func=cmd_place)

    p = sub.add_parser("gen-data", help="weakness-guided data-input generation")
    p.add_argument("--profile", required=True, help="profile JSON (single or sweep output)")
    p.add_argument("--tau", type=float, default=None, help="pick this threshold from a sweep file")
    p.add_argument("--dataset", required=True, help="profiling set for in-context examples")
    p.add_argument("--artifact", default=None, help="tree artifact for node-linked examples")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--out", required=True)
    _add_provider_flags(p)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("baseline-textdiff", help="contrastive diagnostic baseline")
    p.add_argument("--dataset", required=True)
    p.add_argument("--eval", required=True)
    p.add_argument("--kind", choices=("binary", "judged_pair"), default="binary")
    p.add_argument("--profile-size", type=int, default=20)
    p.add_argument("--out-dir", required=True)
    _add_provider_flags(p)
    p.set_defaults(func=cmd_baseline_textdiff)

    p = sub.add_parser("baseline-qualeval", help="flat categorize/score/assign baseline")
    p.add_argument("--dataset", required=True)
    p.add_argument("--eval", required=True)
    p.add_argument("--kind", choices=("binary", "judged_pair"), default="binary")
    p.add_argument("--profile-size", type=int, default=20)
    p.add_argument("--out-dir", required=True)
    _add_provider_flags(p)
    p.set_defaults(func=cmd_baseline_qualeval)

    p = sub.add_parser("export-ui", help="export the browser-explorer bundle")
    p.add_argument("--artifact", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--profiles", action="append", help="profile JSON, repeatable")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_ui)

    p = sub.add_parser("serve", help="serve a bundle (and UI assets) over HTTP")
    p.add_argument("--bundle", required=True)
    p.add_argument("--port", type=int, default=8377)
    p.add_argument("--ui-dir", default=None)
    p.set_defaults(func=cmd_serve)

    return parser


def _apply_config_file(parser: _Parser, argv: list[str]) -> None:
    if "--config" not in argv:
        return
    path = argv[argv.index("--config") + 1]
    try:
        values = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise _UsageError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(values, dict):
        raise _UsageError("config file must hold a JSON object of flag defaults")
    defaults = {key.replace("-", "_"): value for key, value in values.items()}
    command = next((a for a in argv if not a.startswith("-") and a != path), None)
    for group_action in parser._subparsers._group_actions:  # noqa: SLF001
        if not hasattr(group_action, "choices") or command not in (group_action.choices or {}):
            continue
        subparser = group_action.choices[command]
        for action in subparser._actions:  # noqa: SLF001
            if action.dest in defaults:
                subparser.set_defaults(**{action.dest: defaults[action.dest]})
                action.required = False


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValidationError, ConfigurationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ProviderError as exc:
        print(f"provider error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except CaptreeError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
