"""Command-line entry point wiring the whole pipeline together.

Subcommands: ingest, generate, split, reward-score, evaluate, run, report,
serve. Usage errors exit with status 2 (argparse), operational failures
with status 1, success with 0. The master seed threads through every
generation path.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import GENERATOR_VERSION, curriculum, evalkit, gridsynth, icons, modelgw, reward, service


def _data_dir_default() -> str:
    return os.environ.get("ODDGRID_DATA_DIR", "data")


def cmd_ingest(args) -> int:
    cat_map = icons.load_category_map(args.category_map) if args.category_map else None
    result = icons.ingest_dir(args.dir, icons.Source(args.source), category_map=cat_map)
    for fail in result.failures:
        print(f"unparsable: {fail.file}: {fail.reason}", file=sys.stderr)
    path = icons.write_manifest(result.manifest, args.out_dir)
    counts = result.manifest.category_counts()
    print(f"ingested {len(result.manifest)} icons -> {path} (categories: {counts})")
    print(f"checksum: {result.manifest.checksum()}")
    return 0 if not result.failures else 1


def _plan_for(args) -> dict:
    plan = gridsynth.default_plan()
    if args.count is not None or args.types is not None:
        keys = (
            [t.strip() for t in args.types.split(",")]
            if args.types
            else list(gridsynth.TYPE_KEYS)
        )
        for key in keys:
            if key not in gridsynth.TYPE_KEYS:
                raise gridsynth.PlanInconsistency(f"unknown type {key!r}")
        total = args.count if args.count is not None else sum(
            c for t, c in plan[args.split] if t in keys
        )
        counts = gridsynth._apportion(total, len(keys))
        plan[args.split] = list(zip(keys, counts))
    return plan


def _render_chunk(manifest_dir: str, out_dir: str, objs: list[dict]) -> int:
    manifest = icons.load_manifest(manifest_dir)
    by_id = {a.id: a for a in manifest.assets}
    for obj in objs:
        rec = gridsynth.record_from_obj(obj)
        gridsynth.write_image(rec, by_id[rec.icon_id], out_dir)
    return len(objs)


def cmd_generate(args) -> int:
    icon_dir = Path(args.icons)
    manifest = icons.load_manifest(icon_dir)
    plan = _plan_for(args)
    records = gridsynth.build_dataset(
        args.seed,
        {args.split: manifest},
        plan=plan,
        splits=(args.split,),
        block_override=args.resolution_override,
        labeled=args.labeled,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = out_dir / f"manifest-{args.split}.jsonl"
    gridsynth.write_dataset_manifest(records, manifest_path, args.seed)
    print(f"{len(records)} records -> {manifest_path}")
    if not args.no_images:
        objs = [gridsynth.record_to_obj(r) for r in records]
        workers = max(1, args.workers)
        if workers == 1:
            _render_chunk(str(icon_dir), str(out_dir), objs)
        else:
            size = (len(objs) + workers - 1) // workers
            chunks = [objs[i : i + size] for i in range(0, len(objs), size)]
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [
                    pool.submit(_render_chunk, str(icon_dir), str(out_dir), c)
                    for c in chunks
                ]
                for f in futures:
                    f.result()
        print(f"rendered {len(records)} images under {out_dir / 'images' / args.split}")
    print(f"manifest checksum: {gridsynth.manifest_checksum(manifest_path)}")
    return 0


def cmd_split(args) -> int:
    _, records = gridsynth.load_dataset_manifest(args.train_manifest)
    scores = {r.id: curriculum.score(r) for r in records}
    plan = curriculum.partition(scores)
    curriculum.write_plan(plan, scores, args.out)
    print(
        f"curriculum plan -> {args.out} "
        f"(easy {len(plan.easy)}, medium {len(plan.medium)}, hard {len(plan.hard)})"
    )
    if args.streams_out:
        out = Path(args.streams_out)
        out.mkdir(parents=True, exist_ok=True)
        for step in (1, 2, 3):
            rng = curriculum.stream_rng(plan, step, args.seed)
            ids = curriculum.stage_stream(plan, step, rng)
            (out / f"stage{step}.txt").write_text("\n".join(ids) + "\n")
            print(f"stage {step}: {len(ids)} ids -> {out / f'stage{step}.txt'}")
    return 0


def cmd_reward_score(args) -> int:
    params = reward.RewardParams(lam=args.lam, beta=args.beta, omega=args.omega)
    n = reward.score_file(args.infile, args.out, params)
    print(f"scored {n} answers -> {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    _, records = gridsynth.load_dataset_manifest(args.manifest)
    preds = evalkit.load_predictions(args.predictions)
    labeled = (
        evalkit.load_predictions(args.labeled_predictions)
        if args.labeled_predictions
        else None
    )
    report = evalkit.evaluate(records, preds, labeled)
    Path(args.out).write_text(json.dumps(report.to_obj(), indent=2) + "\n")
    print(evalkit.format_report(report, name=args.name))
    print(f"\nreport -> {args.out}")
    return 0


def cmd_run(args) -> int:
    _, records = gridsynth.load_dataset_manifest(args.manifest)
    endpoint = modelgw.ModelEndpoint(
        base_url=args.endpoint,
        model_name=args.model,
        max_parallel=args.parallelism,
        temperature=args.temperature,
    )
    failures_path = Path(args.out).with_suffix(".failures.jsonl")
    n_failed = modelgw.run_benchmark(
        endpoint,
        records,
        args.data_dir,
        args.out,
        mode=args.mode,
        parallelism=args.parallelism,
        cache_dir=args.cache_dir,
        allow_partial=args.allow_partial,
        failures_path=failures_path,
    )
    print(f"predictions -> {args.out} ({len(records) - n_failed} ok, {n_failed} failed)")
    return 0


def cmd_report(args) -> int:
    if args.human:
        _, records = gridsynth.load_dataset_manifest(args.manifest)
        by_id = {r.id: r for r in records}
        sessions = list(service.load_sessions(Path(args.sessions_dir)).values())
        hr = service.human_report(sessions, by_id)
        print(json.dumps(hr.to_obj(), indent=2))
        return 0
    obj = json.loads(Path(args.report).read_text())
    report = evalkit.EvalReport(**obj)
    print(evalkit.format_report(report, name=args.name))
    return 0


def cmd_serve(args) -> int:
    _, records = gridsynth.load_dataset_manifest(args.manifest)
    svc = service.AnnotationService(
        records,
        data_dir=args.data_dir,
        sessions_dir=args.sessions_dir,
        static_dir=args.static_dir,
    )
    server = service.serve(svc, host=args.host, port=args.port)
    print(f"annotation service on http://{args.host}:{args.port} ({len(records)} stimuli)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="oddgrid", description=__doc__)
    p.add_argument("--version", action="version", version=GENERATOR_VERSION)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("ingest", help="normalize an icon directory into a manifest")
    sp.add_argument("--dir", required=True)
    sp.add_argument("--source", choices=[s.value for s in icons.Source], required=True)
    sp.add_argument("--category-map")
    sp.add_argument("--out-dir", default=_data_dir_default())
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("generate", help="build a dataset split (manifest + images)")
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--split", choices=list(gridsynth.SPLIT_BASES), required=True)
    sp.add_argument("--count", type=int)
    sp.add_argument("--types", help="comma-separated type keys, e.g. Color,2-Type")
    sp.add_argument("--resolution-override", type=int)
    sp.add_argument("--labeled", action="store_true")
    sp.add_argument("--icons", default=_data_dir_default())
    sp.add_argument("--out-dir", default=_data_dir_default())
    sp.add_argument("--no-images", action="store_true")
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("split", help="score difficulty and cut curriculum buckets")
    sp.add_argument("--train-manifest", required=True)
    sp.add_argument("--out", default="curriculum.jsonl")
    sp.add_argument("--streams-out")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_split)

    sp = sub.add_parser("reward-score", help="batch-score raw answers")
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--lambda", dest="lam", type=float, default=reward.DEFAULT_LAMBDA)
    sp.add_argument("--beta", type=float, default=reward.DEFAULT_BETA)
    sp.add_argument("--omega", type=float, default=reward.DEFAULT_OMEGA)
    sp.set_defaults(func=cmd_reward_score)

    sp = sub.add_parser("evaluate", help="score a predictions file against a manifest")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--predictions", required=True)
    sp.add_argument("--labeled-predictions")
    sp.add_argument("--out", default="report.json")
    sp.add_argument("--name", default="run")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("run", help="drive a model endpoint over a manifest")
    sp.add_argument("--endpoint", required=True)
    sp.add_argument("--model", required=True)
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--data-dir", default=_data_dir_default())
    sp.add_argument("--out", default="predictions.jsonl")
    sp.add_argument("--mode", choices=["grid", "grid_minimal"], default="grid")
    sp.add_argument("--parallelism", type=int, default=4)
    sp.add_argument("--temperature", type=float)
    sp.add_argument("--allow-partial", action="store_true")
    sp.add_argument("--cache-dir")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("report", help="pretty-print a report (model or human)")
    sp.add_argument("--report")
    sp.add_argument("--name", default="run")
    sp.add_argument("--human", action="store_true")
    sp.add_argument("--sessions-dir", default="sessions")
    sp.add_argument("--manifest")
    sp.set_defaults(func=cmd_report)

    sp = sub.add_parser("serve", help="run the annotation service")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--data-dir", default=_data_dir_default())
    sp.add_argument("--sessions-dir", default="sessions")
    sp.add_argument("--static-dir")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8765)
    sp.set_defaults(func=cmd_serve)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (
        gridsynth.PlanInconsistency,
        icons.EmptyDirectoryError,
        icons.CategoryCountViolation,
        curriculum.WrongCardinality,
        curriculum.InvalidStep,
        modelgw.TransportError,
        modelgw.AuthFailure,
        FileNotFoundError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
