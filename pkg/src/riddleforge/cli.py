"""Command-line pipeline: ingest -> augment -> benchmark -> eval / stats / mix.

Each stage is file-mediated so long runs are resumable, every output gets a
run-manifest sidecar with resolved flags, seeds, and input checksums, and
outputs are write-once unless --force is given.  Exit codes: 0 success,
1 validation failure, 2 I/O failure, 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from collections import Counter, deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import __version__
from .augment import (
    AugmentSummary,
    ImageTextRecord,
    MixSchedule,
    mix_stream,
    riddles_for_image,
    _image_groups,
)
from .benchmark import (
    BenchmarkConfig,
    HoldoutSpec,
    assemble_splits,
    benchmark_to_dict,
    load_benchmark,
    partition_holdout,
)
from .errors import RiddleforgeError
from .evalstats import (
    compute_corpus_stats,
    evaluate_report,
    format_report_text,
    load_scores,
    write_report,
)
from .extract import Caption, default_extraction_config, extract_entities, union_entity_sets
from .graph import IngestConfig, ingest_assertions, load_snapshot, save_snapshot
from .io import open_text, read_jsonl, sha256_file, write_jsonl
from .lexicon import load_relation_templates
from .linearize import default_linearize_config

ENV_SEED = "RIDDLEFORGE_SEED"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(64, f"{self.prog}: error: {message}\n")


def _default_seed() -> int:
    return int(os.environ.get(ENV_SEED, "0"))


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _check_overwrite(path: str, force: bool) -> None:
    if path != "-" and Path(path).exists() and not force:
        raise RiddleforgeError(f"{path} exists; pass --force to overwrite")


def _write_run_manifest(out_path: str, subcommand: str, args: argparse.Namespace,
                        started_at: float) -> None:
    if out_path == "-":
        return
    flags = {k: v for k, v in vars(args).items() if k != "func"}
    checksums = {}
    for key in ("assertions", "graph", "manifest", "riddles", "benchmark", "scores", "input", "holdout", "templates"):
        value = flags.get(key)
        if value and value != "-" and Path(str(value)).exists():
            checksums[str(value)] = sha256_file(str(value))
    manifest = {
        "subcommand": subcommand,
        "flags": flags,
        "seed": flags.get("seed"),
        "input_checksums": checksums,
        "tool_version": __version__,
        "started_at": started_at,
        "finished_at": time.time(),
    }
    with open(out_path + ".manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _linearize_config(args: argparse.Namespace):
    config = default_linearize_config()
    templates = getattr(args, "templates", None)
    if templates:
        config = replace(config, templates=load_relation_templates(templates))
    config = replace(config, tau=args.tau)
    if getattr(args, "suppress_co_entity", False):
        config = replace(config, suppress_co_entity=True)
    return config


def cmd_ingest(args: argparse.Namespace) -> int:
    _check_overwrite(args.out, args.force)
    config = IngestConfig(
        namespace=args.namespace,
        max_malformed_fraction=args.max_malformed,
        deduplicate=args.dedup,
    )
    with open_text(args.assertions) as fh:
        graph = ingest_assertions(fh, config)
    save_snapshot(graph, args.out)
    stats = graph.stats
    if stats:
        _log(f"ingest: {stats.lines_read} lines, kept {len(graph)} edges, "
             f"filtered {stats.filtered_out}, malformed {stats.malformed}")
    _log(f"ingest: {len(graph.nodes)} nodes -> {args.out}")
    return 0


# Worker state for parallel augment: each worker loads the snapshot once.
_worker_state: dict = {}


def _init_augment_worker(snapshot_path: str, tau: float, suppress_co_entity: bool,
                         templates_path: str | None, union_captions: bool,
                         held_out: frozenset[int]) -> None:
    config = default_linearize_config()
    if templates_path:
        config = replace(config, templates=load_relation_templates(templates_path))
    config = replace(config, tau=tau, suppress_co_entity=suppress_co_entity)
    _worker_state["graph"] = load_snapshot(snapshot_path)
    _worker_state["linearize_config"] = config
    _worker_state["union_captions"] = union_captions
    _worker_state["held_out"] = held_out


def _augment_chunk(groups: list[tuple[str, list[str]]]) -> tuple[list[dict], dict]:
    out: list[dict] = []
    counters: Counter = Counter()
    for image_id, captions in groups:
        riddles = riddles_for_image(
            image_id, captions, _worker_state["graph"],
            linearize_config=_worker_state["linearize_config"],
            union_captions=_worker_state["union_captions"],
            held_out_edge_ids=_worker_state["held_out"],
            counters=counters,
        )
        out.extend(r.to_record() for r in riddles)
    return out, dict(counters)


def _chunked(iterable, size):
    chunk = []
    for item in iterable:
        chunk.append(item)
        if len(chunk) == size:
            yield chunk
            chunk = []
    if chunk:
        yield chunk


def _bounded_ordered_map(pool, fn, items, window: int):
    """Like pool.map but with at most ``window`` chunks in flight, so the
    input stream is never materialized; results keep submission order."""
    pending = deque()
    items = iter(items)
    for item in items:
        pending.append(pool.submit(fn, item))
        if len(pending) >= window:
            yield pending.popleft().result()
    while pending:
        yield pending.popleft().result()


def cmd_augment(args: argparse.Namespace) -> int:
    _check_overwrite(args.out, args.force)
    if args.entities_out:
        if args.workers > 1:
            raise RiddleforgeError("--entities-out requires --workers 1")
        _check_overwrite(args.entities_out, args.force)
    graph = load_snapshot(args.graph)
    linearize_config = _linearize_config(args)
    held_out: frozenset[int] = frozenset()
    test_images: frozenset[str] = frozenset()
    if args.holdout:
        with open_text(args.holdout) as fh:
            spec = HoldoutSpec.from_dict(json.load(fh))
        held_out = spec.held_out_edge_ids
        test_images = spec.test_image_ids

    summary = AugmentSummary()
    extraction_config = default_extraction_config()

    def _groups():
        for image_id, captions in _image_groups(read_jsonl(args.manifest), summary):
            summary.captions_in += len(captions)
            if image_id in test_images:
                summary.skipped["test_image"] += 1
                continue
            summary.images_in += 1
            if summary.images_in % 10_000 == 0:
                _log(f"augment: {summary.images_in} images in, "
                     f"{summary.riddles_out} riddles out")
            yield image_id, captions

    entity_records: list[dict] = []

    def _records():
        if args.workers > 1:
            with ProcessPoolExecutor(
                max_workers=args.workers,
                initializer=_init_augment_worker,
                initargs=(args.graph, args.tau, args.suppress_co_entity,
                          args.templates, args.union_captions, held_out),
            ) as pool:
                chunks = _chunked(_groups(), 64)
                for chunk_out, counters in _bounded_ordered_map(pool, _augment_chunk, chunks,
                                                                window=args.workers * 4):
                    summary.riddles_out += len(chunk_out)
                    summary.skipped.update(counters)
                    yield from chunk_out
        else:
            for image_id, captions in _groups():
                riddles = riddles_for_image(
                    image_id, captions, graph,
                    extraction_config=extraction_config,
                    linearize_config=linearize_config,
                    union_captions=args.union_captions,
                    held_out_edge_ids=held_out,
                    counters=summary.skipped,
                )
                if args.entities_out:
                    sets = [extract_entities(Caption(image_id, text), graph, extraction_config)
                            for text in captions]
                    merged = union_entity_sets(image_id, sets)
                    entity_records.append(
                        {"image_id": image_id, "entities": sorted(merged.matched_entities)}
                    )
                summary.riddles_out += len(riddles)
                yield from (r.to_record() for r in riddles)

    write_jsonl(args.out, _records())
    if args.entities_out:
        write_jsonl(args.entities_out, entity_records)
    _log(f"augment: {json.dumps(summary.to_dict(), sort_keys=True)}")
    return 0


def cmd_benchmark(args: argparse.Namespace) -> int:
    _check_overwrite(args.out, args.force)
    graph = load_snapshot(args.graph)
    manifest = list(read_jsonl(args.manifest))
    if args.holdout and Path(args.holdout).exists():
        with open_text(args.holdout) as fh:
            spec = HoldoutSpec.from_dict(json.load(fh))
        _log(f"benchmark: reusing holdout spec from {args.holdout}")
    else:
        spec = partition_holdout(graph, manifest, args.edge_fraction,
                                 args.image_fraction, args.seed)
        holdout_out = args.holdout or (args.out + ".holdout.json")
        _check_overwrite(holdout_out, args.force)
        with open(holdout_out, "w", encoding="utf-8") as fh:
            json.dump(spec.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        _log(f"benchmark: wrote holdout spec -> {holdout_out}")
    config = BenchmarkConfig(queries_per_split=args.queries_per_split, tau=args.tau)
    linearize_config = _linearize_config(args)
    splits, entity_index, riddle_table = assemble_splits(
        spec, graph, manifest, config, seed=args.seed,
        linearize_config=linearize_config,
    )
    provenance = {
        "seed": args.seed,
        "tau": args.tau,
        "edge_fraction": spec.edge_fraction,
        "image_fraction": spec.image_fraction,
        "graph_snapshot_checksum": sha256_file(args.graph),
        "holdout": {"held_out_edges": len(spec.held_out_edge_ids),
                    "test_images": len(spec.test_image_ids)},
        "note": ("image-to-text negatives use the symmetric neighborhood "
                 "construction; tiers are recorded per negative"),
    }
    data = benchmark_to_dict(splits, entity_index, riddle_table, provenance)
    with open_text(args.out, "wt") as fh:
        json.dump(data, fh, indent=1, sort_keys=True)
        fh.write("\n")
    for name, split in sorted(splits.items()):
        _log(f"benchmark: {name}: {len(split.candidate_sets)} candidate sets, "
             f"skipped {dict(split.skipped)}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    if args.out:
        _check_overwrite(args.out, args.force)
    benchmark = load_benchmark(args.benchmark)
    scores = load_scores(args.scores)
    report = evaluate_report(benchmark, scores, tie_break=args.tie_break)
    print(format_report_text(report))
    if args.out:
        write_report(report, args.out)
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    if args.out:
        _check_overwrite(args.out, args.force)

    def _texts():
        for rec in read_jsonl(args.input):
            if args.mode == "relations":
                yield rec
            else:
                yield {"text": rec.get("text", rec.get("caption", ""))}

    stats = compute_corpus_stats(_texts(), mode=args.mode)
    payload = json.dumps(stats.to_dict(), indent=2, sort_keys=True)
    if args.out:
        with open_text(args.out, "wt") as fh:
            fh.write(payload + "\n")
    else:
        print(payload)
    return 0


def cmd_mix(args: argparse.Namespace) -> int:
    _check_overwrite(args.out, args.force)
    captions = [
        ImageTextRecord(rec["image_id"], rec["caption"], "caption")
        for rec in read_jsonl(args.manifest)
        if rec.get("image_id") and isinstance(rec.get("caption"), str)
    ]
    riddles = [
        ImageTextRecord(rec["image_id"], rec["text"], "riddle")
        for rec in read_jsonl(args.riddles)
    ]
    schedule = MixSchedule(p_start=args.p_start, p_end=args.p_end, total_steps=args.steps)
    stream = mix_stream(captions, riddles, schedule, args.batch_size, args.seed)
    n = write_jsonl(args.out, ({**rec.to_record(), "step": step} for step, rec in stream))
    _log(f"mix: wrote {n} records over {args.steps} steps -> {args.out}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="riddleforge", description=__doc__)
    parser.add_argument("--version", action="version", version=f"riddleforge {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="build a graph snapshot from an assertion dump")
    p.add_argument("--assertions", required=True, help="TSV dump path (.gz ok, - for stdin)")
    p.add_argument("--out", required=True, help="snapshot output path")
    p.add_argument("--namespace", default="/c/en/")
    p.add_argument("--max-malformed", type=float, default=0.25, dest="max_malformed")
    p.add_argument("--dedup", action="store_true", help="collapse parallel duplicates, keep max weight")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("augment", help="generate riddles for a caption manifest")
    p.add_argument("--graph", required=True, help="graph snapshot path")
    p.add_argument("--manifest", required=True, help="caption JSONL path")
    p.add_argument("--out", required=True, help="riddle JSONL output path")
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--union-captions", action="store_true", dest="union_captions")
    p.add_argument("--suppress-co-entity", action="store_true", dest="suppress_co_entity")
    p.add_argument("--holdout", help="holdout spec JSON; excludes held-out edges and test images")
    p.add_argument("--entities-out", dest="entities_out",
                   help="also write per-image matched-entity JSONL (single worker only)")
    p.add_argument("--templates", help="custom relation template TSV")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("benchmark", help="build the diagnostic retrieval benchmark")
    p.add_argument("--graph", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--edge-fraction", type=float, default=0.1, dest="edge_fraction")
    p.add_argument("--image-fraction", type=float, default=0.1, dest="image_fraction")
    p.add_argument("--queries-per-split", type=int, default=500, dest="queries_per_split")
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--templates", help="custom relation template TSV")
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--holdout", help="holdout spec JSON to reuse (created when absent)")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("eval", help="score a model's CSV against a benchmark")
    p.add_argument("--benchmark", required=True)
    p.add_argument("--scores", required=True)
    p.add_argument("--out", help="JSON report output path")
    p.add_argument("--tie-break", choices=("candidate_id", "positives_last"),
                   default="candidate_id", dest="tie_break")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stats", help="corpus distribution statistics")
    p.add_argument("--input", required=True, help="JSONL with text/caption records")
    p.add_argument("--mode", choices=("pos", "tokens", "lengths", "relations"), default="pos")
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("mix", help="schedule-annotated curriculum mix stream")
    p.add_argument("--manifest", required=True, help="caption JSONL")
    p.add_argument("--riddles", required=True, help="riddle JSONL from augment")
    p.add_argument("--out", required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--batch-size", type=int, required=True, dest="batch_size")
    p.add_argument("--p-start", type=float, default=0.5, dest="p_start")
    p.add_argument("--p-end", type=float, default=0.1, dest="p_end")
    p.add_argument("--seed", type=int, default=_default_seed())
    p.set_defaults(func=cmd_mix)

    for sp in sub.choices.values():
        sp.add_argument("--force", action="store_true", help="overwrite existing outputs")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    started_at = time.time()
    try:
        code = args.func(args)
    except (FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        _log(f"riddleforge {args.subcommand}: I/O error: {exc}")
        return 2
    except (RiddleforgeError, ValueError, KeyError, json.JSONDecodeError) as exc:
        _log(f"riddleforge {args.subcommand}: {exc}")
        return 1
    if code == 0:
        out = getattr(args, "out", None)
        if out:
            _write_run_manifest(out, args.subcommand, args, started_at)
    return code


if __name__ == "__main__":
    sys.exit(main())
