from __future__ import annotations

import csv
import gzip
import hashlib
import json
from pathlib import Path

import pytest

from riddleforge.cli import main
from riddleforge.io import read_jsonl

DATA_DIR = Path(__file__).parent / "data"


def sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(path: Path, rows: list[tuple[str, str]]) -> None:
    with path.open("w") as fh:
        for image_id, caption in rows:
            fh.write(json.dumps({"image_id": image_id, "caption": caption}) + "\n")


@pytest.fixture
def small_pipeline(tmp_path):
    snap = tmp_path / "g.snap"
    manifest = tmp_path / "caps.jsonl"
    write_manifest(manifest, [
        ("img1", "a lemon on a table"),
        ("img2", "a net near a harbor"),
        ("img3", "two lemons in a bowl"),
    ])
    code = main(["ingest", "--assertions", str(DATA_DIR / "assertions_small.tsv"),
                 "--out", str(snap)])
    assert code == 0
    return snap, manifest


class TestIngestAugment:
    def test_pipeline_produces_valid_riddles(self, small_pipeline, tmp_path):
        snap, manifest = small_pipeline
        out = tmp_path / "riddles.jsonl"
        code = main(["augment", "--graph", str(snap), "--manifest", str(manifest),
                     "--out", str(out)])
        assert code == 0
        records = list(read_jsonl(out))
        assert records, "lemon images should yield riddles"
        for rec in records:
            assert set(rec) == {"image_id", "text", "edge_id", "hidden_side",
                                "subject", "substitution", "weight", "relation"}
            assert rec["weight"] > 0.5
        texts = {r["text"] for r in records}
        assert "this item is sour" in texts
        assert not [r for r in records if r["image_id"] == "img2"]  # 0.3 edge below tau

    def test_run_manifest_sidecar(self, small_pipeline, tmp_path):
        snap, manifest = small_pipeline
        out = tmp_path / "riddles.jsonl"
        main(["augment", "--graph", str(snap), "--manifest", str(manifest),
              "--out", str(out)])
        sidecar = json.loads((tmp_path / "riddles.jsonl.manifest.json").read_text())
        assert sidecar["subcommand"] == "augment"
        assert str(snap) in sidecar["input_checksums"]
        assert sidecar["tool_version"]

    def test_rerun_identical_output(self, small_pipeline, tmp_path):
        snap, manifest = small_pipeline
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        main(["augment", "--graph", str(snap), "--manifest", str(manifest), "--out", str(a)])
        main(["augment", "--graph", str(snap), "--manifest", str(manifest), "--out", str(b)])
        assert sha(a) == sha(b)

    def test_refuses_overwrite_without_force(self, small_pipeline, tmp_path, capsys):
        snap, manifest = small_pipeline
        out = tmp_path / "riddles.jsonl"
        assert main(["augment", "--graph", str(snap), "--manifest", str(manifest),
                     "--out", str(out)]) == 0
        assert main(["augment", "--graph", str(snap), "--manifest", str(manifest),
                     "--out", str(out)]) == 1
        assert "--force" in capsys.readouterr().err
        assert main(["augment", "--graph", str(snap), "--manifest", str(manifest),
                     "--out", str(out), "--force"]) == 0

    def test_gzip_transparent(self, tmp_path):
        gz = tmp_path / "assertions.tsv.gz"
        gz.write_bytes(gzip.compress((DATA_DIR / "assertions_small.tsv").read_bytes()))
        snap = tmp_path / "g.snap"
        assert main(["ingest", "--assertions", str(gz), "--out", str(snap)]) == 0
        assert snap.exists()

    def test_missing_input_is_io_error(self, tmp_path):
        assert main(["ingest", "--assertions", str(tmp_path / "nope.tsv"),
                     "--out", str(tmp_path / "g.snap")]) == 2

    def test_usage_error_exit_64(self):
        with pytest.raises(SystemExit) as exc:
            main(["augment"])  # missing required flags
        assert exc.value.code == 64
        with pytest.raises(SystemExit) as exc:
            main(["not-a-command"])
        assert exc.value.code == 64

    def test_entities_out(self, small_pipeline, tmp_path):
        snap, manifest = small_pipeline
        out = tmp_path / "riddles.jsonl"
        ents = tmp_path / "entities.jsonl"
        main(["augment", "--graph", str(snap), "--manifest", str(manifest),
              "--out", str(out), "--entities-out", str(ents)])
        records = {r["image_id"]: r["entities"] for r in read_jsonl(ents)}
        assert records["img1"] == ["/c/en/lemon"]
        assert records["img3"] == ["/c/en/lemon"]  # plural lemmatized

    def test_worker_count_invariance(self, tmp_path, corpus, capsys):
        snap = tmp_path / "g.snap"
        assert main(["ingest", "--assertions", str(corpus.assertions_path),
                     "--out", str(snap), "--max-malformed", "1.0"]) == 0
        manifest = tmp_path / "caps200.jsonl"
        with open(corpus.manifest_path) as fh:
            manifest.write_text("".join(fh.readlines()[:200]))
        one, two = tmp_path / "w1.jsonl", tmp_path / "w2.jsonl"

        def summary_of(err: str) -> dict:
            line = next(l for l in err.splitlines() if l.startswith("augment: {"))
            return json.loads(line.removeprefix("augment: "))

        capsys.readouterr()
        assert main(["augment", "--graph", str(snap), "--manifest", str(manifest),
                     "--out", str(one), "--workers", "1"]) == 0
        serial = summary_of(capsys.readouterr().err)
        assert main(["augment", "--graph", str(snap), "--manifest", str(manifest),
                     "--out", str(two), "--workers", "2"]) == 0
        parallel = summary_of(capsys.readouterr().err)
        assert sha(one) == sha(two)
        assert serial == parallel  # including per-reason skip counts


class TestMix:
    def test_mix_stream_schema_and_determinism(self, small_pipeline, tmp_path):
        snap, manifest = small_pipeline
        riddles = tmp_path / "riddles.jsonl"
        main(["augment", "--graph", str(snap), "--manifest", str(manifest),
              "--out", str(riddles)])
        a, b = tmp_path / "mix_a.jsonl", tmp_path / "mix_b.jsonl"
        args = ["--manifest", str(manifest), "--riddles", str(riddles),
                "--steps", "20", "--batch-size", "4", "--seed", "5"]
        assert main(["mix", *args, "--out", str(a)]) == 0
        assert main(["mix", *args, "--out", str(b)]) == 0
        assert sha(a) == sha(b)
        records = list(read_jsonl(a))
        assert len(records) == 80
        assert {r["step"] for r in records} == set(range(20))
        assert {r["origin"] for r in records} == {"caption", "riddle"}

    def test_mix_invalid_p_is_validation_error(self, small_pipeline, tmp_path):
        snap, manifest = small_pipeline
        riddles = tmp_path / "r.jsonl"
        main(["augment", "--graph", str(snap), "--manifest", str(manifest),
              "--out", str(riddles)])
        assert main(["mix", "--manifest", str(manifest), "--riddles", str(riddles),
                     "--steps", "5", "--batch-size", "4", "--p-start", "1.5",
                     "--out", str(tmp_path / "m.jsonl")]) == 1


class TestStats:
    def test_stats_pos_mode(self, small_pipeline, tmp_path, capsys):
        _, manifest = small_pipeline
        assert main(["stats", "--input", str(manifest), "--mode", "pos"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["mode"] == "pos"
        assert abs(sum(payload["pos_histogram"].values()) - 1.0) < 1e-9

    def test_stats_lengths_to_file(self, small_pipeline, tmp_path):
        _, manifest = small_pipeline
        out = tmp_path / "stats.json"
        assert main(["stats", "--input", str(manifest), "--mode", "lengths",
                     "--out", str(out)]) == 0
        data = json.loads(out.read_text())
        assert data["count"] == 3


@pytest.fixture(scope="module")
def cli_benchmark(tmp_path_factory, corpus):
    root = tmp_path_factory.mktemp("cli_bench")
    snap = root / "g.snap"
    assert main(["ingest", "--assertions", str(corpus.assertions_path),
                 "--out", str(snap), "--max-malformed", "1.0"]) == 0
    bench = root / "bench.json"
    assert main(["benchmark", "--graph", str(snap),
                 "--manifest", str(corpus.manifest_path), "--out", str(bench),
                 "--edge-fraction", "0.2", "--image-fraction", "0.12",
                 "--queries-per-split", "5", "--seed", "7"]) == 0
    return root, snap, bench


class TestBenchmarkEval:
    def test_benchmark_file_shape(self, cli_benchmark):
        _, _, bench = cli_benchmark
        data = json.loads(bench.read_text())
        assert data["format_version"] == 1
        assert set(data["splits"]) == {"text_image_seen", "text_image_unseen",
                                       "image_text_seen", "image_text_unseen"}
        assert data["provenance"]["graph_snapshot_checksum"]
        assert (bench.parent / "bench.json.holdout.json").exists()
        for split in data["splits"].values():
            for cs in split["candidate_sets"]:
                assert len(cs["candidates"]) == 50

    def test_eval_oracle_scores(self, cli_benchmark, tmp_path, capsys):
        _, _, bench = cli_benchmark
        data = json.loads(bench.read_text())
        scores = tmp_path / "scores.csv"
        with scores.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["query_id", "candidate_id", "score"])
            for split in data["splits"].values():
                for cs in split["candidate_sets"]:
                    positives = set(cs["positive_ids"])
                    for c in cs["candidates"]:
                        writer.writerow([cs["query_id"], c, 1.0 if c in positives else 0.0])
        report = tmp_path / "report.json"
        assert main(["eval", "--benchmark", str(bench), "--scores", str(scores),
                     "--out", str(report)]) == 0
        out = capsys.readouterr().out
        assert "Acc@50" in out
        payload = json.loads(report.read_text())
        for split, acc in payload["split_accuracy"].items():
            assert acc == 1.0

    def test_benchmark_file_byte_deterministic(self, cli_benchmark, corpus, tmp_path):
        root, snap, bench = cli_benchmark
        again = tmp_path / "bench2.json"
        assert main(["benchmark", "--graph", str(snap),
                     "--manifest", str(corpus.manifest_path), "--out", str(again),
                     "--edge-fraction", "0.2", "--image-fraction", "0.12",
                     "--queries-per-split", "5", "--seed", "7",
                     "--holdout", str(tmp_path / "h2.json")]) == 0
        assert sha(again) == sha(bench)

    def test_benchmark_reuses_existing_holdout(self, cli_benchmark, corpus, tmp_path, capsys):
        root, snap, bench = cli_benchmark
        existing = root / "bench.json.holdout.json"
        out = tmp_path / "bench3.json"
        assert main(["benchmark", "--graph", str(snap),
                     "--manifest", str(corpus.manifest_path), "--out", str(out),
                     "--queries-per-split", "5", "--seed", "7",
                     "--holdout", str(existing)]) == 0
        assert "reusing holdout spec" in capsys.readouterr().err
        assert sha(out) == sha(bench)

    def test_custom_template_table(self, small_pipeline, tmp_path):
        snap, manifest = small_pipeline
        templates = tmp_path / "templates.tsv"
        templates.write_text("/r/HasProperty\ttastes\n/r/IsA\tis a kind of\n")
        out = tmp_path / "riddles.jsonl"
        assert main(["augment", "--graph", str(snap), "--manifest", str(manifest),
                     "--out", str(out), "--templates", str(templates)]) == 0
        texts = {r["text"] for r in read_jsonl(out)}
        assert "this item tastes sour" in texts
        assert "this item is a kind of fruit" in texts

    def test_stats_relations_mode(self, small_pipeline, tmp_path):
        snap, manifest = small_pipeline
        riddles = tmp_path / "riddles.jsonl"
        main(["augment", "--graph", str(snap), "--manifest", str(manifest),
              "--out", str(riddles)])
        out = tmp_path / "rel.json"
        assert main(["stats", "--input", str(riddles), "--mode", "relations",
                     "--out", str(out)]) == 0
        hist = json.loads(out.read_text())["relation_histogram"]
        assert set(hist) == {"HasProperty", "IsA"}
        assert abs(sum(hist.values()) - 1.0) < 1e-9

    def test_eval_missing_pair_names_ids(self, cli_benchmark, tmp_path, capsys):
        _, _, bench = cli_benchmark
        data = json.loads(bench.read_text())
        scores = tmp_path / "scores.csv"
        first_split = next(iter(data["splits"].values()))
        dropped = None
        with scores.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["query_id", "candidate_id", "score"])
            for split in data["splits"].values():
                for cs in split["candidate_sets"]:
                    for c in cs["candidates"]:
                        if dropped is None:
                            dropped = (cs["query_id"], c)
                            continue
                        writer.writerow([cs["query_id"], c, 0.5])
        assert main(["eval", "--benchmark", str(bench), "--scores", str(scores)]) == 1
        err = capsys.readouterr().err
        assert dropped[0] in err and dropped[1] in err
