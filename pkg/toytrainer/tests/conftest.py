from __future__ import annotations

import subprocess
import sys
from dataclasses import dataclass
from pathlib import Path

import pytest

# input-corpus synthesis only; the generator pipeline itself is driven
# strictly through the riddleforge CLI below
sys.path.insert(0, str(Path(__file__).parents[2] / "tests"))
from fixturegen import build_fixture  # noqa: E402


def run_cli(*args: str) -> None:
    proc = subprocess.run([sys.executable, "-m", "riddleforge.cli", *args],
                          capture_output=True, text=True)
    assert proc.returncode == 0, f"riddleforge {args[0]} failed:\n{proc.stderr}"


@dataclass(frozen=True)
class SharedFixture:
    root: Path
    graph: Path
    manifest: Path
    benchmark: Path
    holdout: Path
    riddles: Path
    entities: Path

    def mix_stream(self, seed: int, p_start: float, p_end: float,
                   steps: int = 600, batch_size: int = 32) -> Path:
        out = self.root / f"mix_s{seed}_p{p_start}_{p_end}.jsonl"
        if not out.exists():
            run_cli("mix", "--manifest", str(self.manifest),
                    "--riddles", str(self.riddles), "--out", str(out),
                    "--steps", str(steps), "--batch-size", str(batch_size),
                    "--p-start", str(p_start), "--p-end", str(p_end),
                    "--seed", str(seed))
        return out


@pytest.fixture(scope="session")
def shared(tmp_path_factory) -> SharedFixture:
    root = tmp_path_factory.mktemp("toy")
    corpus = build_fixture(root / "corpus", n_images=700)
    graph = root / "graph.snap"
    bench = root / "bench.json"
    holdout = root / "bench.json.holdout.json"
    riddles = root / "riddles.jsonl"
    entities = root / "entities.jsonl"
    run_cli("ingest", "--assertions", str(corpus.assertions_path),
            "--out", str(graph), "--max-malformed", "1.0")
    run_cli("benchmark", "--graph", str(graph),
            "--manifest", str(corpus.manifest_path), "--out", str(bench),
            "--edge-fraction", "0.2", "--image-fraction", "0.15",
            "--queries-per-split", "15", "--seed", "7")
    run_cli("augment", "--graph", str(graph),
            "--manifest", str(corpus.manifest_path), "--holdout", str(holdout),
            "--out", str(riddles), "--entities-out", str(entities))
    return SharedFixture(root=root, graph=graph, manifest=corpus.manifest_path,
                         benchmark=bench, holdout=holdout, riddles=riddles,
                         entities=entities)
