from __future__ import annotations

import io
import json
import random
from pathlib import Path

import pytest

from riddleforge.graph import Edge, IngestConfig, KnowledgeGraph, ingest_assertions

from fixturegen import build_fixture

DATA_DIR = Path(__file__).parent / "data"


def make_graph(triples: list[tuple[str, str, float, str]],
               namespace: str = "/c/en/") -> KnowledgeGraph:
    """Graph from (head, relation, weight, tail) tuples with bare term names."""
    edges = [
        Edge(namespace + h.replace(" ", "_"), r, w, namespace + t.replace(" ", "_"), i)
        for i, (h, r, w, t) in enumerate(triples)
    ]
    return KnowledgeGraph(edges, namespace=namespace)


def random_graph(rng: random.Random, max_edges: int = 1000) -> KnowledgeGraph:
    """Random multigraph over a small node universe, self-loops included."""
    n_nodes = rng.randint(2, 40)
    nodes = [f"n{i}" for i in range(n_nodes)]
    relations = ["RelatedTo", "IsA", "UsedFor", "AtLocation", "HasProperty"]
    n_edges = rng.randint(1, max_edges)
    triples = [
        (rng.choice(nodes), rng.choice(relations), round(rng.uniform(0.0, 2.0), 3),
         rng.choice(nodes))
        for _ in range(n_edges)
    ]
    return make_graph(triples)


@pytest.fixture
def tiny_graph() -> KnowledgeGraph:
    return make_graph([
        ("net", "UsedFor", 0.3, "catching fish"),
        ("cat", "IsA", 0.6, "animal"),
        ("desk", "AtLocation", 0.9, "office"),
        ("cat", "RelatedTo", 0.9, "box"),
        ("lemon", "HasProperty", 1.2, "sour"),
        ("lemon", "IsA", 0.8, "fruit"),
    ])


@pytest.fixture
def small_assertions_path() -> Path:
    return DATA_DIR / "assertions_small.tsv"


@pytest.fixture
def small_graph(small_assertions_path: Path) -> KnowledgeGraph:
    with open(small_assertions_path, encoding="utf-8") as fh:
        return ingest_assertions(fh, IngestConfig())


@pytest.fixture(scope="session")
def corpus(tmp_path_factory) -> "FixtureCorpus":
    return build_fixture(tmp_path_factory.mktemp("corpus"))


@pytest.fixture(scope="session")
def corpus_graph(corpus) -> KnowledgeGraph:
    with open(corpus.assertions_path, encoding="utf-8") as fh:
        return ingest_assertions(fh, IngestConfig())


@pytest.fixture(scope="session")
def corpus_manifest(corpus) -> list[dict]:
    records = []
    with open(corpus.manifest_path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(json.loads(line))
    return records


def ingest_string(tsv: str, **kwargs) -> KnowledgeGraph:
    return ingest_assertions(io.StringIO(tsv), IngestConfig(**kwargs))
