"""Indexed, immutable knowledge graph built from a ConceptNet-style assertion dump.

The graph is a directed weighted multigraph: edges are (head, relation, weight,
tail) tuples, assigned a stable 0-based ``edge_id`` in ingest order.  Two
adjacency indexes (by head and by tail) make 1-hop neighborhood queries cheap
in either direction.  After ingest the graph is never mutated, so any number
of readers can share it without locking.
"""

from __future__ import annotations

import gzip
import json
import re
import string
import struct
import unicodedata
from dataclasses import dataclass
from typing import IO, Iterable, Literal

from .errors import EmptyTerm, MalformedRecord, SnapshotFormatError, TooManyMalformedRecords

DEFAULT_NAMESPACE = "/c/en/"

_WS_RE = re.compile(r"\s+")
_ASCII_PUNCT = set(string.punctuation)

Direction = Literal["outgoing", "incoming", "both"]


def normalize_term(raw: str, namespace: str = DEFAULT_NAMESPACE) -> str:
    """Standardize a surface term into a node URI.

    Unicode compatibility normalization, lower-casing, punctuation cleaning,
    whitespace-to-underscore, namespace prefix.  Hyphens and underscores act
    as word separators rather than being deleted, so "ice-cream" and an
    already-normalized "ice_cream" both map to "/c/en/ice_cream"; the
    function is idempotent on its own output (including the namespace).
    """
    text = raw.strip()
    if not text:
        raise EmptyTerm(f"empty term from input {raw!r}")
    if text.startswith(namespace):
        text = text[len(namespace):]
    text = unicodedata.normalize("NFKC", text).lower()
    kept: list[str] = []
    for ch in text:
        cat = unicodedata.category(ch)
        if cat in ("Pd", "Pc"):
            kept.append(" ")
        elif cat.startswith("P") or ch in _ASCII_PUNCT:
            continue
        else:
            kept.append(ch)
    term = _WS_RE.sub("_", "".join(kept).strip())
    if not term:
        raise EmptyTerm(f"term {raw!r} is all punctuation")
    return namespace + term


def surface_form(node: str, namespace: str = DEFAULT_NAMESPACE) -> str:
    """Inverse-ish of normalize_term: node URI back to a space-separated term."""
    term = node[len(namespace):] if node.startswith(namespace) else node
    return term.replace("_", " ")


@dataclass(frozen=True, slots=True)
class Edge:
    head: str
    relation: str
    weight: float
    tail: str
    edge_id: int

    @property
    def triple(self) -> tuple[str, str, str]:
        return (self.head, self.relation, self.tail)


@dataclass(frozen=True, slots=True)
class IngestStats:
    lines_read: int
    edges_kept: int
    filtered_out: int
    malformed: int


@dataclass(frozen=True)
class IngestConfig:
    namespace: str = DEFAULT_NAMESPACE
    max_malformed_fraction: float = 0.25
    deduplicate: bool = False


class KnowledgeGraph:
    """Immutable dual-indexed multigraph.  Build via :func:`ingest_assertions`."""

    def __init__(self, edges: Iterable[Edge], namespace: str = DEFAULT_NAMESPACE,
                 stats: IngestStats | None = None):
        self.edges: tuple[Edge, ...] = tuple(edges)
        self.namespace = namespace
        self.stats = stats
        out_index: dict[str, list[int]] = {}
        in_index: dict[str, list[int]] = {}
        nodes: set[str] = set()
        for position, e in enumerate(self.edges):
            if e.edge_id != position:
                raise ValueError(
                    f"edge_id {e.edge_id} does not match its position {position}")
            nodes.add(e.head)
            nodes.add(e.tail)
            out_index.setdefault(e.head, []).append(e.edge_id)
            in_index.setdefault(e.tail, []).append(e.edge_id)
        self.nodes: frozenset[str] = frozenset(nodes)
        self.out_index: dict[str, tuple[int, ...]] = {n: tuple(ids) for n, ids in out_index.items()}
        self.in_index: dict[str, tuple[int, ...]] = {n: tuple(ids) for n, ids in in_index.items()}

    def __len__(self) -> int:
        return len(self.edges)

    def __contains__(self, node: str) -> bool:
        return node in self.nodes

    def degree(self, node: str) -> int:
        return len(self.out_index.get(node, ())) + len(self.in_index.get(node, ()))

    def edges_touching(self, node: str, direction: Direction = "both") -> list[Edge]:
        """All edges where ``node`` is head, tail, or either; ordered by edge_id.

        A self-loop appears once under "both".  Absent nodes yield [].
        """
        if direction == "outgoing":
            ids: Iterable[int] = self.out_index.get(node, ())
        elif direction == "incoming":
            ids = self.in_index.get(node, ())
        elif direction == "both":
            merged = sorted(set(self.out_index.get(node, ())) | set(self.in_index.get(node, ())))
            ids = merged
        else:
            raise ValueError(f"unknown direction {direction!r}")
        return [self.edges[i] for i in ids]

    def neighbors_via(self, node: str, relations: frozenset[str] | set[str]) -> set[str]:
        """1-hop neighbors reachable in either direction along the given relations."""
        out: set[str] = set()
        for e in self.edges_touching(node, "both"):
            if e.relation in relations:
                out.add(e.tail if e.head == node else e.head)
        out.discard(node)
        return out

    def content_equal(self, other: "KnowledgeGraph") -> bool:
        return self.edges == other.edges and self.namespace == other.namespace


def _parse_assertion_line(line: str, line_no: int, namespace: str) -> tuple[str, str, str, float] | None:
    """Parse one ConceptNet assertions-TSV line.

    Columns: assertion URI, relation URI, start URI, end URI, JSON metadata.
    Returns (head, relation, tail, weight), None when the record is outside
    the namespace, or raises MalformedRecord.
    """
    cols = line.rstrip("\n").split("\t")
    if len(cols) < 5:
        raise MalformedRecord(line_no, f"expected 5 columns, got {len(cols)}")
    rel_uri, start_uri, end_uri, meta_blob = cols[1], cols[2], cols[3], cols[4]
    if not (start_uri.startswith(namespace) and end_uri.startswith(namespace)):
        return None
    try:
        meta = json.loads(meta_blob)
    except (json.JSONDecodeError, TypeError) as exc:
        raise MalformedRecord(line_no, f"bad metadata JSON: {exc}") from exc
    weight = meta.get("weight", 1.0) if isinstance(meta, dict) else None
    if not isinstance(weight, (int, float)) or isinstance(weight, bool):
        raise MalformedRecord(line_no, f"non-numeric weight {weight!r}")
    weight = float(weight)
    if weight != weight or weight in (float("inf"), float("-inf")) or weight < 0:
        raise MalformedRecord(line_no, f"weight {weight} not finite non-negative")
    relation = rel_uri[3:] if rel_uri.startswith("/r/") else rel_uri
    if not relation:
        raise MalformedRecord(line_no, "empty relation")
    try:
        head = _canonical_node(start_uri, namespace)
        tail = _canonical_node(end_uri, namespace)
    except EmptyTerm as exc:
        raise MalformedRecord(line_no, str(exc)) from exc
    return head, relation, tail, weight


def _canonical_node(uri: str, namespace: str) -> str:
    # ConceptNet URIs may carry a part-of-speech sense suffix ("/c/en/net/n");
    # only the first path segment after the namespace names the term.
    term = uri[len(namespace):].split("/", 1)[0]
    return normalize_term(term, namespace)


def ingest_assertions(stream: Iterable[str], config: IngestConfig | None = None) -> KnowledgeGraph:
    """Single-pass, bounded-memory-per-line ingest of an assertion dump.

    Keeps exactly the records whose endpoints are inside the configured
    namespace, assigning edge ids in stream order.  Malformed records are
    counted and skipped; ingest fails only when their fraction of all lines
    exceeds ``config.max_malformed_fraction``.
    """
    config = config or IngestConfig()
    edges: list[Edge] = []
    lines_read = filtered = malformed = 0
    for line_no, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        lines_read += 1
        try:
            parsed = _parse_assertion_line(line, line_no, config.namespace)
        except MalformedRecord:
            malformed += 1
            continue
        if parsed is None:
            filtered += 1
            continue
        head, relation, tail, weight = parsed
        edges.append(Edge(head, relation, weight, tail, edge_id=len(edges)))
    if lines_read and malformed / lines_read > config.max_malformed_fraction:
        raise TooManyMalformedRecords(
            f"{malformed}/{lines_read} malformed records exceeds cap "
            f"{config.max_malformed_fraction}"
        )
    stats = IngestStats(lines_read, len(edges), filtered, malformed)
    graph = KnowledgeGraph(edges, namespace=config.namespace, stats=stats)
    if config.deduplicate:
        graph = deduplicate(graph)
    return graph


def deduplicate(graph: KnowledgeGraph) -> KnowledgeGraph:
    """Collapse parallel (head, relation, tail) duplicates, keeping max weight.

    Surviving edges keep their relative order of first occurrence and are
    renumbered 0..m-1.
    """
    best: dict[tuple[str, str, str], float] = {}
    order: list[tuple[str, str, str]] = []
    for e in graph.edges:
        key = e.triple
        if key not in best:
            best[key] = e.weight
            order.append(key)
        elif e.weight > best[key]:
            best[key] = e.weight
    edges = [
        Edge(head, relation, best[(head, relation, tail)], tail, edge_id=i)
        for i, (head, relation, tail) in enumerate(order)
    ]
    return KnowledgeGraph(edges, namespace=graph.namespace, stats=graph.stats)


# Snapshot format: magic "RFKG1", then little-endian sections.  Node and
# relation strings are stored sorted so equal graph content gives equal bytes.

_MAGIC = b"RFKG1"
_HEADER = struct.Struct("<QQQ")  # n_nodes, n_relations, n_edges
_EDGE = struct.Struct("<IIId")   # head_idx, rel_idx, tail_idx, weight


def _write_string_table(fh: IO[bytes], items: list[str]) -> None:
    for s in items:
        raw = s.encode("utf-8")
        fh.write(struct.pack("<I", len(raw)))
        fh.write(raw)


def _read_string_table(fh: IO[bytes], count: int) -> list[str]:
    out = []
    for _ in range(count):
        (n,) = struct.unpack("<I", _read_exact(fh, 4))
        out.append(_read_exact(fh, n).decode("utf-8"))
    return out


def _read_exact(fh: IO[bytes], n: int) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise SnapshotFormatError("truncated snapshot")
    return data


def _open_binary(path: str, mode: str) -> IO[bytes]:
    if str(path).endswith(".gz"):
        return gzip.open(path, mode)
    return open(path, mode)


def save_snapshot(graph: KnowledgeGraph, path: str) -> None:
    nodes = sorted(graph.nodes)
    node_idx = {n: i for i, n in enumerate(nodes)}
    relations = sorted({e.relation for e in graph.edges})
    rel_idx = {r: i for i, r in enumerate(relations)}
    with _open_binary(path, "wb") as fh:
        fh.write(_MAGIC)
        ns = graph.namespace.encode("utf-8")
        fh.write(struct.pack("<I", len(ns)))
        fh.write(ns)
        fh.write(_HEADER.pack(len(nodes), len(relations), len(graph.edges)))
        _write_string_table(fh, nodes)
        _write_string_table(fh, relations)
        for e in graph.edges:
            fh.write(_EDGE.pack(node_idx[e.head], rel_idx[e.relation], node_idx[e.tail], e.weight))


def load_snapshot(path: str) -> KnowledgeGraph:
    with _open_binary(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise SnapshotFormatError(f"{path}: not a RFKG1 snapshot")
        (ns_len,) = struct.unpack("<I", _read_exact(fh, 4))
        namespace = _read_exact(fh, ns_len).decode("utf-8")
        n_nodes, n_relations, n_edges = _HEADER.unpack(_read_exact(fh, _HEADER.size))
        nodes = _read_string_table(fh, n_nodes)
        relations = _read_string_table(fh, n_relations)
        edges = []
        for i in range(n_edges):
            h, r, t, w = _EDGE.unpack(_read_exact(fh, _EDGE.size))
            edges.append(Edge(nodes[h], relations[r], w, nodes[t], edge_id=i))
    return KnowledgeGraph(edges, namespace=namespace)
