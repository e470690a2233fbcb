from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riddleforge.errors import EmptyTerm, SnapshotFormatError, TooManyMalformedRecords
from riddleforge.graph import (
    IngestConfig,
    deduplicate,
    ingest_assertions,
    load_snapshot,
    normalize_term,
    save_snapshot,
    surface_form,
)

from conftest import ingest_string, make_graph, random_graph


def brute_force_touching(graph, node, direction):
    """Independent oracle: linear scan over the full edge list."""
    if direction == "outgoing":
        return [e for e in graph.edges if e.head == node]
    if direction == "incoming":
        return [e for e in graph.edges if e.tail == node]
    return [e for e in graph.edges if e.head == node or e.tail == node]


class TestNormalizeTerm:
    def test_paper_standardization_example(self):
        assert normalize_term("A traffic jam", "/c/en/") == "/c/en/a_traffic_jam"
        # determiner removal happens upstream in extraction; with it applied:
        assert normalize_term("traffic jam", "/c/en/") == "/c/en/traffic_jam"

    def test_lowercases(self):
        assert normalize_term("Net", "/c/en/") == "/c/en/net"

    def test_whitespace_only_raises(self):
        with pytest.raises(EmptyTerm):
            normalize_term("  ", "/c/en/")

    def test_all_punctuation_raises(self):
        with pytest.raises(EmptyTerm):
            normalize_term("!!!", "/c/en/")

    def test_hyphens_become_underscores(self):
        assert normalize_term("ice-cream", "/c/en/") == "/c/en/ice_cream"

    def test_punctuation_stripped(self):
        assert normalize_term("it's a (test)!", "/c/en/") == "/c/en/its_a_test"

    def test_unicode_compatibility_normalization(self):
        assert normalize_term("ﬁne", "/c/en/") == "/c/en/fine"

    def test_idempotent_on_examples(self):
        for raw in ["A traffic jam", "Net", "ice-cream", "Catching Fish"]:
            once = normalize_term(raw, "/c/en/")
            assert normalize_term(once, "/c/en/") == once

    @given(st.text(min_size=1, max_size=40))
    @settings(max_examples=300)
    def test_idempotent_property(self, raw):
        try:
            once = normalize_term(raw, "/c/en/")
        except EmptyTerm:
            return
        assert normalize_term(once, "/c/en/") == once
        assert once.startswith("/c/en/")
        assert once == once.lower()
        assert " " not in once

    def test_surface_form_round_trip(self):
        assert surface_form("/c/en/traffic_jam") == "traffic jam"
        assert normalize_term(surface_form("/c/en/traffic_jam"), "/c/en/") == "/c/en/traffic_jam"


class TestIngest:
    def test_small_fixture_counts(self, small_graph):
        # hand count on tests/data/assertions_small.tsv: heads are net, lemon, lemon
        assert len(small_graph) == 3
        assert len(small_graph.out_index["/c/en/lemon"]) == 2
        assert [e.edge_id for e in small_graph.edges] == [0, 1, 2]

    def test_paper_edge_tuple(self, small_graph):
        e = small_graph.edges[0]
        assert (e.head, e.relation, e.weight, e.tail) == (
            "/c/en/net", "UsedFor", 0.3, "/c/en/catching_fish")

    def test_missing_column_counted_not_fatal(self):
        g = ingest_string("/a/x\t/r/IsA\t/c/en/cat\n", max_malformed_fraction=1.0)
        assert len(g) == 0
        assert g.stats.malformed == 1

    def test_malformed_cap_exceeded(self):
        bad = "/a/x\t/r/IsA\t/c/en/cat\n"
        good = '/a/x\t/r/IsA\t/c/en/cat\t/c/en/animal\t{"weight": 1.0}\n'
        with pytest.raises(TooManyMalformedRecords):
            ingest_string(bad * 3 + good, max_malformed_fraction=0.5)

    def test_non_numeric_weight_is_malformed(self):
        g = ingest_string('/a/x\t/r/IsA\t/c/en/cat\t/c/en/animal\t{"weight": "big"}\n',
                          max_malformed_fraction=1.0)
        assert len(g) == 0 and g.stats.malformed == 1

    def test_weight_defaults_to_one(self):
        g = ingest_string("/a/x\t/r/IsA\t/c/en/cat\t/c/en/animal\t{}\n")
        assert g.edges[0].weight == 1.0

    def test_namespace_filter_drops_cross_lingual(self):
        g = ingest_string(
            '/a/x\t/r/IsA\t/c/fr/chat\t/c/en/animal\t{"weight": 1.0}\n'
            '/a/x\t/r/IsA\t/c/en/cat\t/c/en/animal\t{"weight": 1.0}\n'
        )
        assert len(g) == 1
        assert g.stats.filtered_out == 1

    def test_sense_suffix_stripped(self):
        g = ingest_string('/a/x\t/r/IsA\t/c/en/net/n\t/c/en/artifact/n/wn\t{"weight": 1.0}\n')
        assert g.edges[0].head == "/c/en/net"
        assert g.edges[0].tail == "/c/en/artifact"

    def test_ingest_deterministic(self, small_assertions_path):
        with open(small_assertions_path, encoding="utf-8") as fh:
            g1 = ingest_assertions(fh, IngestConfig())
        with open(small_assertions_path, encoding="utf-8") as fh:
            g2 = ingest_assertions(fh, IngestConfig())
        assert g1.edges == g2.edges
        assert g1.out_index == g2.out_index and g1.in_index == g2.in_index

    def test_deduplicate_keeps_max_weight(self):
        g = ingest_string(
            '/a/x\t/r/IsA\t/c/en/cat\t/c/en/animal\t{"weight": 0.5}\n'
            '/a/x\t/r/IsA\t/c/en/cat\t/c/en/animal\t{"weight": 2.0}\n'
            '/a/x\t/r/IsA\t/c/en/dog\t/c/en/animal\t{"weight": 1.0}\n'
        )
        d = deduplicate(g)
        assert len(d) == 2
        assert d.edges[0].weight == 2.0
        assert [e.edge_id for e in d.edges] == [0, 1]


class TestEdgesTouching:
    def test_matches_brute_force_on_fixture(self, tiny_graph):
        for node in sorted(tiny_graph.nodes):
            for direction in ("outgoing", "incoming", "both"):
                got = tiny_graph.edges_touching(node, direction)
                assert got == brute_force_touching(tiny_graph, node, direction)

    def test_absent_node_empty(self, tiny_graph):
        assert tiny_graph.edges_touching("/c/en/nonexistent", "both") == []

    def test_self_loop_appears_once_under_both(self):
        g = make_graph([("x", "RelatedTo", 0.7, "x")])
        edges = g.edges_touching("/c/en/x", "both")
        assert len(edges) == 1 and edges[0].edge_id == 0

    def test_round_trip_on_random_graphs(self):
        rng = random.Random(11)
        for _ in range(30):
            g = random_graph(rng, max_edges=200)
            for node in sorted(g.nodes):
                assert g.edges_touching(node, "both") == brute_force_touching(g, node, "both")

    def test_index_consistency(self):
        rng = random.Random(7)
        for _ in range(20):
            g = random_graph(rng, max_edges=300)
            assert sum(len(v) for v in g.out_index.values()) == len(g)
            assert sum(len(v) for v in g.in_index.values()) == len(g)
            for node, ids in g.out_index.items():
                assert list(ids) == sorted(ids)
            for node, ids in g.in_index.items():
                assert list(ids) == sorted(ids)

    def test_every_edge_endpoint_in_nodes(self, tiny_graph):
        for e in tiny_graph.edges:
            assert e.head in tiny_graph.nodes and e.tail in tiny_graph.nodes


class TestSnapshot:
    def test_round_trip_content_exact(self, tmp_path, tiny_graph):
        path = tmp_path / "g.snap"
        save_snapshot(tiny_graph, str(path))
        loaded = load_snapshot(str(path))
        assert loaded.content_equal(tiny_graph)
        assert loaded.out_index == tiny_graph.out_index
        assert loaded.in_index == tiny_graph.in_index
        assert loaded.nodes == tiny_graph.nodes

    def test_magic_bytes(self, tmp_path, tiny_graph):
        path = tmp_path / "g.snap"
        save_snapshot(tiny_graph, str(path))
        assert path.read_bytes()[:5] == b"RFKG1"

    def test_rejects_non_snapshot(self, tmp_path):
        path = tmp_path / "junk.snap"
        path.write_bytes(b"not a snapshot at all")
        with pytest.raises(SnapshotFormatError):
            load_snapshot(str(path))

    def test_random_graph_round_trips(self, tmp_path):
        rng = random.Random(3)
        g = random_graph(rng, max_edges=500)
        path = tmp_path / "g.snap"
        save_snapshot(g, str(path))
        assert load_snapshot(str(path)).content_equal(g)

    def test_gzip_snapshot_round_trips(self, tmp_path, tiny_graph):
        path = tmp_path / "g.snap.gz"
        save_snapshot(tiny_graph, str(path))
        assert path.read_bytes()[:2] == b"\x1f\x8b"  # gzip magic on disk
        assert load_snapshot(str(path)).content_equal(tiny_graph)
