"""Retrieval diagnostic benchmark: holdout partitioning, hard-negative mining,
candidate-set assembly, and the versioned benchmark file.

Every candidate set has exactly 50 candidates with 1..15 positives.  The
negatives are neighborhood hard negatives: their entities sit one hop from
the query subject along RelatedTo / DistinctFrom / Antonym, yet none of their
entities satisfies the riddle against the graph.  Thinner pools fall back to
2-hop neighbors and then to random non-positives, with the tier recorded per
negative so relaxations stay auditable.
"""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Literal

from .errors import InsufficientData, NoPositive, PoolExhausted, UnmappedRelation
from .extract import Caption, EntitySet, ExtractionConfig, extract_entities, union_entity_sets
from .graph import KnowledgeGraph
from .io import derive_seed, open_text
from .linearize import (
    LinearizeConfig,
    Riddle,
    SubstitutedEdge,
    classify_substitution,
    default_linearize_config,
    generate_riddles,
    linearize_edge,
)

NUM_CANDIDATES = 50
MAX_POSITIVES = 15
NEIGHBOR_RELATIONS = frozenset({"RelatedTo", "DistinctFrom", "Antonym"})

FORMAT_VERSION = 1

Direction = Literal["text_to_image", "image_to_text"]


@dataclass(frozen=True)
class HoldoutSpec:
    held_out_edge_ids: frozenset[int]
    test_image_ids: frozenset[str]
    seed: int
    edge_fraction: float
    image_fraction: float

    def to_dict(self) -> dict:
        return {
            "held_out_edge_ids": sorted(self.held_out_edge_ids),
            "test_image_ids": sorted(self.test_image_ids),
            "seed": self.seed,
            "edge_fraction": self.edge_fraction,
            "image_fraction": self.image_fraction,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HoldoutSpec":
        return cls(
            held_out_edge_ids=frozenset(d["held_out_edge_ids"]),
            test_image_ids=frozenset(d["test_image_ids"]),
            seed=d["seed"],
            edge_fraction=d["edge_fraction"],
            image_fraction=d["image_fraction"],
        )


def partition_holdout(
    graph: KnowledgeGraph,
    manifest: Iterable[dict],
    edge_fraction: float,
    image_fraction: float,
    seed: int,
) -> HoldoutSpec:
    """Sample held-out knowledge and test images with a seeded RNG.

    The holdout unit is the (head, relation, tail) triple: every parallel
    duplicate of a sampled triple is held out together, so hiding either side
    of that knowledge is excluded from training.
    """
    if not (0.0 < edge_fraction < 1.0 and 0.0 < image_fraction < 1.0):
        raise InsufficientData("fractions must lie strictly inside (0, 1)")
    groups: dict[tuple[str, str, str], list[int]] = {}
    order: list[tuple[str, str, str]] = []
    for e in graph.edges:
        if e.triple not in groups:
            groups[e.triple] = []
            order.append(e.triple)
        groups[e.triple].append(e.edge_id)
    target = round(edge_fraction * len(graph.edges))
    if target == 0 or not order:
        raise InsufficientData(f"edge fraction {edge_fraction} selects no edges")
    rng = random.Random(derive_seed(seed, "edges"))
    rng.shuffle(order)
    held: set[int] = set()
    for triple in order:
        if len(held) >= target:
            break
        held.update(groups[triple])

    image_ids: list[str] = []
    seen: set[str] = set()
    for rec in manifest:
        image_id = rec.get("image_id")
        if image_id and image_id not in seen:
            seen.add(image_id)
            image_ids.append(image_id)
    n_images = round(image_fraction * len(image_ids))
    if n_images == 0:
        raise InsufficientData(f"image fraction {image_fraction} selects no images")
    img_rng = random.Random(derive_seed(seed, "images"))
    test_images = img_rng.sample(image_ids, n_images)
    return HoldoutSpec(
        held_out_edge_ids=frozenset(held),
        test_image_ids=frozenset(test_images),
        seed=seed,
        edge_fraction=edge_fraction,
        image_fraction=image_fraction,
    )


@dataclass(frozen=True, slots=True)
class NegativeSample:
    candidate_id: str
    tier: int  # 1 = 1-hop neighbor, 2 = 2-hop, 3 = random non-positive


def _entity_satisfies(
    entity: str, riddle: Riddle, graph: KnowledgeGraph, triples: frozenset[tuple[str, str, str]]
) -> bool:
    """Does the riddle's source edge hold with ``entity`` in the hidden slot?"""
    source = graph.edges[riddle.source_edge_id]
    if riddle.hidden_side == "head":
        return (entity, source.relation, source.tail) in triples
    return (source.head, source.relation, entity) in triples


def graph_triples(graph: KnowledgeGraph) -> frozenset[tuple[str, str, str]]:
    return frozenset(e.triple for e in graph.edges)


def _two_hop_neighbors(graph: KnowledgeGraph, subject: str, one_hop: set[str]) -> set[str]:
    out: set[str] = set()
    for n in one_hop:
        out.update(graph.neighbors_via(n, NEIGHBOR_RELATIONS))
    out.discard(subject)
    return out - one_hop


def mine_hard_negatives(
    subject: str,
    graph: KnowledgeGraph,
    entity_index: dict[str, frozenset[str]],
    riddle: Riddle,
    count: int,
    seed: int,
    triples: frozenset[tuple[str, str, str]] | None = None,
) -> list[NegativeSample]:
    """Hard-negative image ids for a riddle hiding ``subject``.

    Tier 1 requires an entity 1-hop from the subject along the neighbor
    relations; every tier requires that the image neither contains the
    subject nor contains any entity satisfying the riddle.
    """
    triples = triples if triples is not None else graph_triples(graph)
    rng = random.Random(seed)
    one_hop = graph.neighbors_via(subject, NEIGHBOR_RELATIONS)

    def eligible(entities: frozenset[str]) -> bool:
        if subject in entities:
            return False
        return not any(_entity_satisfies(e, riddle, graph, triples) for e in entities)

    chosen: list[NegativeSample] = []
    taken: set[str] = set()
    image_ids = sorted(entity_index)

    def _take(tier: int, in_tier) -> None:
        pool = [
            img for img in image_ids
            if img not in taken and in_tier(entity_index[img]) and eligible(entity_index[img])
        ]
        for img in rng.sample(pool, min(count - len(chosen), len(pool))):
            taken.add(img)
            chosen.append(NegativeSample(img, tier))

    _take(1, lambda ents: bool(ents & one_hop))
    if len(chosen) < count:
        two_hop = _two_hop_neighbors(graph, subject, one_hop)
        _take(2, lambda ents: bool(ents & two_hop))
    if len(chosen) < count:
        _take(3, lambda ents: True)
    if len(chosen) < count:
        raise PoolExhausted(
            f"only {len(chosen)}/{count} negatives available for subject {subject}"
        )
    return chosen


def mine_hard_negative_riddles(
    image_entities: frozenset[str],
    riddle_pool: dict[str, Riddle],
    graph: KnowledgeGraph,
    count: int,
    seed: int,
    triples: frozenset[tuple[str, str, str]] | None = None,
) -> list[NegativeSample]:
    """Symmetric mining for image-to-text: negative riddles hide subjects that
    neighbor the image's entities but are not satisfied by any of them."""
    triples = triples if triples is not None else graph_triples(graph)
    rng = random.Random(seed)
    one_hop: set[str] = set()
    for entity in image_entities:
        one_hop.update(graph.neighbors_via(entity, NEIGHBOR_RELATIONS))
    one_hop -= image_entities

    def eligible(r: Riddle) -> bool:
        if r.subject in image_entities:
            return False
        return not any(_entity_satisfies(e, r, graph, triples) for e in image_entities)

    chosen: list[NegativeSample] = []
    taken: set[str] = set()
    uids = sorted(riddle_pool)

    def _take(tier: int, in_tier) -> None:
        pool = [
            uid for uid in uids
            if uid not in taken and in_tier(riddle_pool[uid]) and eligible(riddle_pool[uid])
        ]
        for uid in rng.sample(pool, min(count - len(chosen), len(pool))):
            taken.add(uid)
            chosen.append(NegativeSample(uid, tier))

    _take(1, lambda r: r.subject in one_hop)
    if len(chosen) < count:
        two_hop: set[str] = set()
        for n in sorted(one_hop):
            two_hop.update(graph.neighbors_via(n, NEIGHBOR_RELATIONS))
        two_hop -= image_entities
        two_hop -= one_hop
        _take(2, lambda r: r.subject in two_hop)
    if len(chosen) < count:
        _take(3, lambda r: True)
    if len(chosen) < count:
        raise PoolExhausted(f"only {len(chosen)}/{count} negative riddles available")
    return chosen


@dataclass(frozen=True)
class CandidateSet:
    query_id: str
    direction: Direction
    query: str  # riddle uid for text_to_image, image id for image_to_text
    candidates: tuple[str, ...]
    positive_ids: frozenset[str]
    split: str
    negative_tiers: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "direction": self.direction,
            "query": self.query,
            "candidates": list(self.candidates),
            "positive_ids": sorted(self.positive_ids),
            "split": self.split,
            "negative_tiers": self.negative_tiers,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CandidateSet":
        return cls(
            query_id=d["query_id"],
            direction=d["direction"],
            query=d["query"],
            candidates=tuple(d["candidates"]),
            positive_ids=frozenset(d["positive_ids"]),
            split=d["split"],
            negative_tiers={k: int(v) for k, v in d.get("negative_tiers", {}).items()},
        )


@dataclass
class BenchmarkSplit:
    name: str
    direction: Direction
    candidate_sets: list[CandidateSet]
    skipped: Counter = field(default_factory=Counter)


def riddle_uid(edge_id: int, hidden_side: str) -> str:
    return f"e{edge_id}{hidden_side[0]}"


def _draw_positive_count(rng: random.Random, available: int) -> int:
    target = rng.randint(1, MAX_POSITIVES)
    return min(target, available, MAX_POSITIVES)


def build_text_to_image_set(
    riddle: Riddle,
    uid: str,
    split: str,
    entity_index: dict[str, frozenset[str]],
    graph: KnowledgeGraph,
    seed: int,
    triples: frozenset[tuple[str, str, str]],
) -> CandidateSet:
    positive_pool = sorted(img for img, ents in entity_index.items() if riddle.subject in ents)
    if not positive_pool:
        raise NoPositive(f"no test image contains {riddle.subject}")
    rng = random.Random(seed)
    n = _draw_positive_count(rng, len(positive_pool))
    positives = rng.sample(positive_pool, n)
    negatives = mine_hard_negatives(
        riddle.subject, graph, entity_index, riddle,
        count=NUM_CANDIDATES - n, seed=derive_seed(seed, "negatives"), triples=triples,
    )
    candidates = positives + [s.candidate_id for s in negatives]
    rng.shuffle(candidates)
    return CandidateSet(
        query_id=f"{split}:{uid}",
        direction="text_to_image",
        query=uid,
        candidates=tuple(candidates),
        positive_ids=frozenset(positives),
        split=split,
        negative_tiers={s.candidate_id: s.tier for s in negatives},
    )


def build_image_to_text_set(
    image_id: str,
    split: str,
    image_entities: frozenset[str],
    riddle_pool: dict[str, Riddle],
    graph: KnowledgeGraph,
    seed: int,
    triples: frozenset[tuple[str, str, str]],
) -> CandidateSet:
    positive_pool = sorted(
        uid for uid, r in riddle_pool.items() if r.subject in image_entities
    )
    if not positive_pool:
        raise NoPositive(f"no candidate riddle fits image {image_id}")
    rng = random.Random(seed)
    n = _draw_positive_count(rng, len(positive_pool))
    positives = rng.sample(positive_pool, n)
    negatives = mine_hard_negative_riddles(
        image_entities, riddle_pool, graph,
        count=NUM_CANDIDATES - n, seed=derive_seed(seed, "negatives"), triples=triples,
    )
    candidates = positives + [s.candidate_id for s in negatives]
    rng.shuffle(candidates)
    return CandidateSet(
        query_id=f"{split}:{image_id}",
        direction="image_to_text",
        query=image_id,
        candidates=tuple(candidates),
        positive_ids=frozenset(positives),
        split=split,
        negative_tiers={s.candidate_id: s.tier for s in negatives},
    )


def build_candidate_set(
    query,
    direction: Direction,
    entity_index: dict[str, frozenset[str]],
    riddle_pool: dict[str, Riddle],
    graph: KnowledgeGraph,
    seed: int,
    split: str = "adhoc",
    triples: frozenset[tuple[str, str, str]] | None = None,
) -> CandidateSet:
    """One candidate set for either direction.

    ``query`` is a Riddle for text_to_image or an image id for image_to_text;
    pools are the test-image entity index and the candidate riddle table.
    """
    triples = triples if triples is not None else graph_triples(graph)
    if direction == "text_to_image":
        uid = riddle_uid(query.source_edge_id, query.hidden_side)
        return build_text_to_image_set(query, uid, split, entity_index, graph, seed, triples)
    if direction == "image_to_text":
        return build_image_to_text_set(
            query, split, entity_index[query], riddle_pool, graph, seed, triples
        )
    raise ValueError(f"unknown direction {direction!r}")


@dataclass(frozen=True)
class BenchmarkConfig:
    queries_per_split: int = 500
    tau: float = 0.5


def trainable_texts(
    graph: KnowledgeGraph,
    held_out_edge_ids: frozenset[int],
    config: LinearizeConfig,
) -> set[str]:
    """Every riddle text realizable from a non-held-out edge above tau.

    Substitution hides one endpoint, so distinct triples can collide on the
    same surface text ((lemon, IsA, fruit) and (lime, IsA, fruit) both read
    "this item is a type of fruit").  The unseen pools are filtered against
    this set so no test-unseen text can also occur in training.
    """
    token_for: dict[str, str] = {}

    def _token(node: str) -> str:
        if node not in token_for:
            token_for[node] = classify_substitution(node, graph, config)
        return token_for[node]

    texts: set[str] = set()
    for e in graph.edges:
        if e.edge_id in held_out_edge_ids or not e.weight > config.tau:
            continue
        for side, subject in (("head", e.head), ("tail", e.tail)):
            token = _token(subject)
            sub_edge = SubstitutedEdge(
                e.edge_id,
                token if side == "head" else e.head,
                e.relation,
                e.weight,
                token if side == "tail" else e.tail,
                side,
                subject,
                token,
            )
            try:
                texts.add(linearize_edge(sub_edge, config.templates, graph.namespace))
            except UnmappedRelation:
                continue
    return texts


def build_test_entity_index(
    manifest: Iterable[dict],
    spec: HoldoutSpec,
    graph: KnowledgeGraph,
    extraction_config: ExtractionConfig | None = None,
) -> dict[str, frozenset[str]]:
    """Per-image entity bags (caption union) over the held-out test images."""
    captions: dict[str, list[str]] = {}
    for rec in manifest:
        image_id = rec.get("image_id")
        text = rec.get("caption")
        if image_id in spec.test_image_ids and isinstance(text, str) and text.strip():
            captions.setdefault(image_id, []).append(text)
    index: dict[str, frozenset[str]] = {}
    for image_id in sorted(captions):
        sets = [
            extract_entities(Caption(image_id, text), graph, extraction_config)
            for text in captions[image_id]
        ]
        merged = union_entity_sets(image_id, sets)
        if merged.matched_entities:
            index[image_id] = frozenset(merged.matched_entities)
    return index


def assemble_splits(
    spec: HoldoutSpec,
    graph: KnowledgeGraph,
    manifest: list[dict],
    config: BenchmarkConfig | None = None,
    seed: int = 0,
    extraction_config: ExtractionConfig | None = None,
    linearize_config: LinearizeConfig | None = None,
) -> tuple[dict[str, BenchmarkSplit], dict[str, frozenset[str]], dict[str, Riddle]]:
    """The four benchmark splits plus the entity index and riddle pool they
    reference.  Queries with empty positive or negative pools are skipped and
    counted, never fabricated."""
    config = config or BenchmarkConfig()
    entity_index = build_test_entity_index(manifest, spec, graph, extraction_config)
    triples = graph_triples(graph)

    # Unique candidate riddles across the test pool, bucketed by holdout.
    pools: dict[str, dict[str, Riddle]] = {"seen": {}, "unseen": {}}
    for image_id in sorted(entity_index):
        es = EntitySet(image_id=image_id, raw_entities=(),
                       matched_entities=tuple(sorted(entity_index[image_id])))
        for r in generate_riddles(es, graph, linearize_config):
            uid = riddle_uid(r.source_edge_id, r.hidden_side)
            bucket = "unseen" if r.source_edge_id in spec.held_out_edge_ids else "seen"
            pools[bucket].setdefault(uid, r)

    # Surface-level disjointness: drop unseen riddles whose exact text can
    # also be generated from trainable knowledge.
    seen_realizable = trainable_texts(graph, spec.held_out_edge_ids,
                                      linearize_config or default_linearize_config())
    pools["unseen"] = {uid: r for uid, r in pools["unseen"].items()
                       if r.text not in seen_realizable}

    splits: dict[str, BenchmarkSplit] = {}
    for bucket in ("seen", "unseen"):
        name = f"text_image_{bucket}"
        split = BenchmarkSplit(name=name, direction="text_to_image", candidate_sets=[])
        uids = sorted(pools[bucket])
        rng = random.Random(derive_seed(seed, name))
        rng.shuffle(uids)
        for uid in uids:
            if len(split.candidate_sets) >= config.queries_per_split:
                break
            riddle = pools[bucket][uid]
            try:
                cs = build_text_to_image_set(
                    riddle, uid, name, entity_index, graph,
                    seed=derive_seed(seed, name, uid), triples=triples,
                )
            except NoPositive:
                split.skipped["no_positive"] += 1
            except PoolExhausted:
                split.skipped["pool_exhausted"] += 1
            else:
                split.candidate_sets.append(cs)
        splits[name] = split

    for bucket in ("seen", "unseen"):
        name = f"image_text_{bucket}"
        split = BenchmarkSplit(name=name, direction="image_to_text", candidate_sets=[])
        image_ids = sorted(entity_index)
        rng = random.Random(derive_seed(seed, name))
        rng.shuffle(image_ids)
        for image_id in image_ids:
            if len(split.candidate_sets) >= config.queries_per_split:
                break
            try:
                cs = build_image_to_text_set(
                    image_id, name, entity_index[image_id], pools[bucket], graph,
                    seed=derive_seed(seed, name, image_id), triples=triples,
                )
            except NoPositive:
                split.skipped["no_positive"] += 1
            except PoolExhausted:
                split.skipped["pool_exhausted"] += 1
            else:
                split.candidate_sets.append(cs)
        splits[name] = split

    riddle_table = {}
    for bucket in ("seen", "unseen"):
        riddle_table.update(pools[bucket])
    return splits, entity_index, riddle_table


def benchmark_to_dict(
    splits: dict[str, BenchmarkSplit],
    entity_index: dict[str, frozenset[str]],
    riddle_table: dict[str, Riddle],
    provenance: dict,
) -> dict:
    riddles = {}
    referenced: set[str] = set()
    for split in splits.values():
        for cs in split.candidate_sets:
            if cs.direction == "text_to_image":
                referenced.add(cs.query)
            else:
                referenced.update(cs.candidates)
    for uid in sorted(referenced):
        r = riddle_table[uid]
        riddles[uid] = {
            "text": r.text,
            "edge_id": r.source_edge_id,
            "hidden_side": r.hidden_side,
            "subject": r.subject,
            "substitution": r.substitution,
            "weight": r.weight,
            "relation": r.relation,
        }
    return {
        "format_version": FORMAT_VERSION,
        "provenance": provenance,
        "images": {img: sorted(ents) for img, ents in sorted(entity_index.items())},
        "riddles": riddles,
        "splits": {
            name: {
                "direction": split.direction,
                "skipped": dict(split.skipped),
                "candidate_sets": [cs.to_dict() for cs in split.candidate_sets],
            }
            for name, split in sorted(splits.items())
        },
    }


def load_benchmark(path: str) -> dict:
    with open_text(path) as fh:
        data = json.load(fh)
    if data.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported benchmark format_version {data.get('format_version')}")
    return data


def candidate_sets_of(data: dict, split_name: str) -> list[CandidateSet]:
    return [CandidateSet.from_dict(d) for d in data["splits"][split_name]["candidate_sets"]]
