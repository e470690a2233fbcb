"""Subject-hidden riddle generation from 1-hop knowledge subgraphs.

Pipeline per image: bidirectional subgraph query around the matched entities,
weight thresholding plus subject substitution ("this item" / "this person" /
"this place"), then template-based edge-to-text realization.  Output ordering
is fixed by (edge_id, hidden side) so parallel and serial runs emit identical
riddle streams.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Literal

from .errors import UnmappedRelation
from .extract import EntitySet
from .graph import KnowledgeGraph, surface_form
from .lexicon import load_relation_templates, load_word_set

THIS_ITEM = "this item"
THIS_PERSON = "this person"
THIS_PLACE = "this place"
SUBSTITUTION_CLASSES = (THIS_ITEM, THIS_PERSON, THIS_PLACE)

HiddenSide = Literal["head", "tail"]


@dataclass(frozen=True, slots=True)
class SubstitutedEdge:
    """One thresholded edge with its subject endpoint replaced by a token.

    The hidden endpoint holds the substitution token; the visible endpoint
    keeps its node URI until realization.
    """

    edge_id: int
    head: str
    relation: str
    weight: float
    tail: str
    hidden_side: HiddenSide
    subject: str
    substitution: str

    @property
    def visible_node(self) -> str:
        return self.tail if self.hidden_side == "head" else self.head


@dataclass(frozen=True)
class SubGraph:
    subject_nodes: frozenset[str]
    edges: tuple
    substituted: bool = False
    threshold_applied: float | None = None


@dataclass(frozen=True, slots=True)
class Riddle:
    image_id: str
    text: str
    source_edge_id: int
    hidden_side: HiddenSide
    subject: str
    substitution: str
    weight: float
    relation: str

    def to_record(self) -> dict:
        return {
            "image_id": self.image_id,
            "text": self.text,
            "edge_id": self.source_edge_id,
            "hidden_side": self.hidden_side,
            "subject": self.subject,
            "substitution": self.substitution,
            "weight": self.weight,
            "relation": self.relation,
        }


def riddle_from_record(rec: dict) -> Riddle:
    return Riddle(
        image_id=rec["image_id"],
        text=rec["text"],
        source_edge_id=rec["edge_id"],
        hidden_side=rec["hidden_side"],
        subject=rec["subject"],
        substitution=rec["substitution"],
        weight=rec["weight"],
        relation=rec["relation"],
    )


@dataclass(frozen=True)
class LinearizeConfig:
    tau: float = 0.5
    person_lexicon: frozenset[str] = field(default_factory=frozenset)
    place_category_list: frozenset[str] = field(default_factory=frozenset)
    templates: dict[str, str] = field(default_factory=dict)
    suppress_co_entity: bool = False

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError("tau must be non-negative")


@lru_cache(maxsize=1)
def default_linearize_config() -> LinearizeConfig:
    return LinearizeConfig(
        person_lexicon=load_word_set("person_words.txt"),
        place_category_list=load_word_set("place_categories.txt"),
        templates=load_relation_templates(),
    )


def query_bidirectional_subgraph(graph: KnowledgeGraph, entities: EntitySet) -> SubGraph:
    """Edges touching any matched entity as head or tail, deduplicated by
    edge_id and sorted ascending."""
    subjects = frozenset(entities.matched_entities)
    edge_ids: set[int] = set()
    for node in subjects:
        edge_ids.update(graph.out_index.get(node, ()))
        edge_ids.update(graph.in_index.get(node, ()))
    edges = tuple(graph.edges[i] for i in sorted(edge_ids))
    return SubGraph(subject_nodes=subjects, edges=edges)


def classify_substitution(node: str, graph: KnowledgeGraph,
                          config: LinearizeConfig | None = None) -> str:
    """Person if the surface term is a person word; else place if the node is
    the tail of an AtLocation edge or names a scene category; else item."""
    config = config or default_linearize_config()
    surface = surface_form(node, graph.namespace)
    if surface in config.person_lexicon:
        return THIS_PERSON
    for e in graph.edges_touching(node, "incoming"):
        if e.relation == "AtLocation":
            return THIS_PLACE
    if surface in config.place_category_list:
        return THIS_PLACE
    return THIS_ITEM


def substitute_and_filter(sub: SubGraph, graph: KnowledgeGraph,
                          config: LinearizeConfig | None = None) -> SubGraph:
    """Apply the weight threshold (strict w > tau) and hide subject endpoints.

    Each qualifying edge yields one substituted copy per subject endpoint, so
    an edge connecting two image entities yields two copies, one per hidden
    side.  With suppress_co_entity set, copies whose visible endpoint is
    itself an image entity are dropped.
    """
    if sub.substituted:
        raise ValueError("subgraph already substituted")
    config = config or default_linearize_config()
    token_for: dict[str, str] = {}

    def _token(node: str) -> str:
        if node not in token_for:
            token_for[node] = classify_substitution(node, graph, config)
        return token_for[node]

    out: list[SubstitutedEdge] = []
    for e in sub.edges:
        if not e.weight > config.tau:
            continue
        if e.head in sub.subject_nodes:
            if not (config.suppress_co_entity and e.tail in sub.subject_nodes):
                token = _token(e.head)
                out.append(SubstitutedEdge(e.edge_id, token, e.relation, e.weight, e.tail,
                                           "head", e.head, token))
        if e.tail in sub.subject_nodes:
            if not (config.suppress_co_entity and e.head in sub.subject_nodes):
                token = _token(e.tail)
                out.append(SubstitutedEdge(e.edge_id, e.head, e.relation, e.weight, token,
                                           "tail", e.tail, token))
    out.sort(key=lambda s: (s.edge_id, s.hidden_side))
    return SubGraph(subject_nodes=sub.subject_nodes, edges=tuple(out),
                    substituted=True, threshold_applied=config.tau)


def linearize_edge(edge: SubstitutedEdge, templates: dict[str, str],
                   namespace: str = "/c/en/") -> str:
    """Plain concatenation: head surface, relation phrase, tail surface."""
    phrase = templates.get(edge.relation)
    if phrase is None:
        raise UnmappedRelation(edge.relation)
    head = edge.head if edge.hidden_side == "head" else surface_form(edge.head, namespace)
    tail = edge.tail if edge.hidden_side == "tail" else surface_form(edge.tail, namespace)
    return f"{head} {phrase} {tail}"


def _count_token_subsequence(tokens: list[str], needle: list[str]) -> int:
    if not needle or len(needle) > len(tokens):
        return 0
    return sum(
        1
        for i in range(len(tokens) - len(needle) + 1)
        if tokens[i:i + len(needle)] == needle
    )


def generate_riddles(
    caption_entities: EntitySet,
    graph: KnowledgeGraph,
    config: LinearizeConfig | None = None,
    counters: Counter | None = None,
) -> list[Riddle]:
    """All riddles for one image's entity set, ordered by (edge_id, hidden side).

    Riddles that would leak their subject (the subject's surface form appears
    in the text) or that end up with anything other than exactly one
    substitution token are discarded; relations without templates are skipped.
    Exact (image_id, text) duplicates are removed.  Skip reasons are tallied
    into ``counters`` when given.
    """
    config = config or default_linearize_config()
    counters = counters if counters is not None else Counter()
    sub = query_bidirectional_subgraph(graph, caption_entities)
    substituted = substitute_and_filter(sub, graph, config)
    riddles: list[Riddle] = []
    seen_texts: set[str] = set()
    for edge in substituted.edges:
        try:
            text = linearize_edge(edge, config.templates, graph.namespace)
        except UnmappedRelation:
            counters["skipped_unmapped_relation"] += 1
            continue
        tokens = text.split(" ")
        subject_tokens = surface_form(edge.subject, graph.namespace).split(" ")
        if _count_token_subsequence(tokens, subject_tokens) > 0:
            counters["skipped_subject_leak"] += 1
            continue
        occurrences = sum(
            _count_token_subsequence(tokens, s.split(" ")) for s in SUBSTITUTION_CLASSES
        )
        if occurrences != 1:
            counters["skipped_multiple_substitutions"] += 1
            continue
        if text in seen_texts:
            counters["skipped_duplicate_text"] += 1
            continue
        seen_texts.add(text)
        riddles.append(
            Riddle(
                image_id=caption_entities.image_id,
                text=text,
                source_edge_id=edge.edge_id,
                hidden_side=edge.hidden_side,
                subject=edge.subject,
                substitution=edge.substitution,
                weight=edge.weight,
                relation=edge.relation,
            )
        )
    return riddles
