"""Entity extraction: cleaned candidate terms from captions, matched to graph nodes.

Captions yield noun-phrase candidates after determiner/adjective removal; the
candidates are then lemmatized, normalized, and kept only when they name a
graph node that is not too general (stoplist or degree cutoff).  Everything
here is a pure function over immutable config, so captions can be processed
in parallel freely.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

from .errors import EmptyTerm
from .graph import KnowledgeGraph, normalize_term
from .lexicon import Lexicon, default_lexicon, load_lemma_table, load_word_set, tokenize

# Tags removed from a noun phrase without interrupting it (modifiers), versus
# tags that end the current phrase (anything that cannot sit inside an NP).
_MODIFIER_TAGS = {"ADJ", "NUM"}
_NOUN_TAGS = {"NOUN"}


@dataclass(frozen=True)
class Caption:
    image_id: str
    text: str


@dataclass(frozen=True)
class EntitySet:
    image_id: str
    raw_entities: tuple[str, ...]
    matched_entities: tuple[str, ...]


@dataclass(frozen=True)
class ExtractionConfig:
    lexicon: Lexicon
    general_entity_stoplist: frozenset[str]
    lemma_table: dict[str, str] = field(default_factory=dict)
    max_node_degree_cutoff: int = 50_000

    def __post_init__(self):
        if self.max_node_degree_cutoff <= 0:
            raise ValueError("max_node_degree_cutoff must be positive")


@lru_cache(maxsize=1)
def default_extraction_config() -> ExtractionConfig:
    return ExtractionConfig(
        lexicon=default_lexicon(),
        general_entity_stoplist=load_word_set("stoplist.txt"),
        lemma_table=load_lemma_table(),
    )


def extract_candidate_terms(caption: Caption, config: ExtractionConfig | None = None) -> list[str]:
    """Noun-phrase candidate terms in first-occurrence order, deduplicated.

    Determiners and adjective-tagged tokens are removed (determiners also
    start a new phrase); each maximal noun run emits the full phrase first,
    then its constituent unigrams.
    """
    config = config or default_extraction_config()
    lexicon = config.lexicon
    phrases: list[list[str]] = []
    current: list[str] = []
    for token in tokenize(caption.text):
        tag = lexicon.tag(token)
        if tag in _NOUN_TAGS:
            current.append(token)
        elif tag in _MODIFIER_TAGS:
            continue
        else:
            if current:
                phrases.append(current)
            current = []
    if current:
        phrases.append(current)

    seen: set[str] = set()
    terms: list[str] = []
    for phrase in phrases:
        candidates = [" ".join(phrase)] + phrase if len(phrase) > 1 else phrase
        for term in candidates:
            if term not in seen:
                seen.add(term)
                terms.append(term)
    return terms


def match_to_graph(
    terms: list[str],
    graph: KnowledgeGraph,
    config: ExtractionConfig | None = None,
    image_id: str = "",
) -> EntitySet:
    """Graph-matched subset of candidate terms, as node URIs.

    A term survives when its lemmatized, normalized form names a graph node,
    it is not stoplisted, and the node's degree stays under the generality
    cutoff.  When a multiword phrase matches, its constituent unigrams are
    suppressed for this caption.
    """
    config = config or default_extraction_config()
    matched: list[str] = []
    matched_nodes: set[str] = set()
    suppressed: set[str] = set()
    for term in terms:
        words = term.split(" ")
        if len(words) == 1 and term in suppressed:
            continue
        if term in config.general_entity_stoplist:
            continue
        lemmatized = " ".join(config.lemma_table.get(w, w) for w in words)
        try:
            node = normalize_term(lemmatized, graph.namespace)
        except EmptyTerm:
            continue
        if node not in graph.nodes:
            continue
        if graph.degree(node) > config.max_node_degree_cutoff:
            continue
        if node not in matched_nodes:
            matched_nodes.add(node)
            matched.append(node)
        if len(words) > 1:
            suppressed.update(words)
    return EntitySet(image_id=image_id, raw_entities=tuple(terms), matched_entities=tuple(matched))


def extract_entities(
    caption: Caption,
    graph: KnowledgeGraph,
    config: ExtractionConfig | None = None,
) -> EntitySet:
    """Convenience composition: candidate terms then graph matching."""
    terms = extract_candidate_terms(caption, config)
    return match_to_graph(terms, graph, config, image_id=caption.image_id)


def union_entity_sets(image_id: str, sets: list[EntitySet]) -> EntitySet:
    """Union per-caption entity sets for one image, preserving first-seen order."""
    raw: list[str] = []
    matched: list[str] = []
    seen_raw: set[str] = set()
    seen_matched: set[str] = set()
    for es in sets:
        for term in es.raw_entities:
            if term not in seen_raw:
                seen_raw.add(term)
                raw.append(term)
        for node in es.matched_entities:
            if node not in seen_matched:
                seen_matched.add(node)
                matched.append(node)
    return EntitySet(image_id=image_id, raw_entities=tuple(raw), matched_entities=tuple(matched))
