"""scikit-learn compatible transformers over the caption-to-riddle pathway.

The two pipeline stages that are genuinely transform-shaped get estimator
wrappers so they compose with sklearn Pipelines and grid tooling:

    Pipeline([
        ("entities", CaptionEntityExtractor(graph=g)),
        ("riddles", RiddleGenerator(graph=g, tau=0.5)),
    ]).fit_transform(captions)

Inputs are validated leniently: captions may be Caption objects, dicts with
image_id/caption (or text) keys, (image_id, text) pairs, or bare strings.
"""

from __future__ import annotations

from dataclasses import replace

from sklearn.base import BaseEstimator, TransformerMixin

from .extract import (
    Caption,
    EntitySet,
    ExtractionConfig,
    default_extraction_config,
    extract_candidate_terms,
    match_to_graph,
)
from .graph import KnowledgeGraph
from .linearize import LinearizeConfig, Riddle, default_linearize_config, generate_riddles


def check_captions(X) -> list[Caption]:
    """Coerce heterogeneous caption inputs into Caption records."""
    captions: list[Caption] = []
    for i, item in enumerate(X):
        if isinstance(item, Caption):
            cap = item
        elif isinstance(item, dict):
            text = item.get("caption", item.get("text"))
            if not isinstance(text, str):
                raise ValueError(f"caption record {i} lacks a caption/text string")
            cap = Caption(image_id=str(item.get("image_id", i)), text=text)
        elif isinstance(item, (tuple, list)) and len(item) == 2:
            cap = Caption(image_id=str(item[0]), text=str(item[1]))
        elif isinstance(item, str):
            cap = Caption(image_id=str(i), text=item)
        else:
            raise ValueError(f"cannot interpret caption input of type {type(item)!r}")
        captions.append(cap)
    return captions


def _check_graph(graph) -> KnowledgeGraph:
    if not isinstance(graph, KnowledgeGraph):
        raise ValueError("graph must be a KnowledgeGraph; ingest or load a snapshot first")
    return graph


class CaptionEntityExtractor(BaseEstimator, TransformerMixin):
    """Captions in, graph-matched EntitySets out."""

    def __init__(self, graph: KnowledgeGraph | None = None,
                 extraction_config: ExtractionConfig | None = None,
                 max_node_degree_cutoff: int = 50_000):
        self.graph = graph
        self.extraction_config = extraction_config
        self.max_node_degree_cutoff = max_node_degree_cutoff

    def _config(self) -> ExtractionConfig:
        base = self.extraction_config or default_extraction_config()
        return replace(base, max_node_degree_cutoff=self.max_node_degree_cutoff)

    def fit(self, X, y=None):
        _check_graph(self.graph)
        return self

    def transform(self, X) -> list[EntitySet]:
        graph = _check_graph(self.graph)
        config = self._config()
        out = []
        for cap in check_captions(X):
            terms = extract_candidate_terms(cap, config)
            out.append(match_to_graph(terms, graph, config, image_id=cap.image_id))
        return out


class RiddleGenerator(BaseEstimator, TransformerMixin):
    """EntitySets in, per-input riddle lists out."""

    def __init__(self, graph: KnowledgeGraph | None = None, tau: float = 0.5,
                 suppress_co_entity: bool = False,
                 linearize_config: LinearizeConfig | None = None):
        self.graph = graph
        self.tau = tau
        self.suppress_co_entity = suppress_co_entity
        self.linearize_config = linearize_config

    def _config(self) -> LinearizeConfig:
        base = self.linearize_config or default_linearize_config()
        return replace(base, tau=self.tau, suppress_co_entity=self.suppress_co_entity)

    def fit(self, X, y=None):
        _check_graph(self.graph)
        return self

    def transform(self, X) -> list[list[Riddle]]:
        graph = _check_graph(self.graph)
        config = self._config()
        out = []
        for es in X:
            if not isinstance(es, EntitySet):
                raise ValueError("RiddleGenerator expects EntitySet inputs; "
                                 "chain it after CaptionEntityExtractor")
            out.append(generate_riddles(es, graph, config))
        return out
