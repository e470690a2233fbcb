"""Acc@50 scoring of benchmark runs plus corpus distribution statistics.

The metric: rank the 50 candidates of a query by descending score (ties broken
by ascending candidate id) and report |top-n intersect positives| / n with
n = |positives|.  It depends on the ranking only, so any strictly monotone
rescaling of a model's scores leaves every number unchanged.
"""

from __future__ import annotations

import csv
import json
import math
import statistics
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from .benchmark import CandidateSet, candidate_sets_of
from .errors import MissingScore
from .io import open_text
from .lexicon import Lexicon, default_lexicon, tokenize

METRIC_DEFINITION = (
    "Acc@50: mean over queries of |top-n candidates ∩ positives| / n, where "
    "n = |positives|, candidates are ranked by descending score and ties are "
    "broken by ascending candidate id."
)


@dataclass
class ScoreMatrix:
    entries: dict[tuple[str, str], float]
    model_name: str = "model"

    def score(self, query_id: str, candidate_id: str) -> float:
        try:
            return self.entries[(query_id, candidate_id)]
        except KeyError:
            raise MissingScore(query_id, candidate_id) from None


def load_scores(path: str, model_name: str | None = None) -> ScoreMatrix:
    """Read a `query_id,candidate_id,score` CSV; every score must be finite
    and every pair unique."""
    entries: dict[tuple[str, str], float] = {}
    with open_text(path) as fh:
        reader = csv.DictReader(fh)
        required = {"query_id", "candidate_id", "score"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValueError(f"{path}: expected CSV header query_id,candidate_id,score")
        for row in reader:
            key = (row["query_id"], row["candidate_id"])
            value = float(row["score"])
            if not math.isfinite(value):
                raise ValueError(f"{path}: non-finite score for {key}")
            if key in entries:
                raise ValueError(f"{path}: duplicate score for {key}")
            entries[key] = value
    if model_name is None:
        model_name = path.rsplit("/", 1)[-1].removesuffix(".csv")
    return ScoreMatrix(entries=entries, model_name=model_name)


def _accuracy_fraction(cs: CandidateSet, scores: ScoreMatrix, tie_break: str) -> Fraction:
    pairs = [(scores.score(cs.query_id, c), c) for c in cs.candidates]
    if tie_break == "candidate_id":
        ranked = sorted(pairs, key=lambda sc: (-sc[0], sc[1]))
    elif tie_break == "positives_last":
        ranked = sorted(pairs, key=lambda sc: (-sc[0], sc[1] in cs.positive_ids, sc[1]))
    else:
        raise ValueError(f"unknown tie_break {tie_break!r}")
    n = len(cs.positive_ids)
    top = {c for _, c in ranked[:n]}
    return Fraction(len(top & cs.positive_ids), n)


def accuracy_at_candidates(
    cs: CandidateSet,
    scores: ScoreMatrix,
    tie_break: str = "candidate_id",
) -> float:
    """Top-n precision for one candidate set; raises MissingScore on gaps."""
    return float(_accuracy_fraction(cs, scores, tie_break))


@dataclass
class EvalReport:
    model_name: str
    split_accuracy: dict[str, float | None]  # None for a split with no queries
    per_query: dict[str, dict[str, float]]
    tie_count: int
    tie_break: str

    def to_dict(self) -> dict:
        return {
            "metric": METRIC_DEFINITION,
            "model": self.model_name,
            "tie_break": self.tie_break,
            "tie_count": self.tie_count,
            "split_accuracy": self.split_accuracy,
            "per_query": self.per_query,
        }


def evaluate_report(benchmark: dict, scores: ScoreMatrix, tie_break: str = "candidate_id") -> EvalReport:
    """Per-split mean Acc@50 over every candidate set in the benchmark file.

    The split mean is accumulated with exact rationals, so it is independent
    of candidate-set order.
    """
    split_accuracy: dict[str, float] = {}
    per_query: dict[str, dict[str, float]] = {}
    tie_count = 0
    for split_name in sorted(benchmark["splits"]):
        sets = candidate_sets_of(benchmark, split_name)
        accs: dict[str, float] = {}
        total = Fraction(0)
        for cs in sets:
            values = [scores.score(cs.query_id, c) for c in cs.candidates]
            if len(set(values)) < len(values):
                tie_count += 1
            acc = _accuracy_fraction(cs, scores, tie_break)
            accs[cs.query_id] = float(acc)
            total += acc
        per_query[split_name] = accs
        split_accuracy[split_name] = float(total / len(sets)) if sets else None
    return EvalReport(
        model_name=scores.model_name,
        split_accuracy=split_accuracy,
        per_query=per_query,
        tie_count=tie_count,
        tie_break=tie_break,
    )


def format_report_text(report: EvalReport) -> str:
    names = sorted(report.split_accuracy)
    width = max([len(n) for n in names] + [10])
    def cell(name: str) -> str:
        acc = report.split_accuracy[name]
        return "-" if acc is None else f"{acc:.4f}"

    lines = [
        METRIC_DEFINITION,
        f"model: {report.model_name}   tie_break: {report.tie_break}   "
        f"queries with tied scores: {report.tie_count}",
        "",
        "  ".join(n.ljust(width) for n in names),
        "  ".join(cell(n).ljust(width) for n in names),
    ]
    return "\n".join(lines)


@dataclass
class CorpusStats:
    mode: str
    count: int
    pos_histogram: dict[str, float] = field(default_factory=dict)
    token_histogram: dict[str, float] = field(default_factory=dict)
    length_mean: float | None = None
    length_median: float | None = None
    length_histogram: dict[int, float] = field(default_factory=dict)
    relation_histogram: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        out: dict = {"mode": self.mode, "count": self.count}
        if self.mode == "pos":
            out["pos_histogram"] = self.pos_histogram
        elif self.mode == "tokens":
            out["token_histogram"] = self.token_histogram
        elif self.mode == "lengths":
            out["length_mean"] = self.length_mean
            out["length_median"] = self.length_median
            out["length_histogram"] = {str(k): v for k, v in sorted(self.length_histogram.items())}
        elif self.mode == "relations":
            out["relation_histogram"] = self.relation_histogram
        return out


def _fractions(counter: Counter) -> dict:
    total = sum(counter.values())
    if total == 0:
        return {}
    return {k: v / total for k, v in sorted(counter.items())}


def compute_corpus_stats(
    records: Iterable[dict | str],
    lexicon: Lexicon | None = None,
    mode: str = "pos",
) -> CorpusStats:
    """Streaming histogram over texts: POS tags (punctuation excluded), word
    tokens, whitespace-token lengths, or riddle relation provenance."""
    if mode not in ("pos", "tokens", "lengths", "relations"):
        raise ValueError(f"unknown stats mode {mode!r}")
    lexicon = lexicon or default_lexicon()
    counter: Counter = Counter()
    lengths: list[int] = []
    count = 0
    for rec in records:
        count += 1
        if mode == "relations":
            if not isinstance(rec, dict) or "relation" not in rec:
                raise ValueError("relations mode requires riddle records with a 'relation' field")
            counter[rec["relation"]] += 1
            continue
        text = rec["text"] if isinstance(rec, dict) else rec
        if mode == "lengths":
            lengths.append(len(text.split()))
        elif mode == "tokens":
            counter.update(tokenize(text))
        else:
            counter.update(lexicon.tag(tok) for tok in tokenize(text))
    stats = CorpusStats(mode=mode, count=count)
    if mode == "pos":
        stats.pos_histogram = _fractions(counter)
    elif mode == "tokens":
        stats.token_histogram = _fractions(counter)
    elif mode == "relations":
        stats.relation_histogram = _fractions(counter)
    else:
        if lengths:
            stats.length_mean = statistics.fmean(lengths)
            stats.length_median = float(statistics.median(lengths))
            stats.length_histogram = _fractions(Counter(lengths))
    return stats


def write_report(report: EvalReport, path: str) -> None:
    with open_text(path, "wt") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
