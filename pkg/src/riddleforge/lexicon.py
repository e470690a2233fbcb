"""Bundled word lists and the coarse lexicon-based part-of-speech tagger.

Tagging is context-free lookup over closed-class lists with a default-noun
fallback, producing the 12-tag universal set (NOUN, VERB, ADJ, ADV, PRON,
DET, ADP, NUM, CONJ, PRT, X, '.').  It is deliberately deterministic and
dependency-free; tagging quality affects extraction recall, not pipeline
correctness.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

_TOKEN_RE = re.compile(r"[a-z0-9']+")


def _data_text(name: str) -> str:
    return (resources.files("riddleforge") / "data" / name).read_text(encoding="utf-8")


def load_word_set(name: str) -> frozenset[str]:
    words = set()
    for line in _data_text(name).splitlines():
        line = line.strip().lower()
        if line and not line.startswith("#"):
            words.add(line)
    return frozenset(words)


def load_lemma_table(name: str = "lemmas.tsv") -> dict[str, str]:
    table: dict[str, str] = {}
    for line in _data_text(name).splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        word, _, lemma = line.partition("\t")
        if word and lemma:
            table[word.strip().lower()] = lemma.strip().lower()
    return table


def load_relation_templates(path: str | None = None) -> dict[str, str]:
    """Relation -> surface phrase. Keys are stored bare ("IsA", not "/r/IsA")."""
    if path is None:
        text = _data_text("relation_templates.tsv")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    table: dict[str, str] = {}
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        rel, _, phrase = line.partition("\t")
        rel = rel.strip()
        if rel.startswith("/r/"):
            rel = rel[3:]
        if rel and phrase.strip():
            table[rel] = phrase.strip().lower()
    return table


@dataclass(frozen=True)
class Lexicon:
    determiners: frozenset[str]
    pronouns: frozenset[str]
    adpositions: frozenset[str]
    conjunctions: frozenset[str]
    particles: frozenset[str]
    numbers: frozenset[str]
    verbs: frozenset[str]
    adjectives: frozenset[str]
    adverbs: frozenset[str]

    def tag(self, token: str) -> str:
        if token in self.determiners:
            return "DET"
        if token in self.adpositions:
            return "ADP"
        if token in self.conjunctions:
            return "CONJ"
        if token in self.particles:
            return "PRT"
        if token in self.numbers or token.isdigit():
            return "NUM"
        if token in self.pronouns:
            return "PRON"
        if token in self.verbs:
            return "VERB"
        if token in self.adjectives:
            return "ADJ"
        if token in self.adverbs:
            return "ADV"
        return "NOUN"


@lru_cache(maxsize=1)
def default_lexicon() -> Lexicon:
    return Lexicon(
        determiners=load_word_set("determiners.txt"),
        pronouns=load_word_set("pronouns.txt"),
        adpositions=load_word_set("adpositions.txt"),
        conjunctions=load_word_set("conjunctions.txt"),
        particles=load_word_set("particles.txt"),
        numbers=load_word_set("numbers.txt"),
        verbs=load_word_set("verbs.txt"),
        adjectives=load_word_set("adjectives.txt"),
        adverbs=load_word_set("adverbs.txt"),
    )


def tokenize(text: str) -> list[str]:
    """Lowercase word tokens; punctuation splits and is dropped, possessive
    clitics are stripped."""
    tokens = []
    for tok in _TOKEN_RE.findall(text.lower()):
        tok = tok.strip("'")
        if tok.endswith("'s"):
            tok = tok[:-2]
        if tok:
            tokens.append(tok)
    return tokens
