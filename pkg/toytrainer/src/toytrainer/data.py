"""File-interface loaders: mix stream, entity sidecar, benchmark JSON.

The trainer never imports the generator package; these three files are its
whole world.  Images are entity bags (the nonzero coordinates are exactly the
image's matched entities), texts are word-token bags.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

_TOKEN_RE = re.compile(r"[a-z0-9']+")


class VocabularyMismatch(RuntimeError):
    """Stream and benchmark do not share a feature vocabulary at all."""


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def read_jsonl(path: str) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(json.loads(line))
    return records


@dataclass
class Vocab:
    index: dict[str, int] = field(default_factory=dict)

    def add(self, item: str) -> int:
        if item not in self.index:
            self.index[item] = len(self.index)
        return self.index[item]

    def bag(self, items: list[str]) -> list[int]:
        return [self.index[i] for i in items if i in self.index]

    def __len__(self) -> int:
        return len(self.index)


@dataclass
class TrainingData:
    token_vocab: Vocab
    entity_vocab: Vocab
    # per mix step: list of (text token ids, image entity ids)
    batches: list[list[tuple[list[int], list[int]]]]
    skipped_records: int


def load_training_data(mix_path: str, entities_path: str) -> TrainingData:
    """Batches follow the mix stream's own step grouping.

    Records whose image has no entity bag, or whose text or bag is empty,
    are skipped and counted.
    """
    entity_bags = {
        rec["image_id"]: list(rec["entities"])
        for rec in read_jsonl(entities_path)
    }
    token_vocab = Vocab()
    entity_vocab = Vocab()
    for bag in entity_bags.values():
        for e in bag:
            entity_vocab.add(e)

    by_step: dict[int, list[tuple[list[int], list[int]]]] = {}
    skipped = 0
    for rec in read_jsonl(mix_path):
        tokens = tokenize(rec["text"])
        entities = entity_bags.get(rec["image_id"])
        if not tokens or not entities:
            skipped += 1
            continue
        token_ids = [token_vocab.add(t) for t in tokens]
        entity_ids = [entity_vocab.index[e] for e in entities]
        by_step.setdefault(rec["step"], []).append((token_ids, entity_ids))
    batches = [by_step[step] for step in sorted(by_step)]
    return TrainingData(token_vocab, entity_vocab, batches, skipped)


@dataclass
class BenchmarkData:
    raw: dict
    image_bags: dict[str, list[str]]
    riddle_texts: dict[str, str]

    def split_names(self) -> list[str]:
        return sorted(self.raw["splits"])


def load_benchmark(path: str) -> BenchmarkData:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    images = {img: list(ents) for img, ents in raw["images"].items()}
    riddles = {uid: rec["text"] for uid, rec in raw["riddles"].items()}
    return BenchmarkData(raw=raw, image_bags=images, riddle_texts=riddles)


def check_vocabulary(train: TrainingData, bench: BenchmarkData) -> None:
    """Fail fast when the benchmark shares no features with the stream."""
    bench_entities = {e for bag in bench.image_bags.values() for e in bag}
    if bench_entities and not bench_entities & train.entity_vocab.index.keys():
        raise VocabularyMismatch(
            "no benchmark image entity appears in the training entity vocabulary; "
            "stream and benchmark come from different corpora"
        )
    bench_tokens = {t for text in bench.riddle_texts.values() for t in tokenize(text)}
    if bench_tokens and not bench_tokens & train.token_vocab.index.keys():
        raise VocabularyMismatch(
            "no benchmark riddle token appears in the training token vocabulary"
        )
