"""Corpus-scale riddle generation and curriculum batch mixing.

``augment_dataset`` streams a caption manifest through extraction and
linearization with a bounded per-image working set.  The mixing side holds
the linear schedule for the augmented-data proportion p and a deterministic
residual-accumulation batch composer whose long-run riddle fraction equals p
exactly.
"""

from __future__ import annotations

import math
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .errors import InvalidBatch, InvalidP, StepOutOfRange
from .extract import Caption, ExtractionConfig, extract_entities, union_entity_sets
from .graph import KnowledgeGraph
from .io import derive_seed
from .linearize import LinearizeConfig, Riddle, generate_riddles


@dataclass(frozen=True, slots=True)
class ImageTextRecord:
    image_id: str
    text: str
    origin: str  # "caption" | "riddle"

    def to_record(self) -> dict:
        return {"image_id": self.image_id, "text": self.text, "origin": self.origin}


@dataclass
class AugmentSummary:
    images_in: int = 0
    captions_in: int = 0
    riddles_out: int = 0
    malformed_lines: int = 0
    skipped: Counter = field(default_factory=Counter)

    def to_dict(self) -> dict:
        return {
            "images_in": self.images_in,
            "captions_in": self.captions_in,
            "riddles_out": self.riddles_out,
            "malformed_lines": self.malformed_lines,
            "skipped": dict(self.skipped),
        }


def _image_groups(records: Iterable[dict], summary: AugmentSummary) -> Iterator[tuple[str, list[str]]]:
    """Group consecutive manifest lines by image_id, validating as we go."""
    current_id: str | None = None
    captions: list[str] = []
    for rec in records:
        image_id = rec.get("image_id")
        caption = rec.get("caption")
        if not image_id or not isinstance(caption, str) or not caption.strip():
            summary.malformed_lines += 1
            continue
        if image_id != current_id:
            if current_id is not None:
                yield current_id, captions
            current_id, captions = image_id, []
        captions.append(caption)
    if current_id is not None:
        yield current_id, captions


def riddles_for_image(
    image_id: str,
    captions: list[str],
    graph: KnowledgeGraph,
    extraction_config: ExtractionConfig | None = None,
    linearize_config: LinearizeConfig | None = None,
    union_captions: bool = False,
    held_out_edge_ids: frozenset[int] = frozenset(),
    counters: Counter | None = None,
) -> list[Riddle]:
    """All riddles for one image, sorted by (edge_id, hidden side), deduplicated.

    With ``union_captions`` the captions' entity sets are merged before the
    subgraph query; otherwise each caption is processed independently and the
    results merged.  Riddles from held-out edges are dropped.
    """
    counters = counters if counters is not None else Counter()
    entity_sets = [
        extract_entities(Caption(image_id, text), graph, extraction_config)
        for text in captions
    ]
    if union_captions:
        entity_sets = [union_entity_sets(image_id, entity_sets)]
    riddles: list[Riddle] = []
    for es in entity_sets:
        riddles.extend(generate_riddles(es, graph, linearize_config, counters))
    riddles.sort(key=lambda r: (r.source_edge_id, r.hidden_side))
    out: list[Riddle] = []
    seen: set[str] = set()
    for r in riddles:
        if r.source_edge_id in held_out_edge_ids:
            counters["skipped_held_out_edge"] += 1
            continue
        if r.text in seen:
            continue
        seen.add(r.text)
        out.append(r)
    return out


def augment_dataset(
    manifest: Iterable[dict],
    graph: KnowledgeGraph,
    extraction_config: ExtractionConfig | None = None,
    linearize_config: LinearizeConfig | None = None,
    union_captions: bool = False,
    held_out_edge_ids: frozenset[int] = frozenset(),
    test_image_ids: frozenset[str] = frozenset(),
    summary: AugmentSummary | None = None,
) -> Iterator[Riddle]:
    """Stream riddles for every manifest image; per-record failures are counted,
    never fatal.  Pass a summary object to collect counts while streaming."""
    summary = summary if summary is not None else AugmentSummary()
    for image_id, captions in _image_groups(manifest, summary):
        summary.captions_in += len(captions)
        if image_id in test_image_ids:
            summary.skipped["test_image"] += 1
            continue
        summary.images_in += 1
        for riddle in riddles_for_image(
            image_id, captions, graph, extraction_config, linearize_config,
            union_captions, held_out_edge_ids, summary.skipped,
        ):
            summary.riddles_out += 1
            yield riddle


@dataclass(frozen=True)
class MixSchedule:
    p_start: float
    p_end: float
    total_steps: int

    def __post_init__(self):
        if not (0.0 <= self.p_start <= 1.0 and 0.0 <= self.p_end <= 1.0):
            raise InvalidP(f"schedule endpoints must lie in [0,1]: {self.p_start}, {self.p_end}")
        if self.total_steps <= 0:
            raise InvalidBatch(f"total_steps must be positive: {self.total_steps}")


def schedule_p(schedule: MixSchedule, step: int) -> float:
    """Linear interpolation from p_start at step 0 to p_end at total_steps.

    The endpoints are returned exactly, not through the interpolation
    arithmetic, so p(0) == p_start and p(total_steps) == p_end bit-for-bit.
    """
    if step < 0 or step > schedule.total_steps:
        raise StepOutOfRange(f"step {step} outside [0, {schedule.total_steps}]")
    if step == 0:
        return schedule.p_start
    if step == schedule.total_steps:
        return schedule.p_end
    p = schedule.p_start + (schedule.p_end - schedule.p_start) * step / schedule.total_steps
    return min(1.0, max(0.0, p))


class CyclingSampler:
    """Endless record source: seeded shuffle, reshuffled with a fresh seed on
    every cycle through the data."""

    def __init__(self, records: list, seed: int):
        if not records:
            raise ValueError("cannot cycle over an empty source")
        self._records = list(records)
        self._seed = seed
        self._cycle = 0
        self._queue: list = []

    def __next__(self):
        if not self._queue:
            order = list(self._records)
            random.Random(derive_seed(self._seed, self._cycle)).shuffle(order)
            self._queue = order[::-1]
            self._cycle += 1
        return self._queue.pop()

    def __iter__(self):
        return self


def compose_batch(
    caption_source: Iterator[ImageTextRecord],
    riddle_source: Iterator[ImageTextRecord],
    batch_size: int,
    p: float,
    carry: float,
    rng: random.Random,
) -> tuple[list[ImageTextRecord], float]:
    """One mixed batch with k riddles, k from residual accumulation.

    carry += p * batch_size; k = floor(carry); carry -= k.  The leftover
    fraction persists across batches, so the realized riddle fraction tracks
    p exactly in the long run.  Batch order is a seeded interleave.
    """
    if not 0.0 <= p <= 1.0:
        raise InvalidP(f"p={p} outside [0,1]")
    if batch_size <= 0:
        raise InvalidBatch(f"batch_size={batch_size}")
    carry += p * batch_size
    k = min(int(math.floor(carry)), batch_size)
    carry -= k
    batch = [next(riddle_source) for _ in range(k)]
    batch.extend(next(caption_source) for _ in range(batch_size - k))
    rng.shuffle(batch)
    return batch, carry


def mix_stream(
    captions: list[ImageTextRecord],
    riddles: list[ImageTextRecord],
    schedule: MixSchedule,
    batch_size: int,
    seed: int,
) -> Iterator[tuple[int, ImageTextRecord]]:
    """(step, record) pairs for the whole schedule, one batch per step."""
    caption_source = CyclingSampler(captions, seed)
    riddle_source = CyclingSampler(riddles, seed + 1) if riddles else None
    rng = random.Random(seed + 2)
    carry = 0.0
    for step in range(schedule.total_steps):
        p = schedule_p(schedule, step)
        if riddle_source is None:
            if p > 0:
                raise InvalidP("schedule requires riddles but the riddle source is empty")
            batch = [next(caption_source) for _ in range(batch_size)]
            rng.shuffle(batch)
        else:
            batch, carry = compose_batch(caption_source, riddle_source, batch_size, p, carry, rng)
        for rec in batch:
            yield step, rec
