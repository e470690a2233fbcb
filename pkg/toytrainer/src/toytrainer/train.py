"""Training loop plus benchmark scoring: mix stream in, score CSVs out."""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass

import torch

from .data import BenchmarkData, TrainingData, check_vocabulary, load_benchmark, load_training_data, tokenize
from .model import DualEncoder


@dataclass(frozen=True)
class TrainConfig:
    dim: int = 64
    lr: float = 0.05
    temperature: float = 0.07
    seed: int = 0


def train_model(data: TrainingData, config: TrainConfig,
                metrics_path: str | None = None) -> DualEncoder:
    torch.manual_seed(config.seed)
    model = DualEncoder(len(data.token_vocab), len(data.entity_vocab),
                        dim=config.dim, temperature=config.temperature)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.lr)
    log = open(metrics_path, "w", encoding="utf-8") if metrics_path else None
    try:
        for step, batch in enumerate(data.batches):
            text_bags = [b[0] for b in batch]
            image_bags = [b[1] for b in batch]
            loss = model.contrastive_loss(text_bags, image_bags)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            if log:
                log.write(json.dumps({"step": step, "loss": loss.item()}) + "\n")
    finally:
        if log:
            log.close()
    model.eval()
    return model


@torch.no_grad()
def score_benchmark(model: DualEncoder, train: TrainingData, bench: BenchmarkData,
                    out_dir: str) -> dict[str, str]:
    """One cosine-similarity CSV per split, covering every (query, candidate)."""
    os.makedirs(out_dir, exist_ok=True)

    text_cache: dict[str, torch.Tensor] = {}
    image_cache: dict[str, torch.Tensor] = {}

    def text_vec(uid: str) -> torch.Tensor:
        if uid not in text_cache:
            bag = train.token_vocab.bag(tokenize(bench.riddle_texts[uid]))
            text_cache[uid] = model.encode_text([bag])[0]
        return text_cache[uid]

    def image_vec(image_id: str) -> torch.Tensor:
        if image_id not in image_cache:
            bag = train.entity_vocab.bag(bench.image_bags[image_id])
            image_cache[image_id] = model.encode_image([bag])[0]
        return image_cache[image_id]

    paths: dict[str, str] = {}
    all_rows: list[list] = []
    for name in bench.split_names():
        split = bench.raw["splits"][name]
        path = os.path.join(out_dir, f"scores_{name}.csv")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["query_id", "candidate_id", "score"])
            for cs in split["candidate_sets"]:
                if cs["direction"] == "text_to_image":
                    query = text_vec(cs["query"])
                    pairs = [(c, float(query @ image_vec(c))) for c in cs["candidates"]]
                else:
                    query = image_vec(cs["query"])
                    pairs = [(c, float(query @ text_vec(c))) for c in cs["candidates"]]
                for c, score in pairs:
                    writer.writerow([cs["query_id"], c, score])
                    all_rows.append([cs["query_id"], c, score])
        paths[name] = path
    # one combined file so a whole-benchmark eval sees every pair at once
    combined = os.path.join(out_dir, "scores_all.csv")
    with open(combined, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["query_id", "candidate_id", "score"])
        writer.writerows(all_rows)
    paths["all"] = combined
    return paths


def train_and_score(mix_path: str, entities_path: str, benchmark_path: str,
                    out_dir: str, config: TrainConfig | None = None) -> dict[str, str]:
    """The whole client loop; returns the per-split score CSV paths."""
    config = config or TrainConfig()
    train = load_training_data(mix_path, entities_path)
    bench = load_benchmark(benchmark_path)
    check_vocabulary(train, bench)
    os.makedirs(out_dir, exist_ok=True)
    model = train_model(train, config, metrics_path=os.path.join(out_dir, "metrics.jsonl"))
    return score_benchmark(model, train, bench, out_dir)
