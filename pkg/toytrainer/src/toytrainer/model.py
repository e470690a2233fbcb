"""Tiny dual encoder: bag-of-features towers into a shared unit sphere."""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn


def _to_embedding_bag_input(bags: list[list[int]]) -> tuple[torch.Tensor, torch.Tensor]:
    offsets = [0]
    flat: list[int] = []
    for bag in bags:
        flat.extend(bag)
        offsets.append(len(flat))
    return (torch.tensor(flat, dtype=torch.long),
            torch.tensor(offsets[:-1], dtype=torch.long))


class DualEncoder(nn.Module):
    def __init__(self, n_tokens: int, n_entities: int, dim: int = 64,
                 temperature: float = 0.07):
        super().__init__()
        self.text_tower = nn.EmbeddingBag(max(n_tokens, 1), dim, mode="mean")
        self.image_tower = nn.EmbeddingBag(max(n_entities, 1), dim, mode="mean")
        self.temperature = temperature

    def encode_text(self, bags: list[list[int]]) -> torch.Tensor:
        flat, offsets = _to_embedding_bag_input(bags)
        return F.normalize(self.text_tower(flat, offsets), dim=-1, eps=1e-8)

    def encode_image(self, bags: list[list[int]]) -> torch.Tensor:
        flat, offsets = _to_embedding_bag_input(bags)
        return F.normalize(self.image_tower(flat, offsets), dim=-1, eps=1e-8)

    def contrastive_loss(self, text_bags: list[list[int]],
                         image_bags: list[list[int]]) -> torch.Tensor:
        text = self.encode_text(text_bags)
        image = self.encode_image(image_bags)
        logits = text @ image.T / self.temperature
        targets = torch.arange(len(text_bags))
        return 0.5 * (F.cross_entropy(logits, targets)
                      + F.cross_entropy(logits.T, targets))
