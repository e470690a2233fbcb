"""CLI: train the toy dual encoder on a mix stream and score a benchmark."""

from __future__ import annotations

import argparse
import sys

from .data import VocabularyMismatch
from .train import TrainConfig, train_and_score


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="toytrainer")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    p = sub.add_parser("train", help="train on a mix stream and emit score CSVs")
    p.add_argument("--mix", required=True, help="schedule-annotated mix JSONL")
    p.add_argument("--entities", required=True, help="per-image entity JSONL")
    p.add_argument("--benchmark", required=True, help="benchmark JSON")
    p.add_argument("--out-dir", required=True, dest="out_dir")
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--temperature", type=float, default=0.07)
    p.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    config = TrainConfig(dim=args.dim, lr=args.lr,
                         temperature=args.temperature, seed=args.seed)
    try:
        paths = train_and_score(args.mix, args.entities, args.benchmark,
                                args.out_dir, config)
    except FileNotFoundError as exc:
        print(f"toytrainer: I/O error: {exc}", file=sys.stderr)
        return 2
    except (VocabularyMismatch, ValueError, KeyError) as exc:
        print(f"toytrainer: {exc}", file=sys.stderr)
        return 1
    for name, path in sorted(paths.items()):
        print(f"{name}: {path}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
