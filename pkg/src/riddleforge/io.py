"""Small file helpers: transparent gzip, JSON-lines, checksums."""

from __future__ import annotations

import gzip
import hashlib
import io
import json
import sys
from pathlib import Path
from typing import Iterable, Iterator, TextIO


class _NoCloseStream:
    """Context-manager shim for std streams: flushes instead of closing, so
    `with open_text("-") as fh` cannot kill stdin/stdout."""

    def __init__(self, stream: TextIO):
        self._stream = stream

    def __getattr__(self, name):
        return getattr(self._stream, name)

    def __iter__(self):
        return iter(self._stream)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self._stream.flush()
        return False

    def close(self):
        self._stream.flush()


def open_text(path: str | Path, mode: str = "rt") -> TextIO:
    """Open a text file, decompressing transparently when the name ends in .gz.

    "-" means stdin (read modes) or stdout (write modes).
    """
    if str(path) == "-":
        return _NoCloseStream(sys.stdin if "r" in mode else sys.stdout)
    path = Path(path)
    if path.suffix == ".gz":
        return io.TextIOWrapper(gzip.open(path, mode.replace("t", "") + "b"), encoding="utf-8")
    return open(path, mode, encoding="utf-8")


def read_jsonl(path: str | Path) -> Iterator[dict]:
    with open_text(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)


def write_jsonl(path: str | Path, records: Iterable[dict]) -> int:
    """Write records as JSON-lines; returns the number written."""
    n = 0
    with open_text(path, "wt") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True))
            fh.write("\n")
            n += 1
    return n


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def derive_seed(master_seed: int, *parts: str | int) -> int:
    """Stable per-item seed: hash of the master seed and any identifying parts.

    Parallel workers can process items in any order without changing the
    per-item random stream.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(str(master_seed).encode())
    for part in parts:
        h.update(b"\x00")
        h.update(str(part).encode())
    return int.from_bytes(h.digest(), "big")
