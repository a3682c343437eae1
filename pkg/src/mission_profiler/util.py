"""Shared helpers: canonical JSON serialization, file hashing, seed derivation.

Every artifact file the pipeline writes goes through ``canonical_dumps`` /
``write_jsonl`` so that identical inputs produce byte-identical outputs.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Iterable, Iterator


def canonical_dumps(obj: Any) -> str:
    """Serialize to JSON with sorted keys and fixed separators (byte-stable)."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def write_json(path: str | Path, obj: Any) -> None:
    Path(path).write_text(canonical_dumps(obj) + "\n", encoding="utf-8")


def read_json(path: str | Path) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_jsonl(path: str | Path, rows: Iterable[Any]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(canonical_dumps(row) + "\n")


def iter_jsonl(path: str | Path) -> Iterator[tuple[int, Any]]:
    """Yield (1-based line number, parsed object) per non-blank line.

    Blank lines yield (lineno, None) so callers can account for every input
    line; parse failures propagate as json.JSONDecodeError.
    """
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                yield lineno, None
                continue
            yield lineno, json.loads(line)


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def derive_seed(master: int, *names: object) -> int:
    """Derive a named sub-seed from a master seed.

    All randomness in the pipeline flows from one top-level seed through
    this function, keyed by stage/index names, so stages stay independent
    and reproducible.
    """
    tag = ":".join([str(master)] + [str(n) for n in names])
    digest = hashlib.sha256(tag.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")
