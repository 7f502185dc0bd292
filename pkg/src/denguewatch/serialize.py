"""Shared serialization helpers: canonical JSON, JSONL streams, atomic writes."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Iterator


def canonical_json(obj: Any) -> str:
    """Render an object as canonical JSON: sorted keys, compact separators, raw unicode.

    Both the CLI and the HTTP service emit payloads through this function so
    the two surfaces stay byte-identical for the same data.
    """
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def read_jsonl(path: Path | str) -> Iterator[tuple[int, Any]]:
    """Yield (line_number, parsed_object) for each non-blank line. 1-based lines.

    Raises ValueError naming the line on malformed JSON.
    """
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: line {lineno}: malformed JSON ({exc.msg})") from exc


def write_jsonl(path: Path | str, rows: Iterable[Any]) -> int:
    """Atomically write rows as one JSON object per line. Returns row count."""
    rows = list(rows)
    atomic_write_text(path, "".join(canonical_json(r) + "\n" for r in rows))
    return len(rows)


def append_jsonl(path: Path | str, rows: Iterable[Any]) -> int:
    n = 0
    with open(path, "a", encoding="utf-8") as f:
        for r in rows:
            f.write(canonical_json(r) + "\n")
            n += 1
    return n


def atomic_write_text(path: Path | str, text: str) -> None:
    """Write via a temp file + rename so readers never observe a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_json(path: Path | str) -> Any:
    with open(path, encoding="utf-8") as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: corrupt JSON ({exc.msg})") from exc
