"""Unicode-aware text cleanup and tokenization for Bengali news text.

The pipeline is deliberately small: NFC composition, URL removal, an
allow-list of script code points (Bengali block by default, plus ASCII
letters and digits), whitespace splitting. ASCII letters are lowercased so
romanized place names and loanwords compare consistently.
"""

from __future__ import annotations

import re
import unicodedata
from pathlib import Path

# Bengali/Assamese Unicode block, including Bengali digits.
DEFAULT_SCRIPT_RANGES: tuple[tuple[int, int], ...] = ((0x0980, 0x09FF),)

_URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)


def _allowed(ch: str, script_ranges: tuple[tuple[int, int], ...]) -> bool:
    if ch.isascii():
        return ch.isalnum()
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in script_ranges)


def clean_text(text: str, script_ranges: tuple[tuple[int, int], ...] = DEFAULT_SCRIPT_RANGES) -> str:
    """NFC-normalize, drop URLs, replace disallowed characters with spaces."""
    text = unicodedata.normalize("NFC", text)
    text = _URL_RE.sub(" ", text)
    out = []
    for ch in text:
        if _allowed(ch, script_ranges):
            out.append(ch.lower() if ch.isascii() else ch)
        else:
            out.append(" ")
    return "".join(out)


def tokenize(text: str, script_ranges: tuple[tuple[int, int], ...] = DEFAULT_SCRIPT_RANGES) -> list[str]:
    """Split cleaned text on whitespace. Digits are kept; stopwords are not this layer's job."""
    return clean_text(text, script_ranges).split()


def load_stopwords(path: Path | str) -> frozenset[str]:
    """One stopword per line, blank lines ignored. Entries pass through NFC like all tokens."""
    words = set()
    with open(path, encoding="utf-8") as f:
        for line in f:
            w = unicodedata.normalize("NFC", line.strip())
            if w:
                words.add(w)
    return frozenset(words)
