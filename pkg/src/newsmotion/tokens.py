"""Word tokenization shared by the embedding, lexicon, and feature stages.

Rule: split on whitespace, lowercase, drop punctuation except hyphens that
join two alphanumeric characters. Chunks that clean down to nothing are
dropped.
"""

from __future__ import annotations

import re

_CHUNK = re.compile(r"\S+")


def _clean(chunk: str) -> str:
    out = []
    lower = chunk.lower()
    for i, ch in enumerate(lower):
        if ch.isalnum():
            out.append(ch)
        elif ch == "-" and 0 < i < len(lower) - 1:
            if lower[i - 1].isalnum() and lower[i + 1].isalnum():
                out.append(ch)
    return "".join(out)


def tokenize_with_offsets(text: str) -> list[tuple[str, int]]:
    """Tokens plus the character offset of the whitespace chunk each came from."""
    result = []
    for m in _CHUNK.finditer(text):
        token = _clean(m.group())
        if token:
            result.append((token, m.start()))
    return result


def tokenize(text: str) -> list[str]:
    return [tok for tok, _ in tokenize_with_offsets(text)]
