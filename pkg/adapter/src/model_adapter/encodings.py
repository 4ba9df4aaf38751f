"""Incipit token encodings.

"simple" is a dependency-free reversible scheme (alternating non-space /
whitespace runs), so decode(truncate(text)) is an exact prefix of text by
construction. Subword encodings such as "o200k_base" go through tiktoken
when it is installed.
"""

from __future__ import annotations

import re
from typing import Tuple

_SIMPLE_RE = re.compile(r"\S+|\s+")


def _simple_truncate(text: str, n: int) -> Tuple[str, int]:
    # whitespace runs count as tokens so the concatenation reproduces the
    # original text exactly; the reported count covers only word tokens
    pieces = _SIMPLE_RE.findall(text)
    out = []
    words = 0
    truncated = False
    for piece in pieces:
        if piece.strip():
            if words == n:
                truncated = True
                break
            words += 1
        out.append(piece)
    if truncated:
        while out and not out[-1].strip():
            out.pop()
    return "".join(out), words


def _tiktoken_truncate(text: str, n: int, encoding: str) -> Tuple[str, int]:
    try:
        import tiktoken
    except ImportError as exc:
        raise ValueError(f"encoding {encoding!r} needs the tiktoken package") from exc
    enc = tiktoken.get_encoding(encoding)
    ids = enc.encode(text)
    kept = ids[:n]
    return enc.decode(kept), len(kept)


def count_and_truncate_incipit(text: str, n: int = 20, encoding: str = "o200k_base") -> Tuple[str, int]:
    """First n tokens of text under the given encoding, decoded back to a prefix.

    Returns (incipit, token_count) where token_count is the number of tokens
    actually kept (the whole text when it is shorter than n tokens).
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    if encoding == "simple":
        return _simple_truncate(text, n)
    return _tiktoken_truncate(text, n, encoding)
