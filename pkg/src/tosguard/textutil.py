"""Shared text helpers: tokenization, word counting, whitespace cleanup."""

from __future__ import annotations

import re

_WORD_RE = re.compile(r"\w+", re.UNICODE)
_WS_RE = re.compile(r"\s+")


def tokenize(text: str) -> list[str]:
    """Lowercase tokens split on non-alphanumeric boundaries (Unicode-aware)."""
    return _WORD_RE.findall(text.lower())


def word_count(text: str) -> int:
    """Whitespace-delimited word count."""
    return len(text.split())


def normalize_ws(text: str) -> str:
    """Collapse whitespace runs to single spaces and trim."""
    return _WS_RE.sub(" ", text).strip()
