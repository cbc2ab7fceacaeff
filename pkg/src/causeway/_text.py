"""Token model shared by search, symptom extraction and classification."""

from __future__ import annotations

import re
from collections.abc import Iterable

_SPLIT = re.compile(r"[^a-z0-9]+")
_ASCII_LOWER = str.maketrans("ABCDEFGHIJKLMNOPQRSTUVWXYZ", "abcdefghijklmnopqrstuvwxyz")


def tokenize(text: str) -> list[str]:
    """ASCII-lowercase ``text`` and split on non-alphanumerics. No stemming."""
    return [t for t in _SPLIT.split(text.translate(_ASCII_LOWER)) if t]


def token_set(text: str) -> frozenset[str]:
    return frozenset(tokenize(text))


def contains_phrase(tokens: list[str], phrase: str) -> bool:
    """True if the tokenized ``phrase`` occurs contiguously in ``tokens``."""
    needle = tokenize(phrase)
    if not needle:
        return False
    n = len(needle)
    first = needle[0]
    for i, tok in enumerate(tokens):
        if tok == first and tokens[i : i + n] == needle:
            return True
    return False


def matching_keywords(text: str, keywords: Iterable[str]) -> list[str]:
    """Keywords (as given) that occur in ``text``, deduplicated and sorted."""
    tokens = tokenize(text)
    return sorted({kw for kw in keywords if contains_phrase(tokens, kw)})
