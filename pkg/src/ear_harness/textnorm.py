"""Text normalization shared by answer matching and correctness scoring."""

from __future__ import annotations

import re

_PUNCT = re.compile(r"[^\w\s']")
_APOSTROPHE = re.compile(r"(?<!\w)'|'(?!\w)")  # strip quote marks, keep don't
_WS = re.compile(r"\s+")
_ARTICLES = {"a", "an", "the"}


def normalize(text: str, drop_articles: bool = False) -> str:
    """Lowercase, strip punctuation, collapse whitespace.

    With ``drop_articles`` also removes a/an/the, which is the convention
    for matching short QA answers inside longer responses.
    """
    t = text.lower()
    t = _PUNCT.sub(" ", t)
    t = _APOSTROPHE.sub(" ", t)
    words = _WS.split(t.strip())
    if drop_articles:
        words = [w for w in words if w not in _ARTICLES]
    return " ".join(w for w in words if w)


def norm_tokens(text: str) -> list[str]:
    """Normalized word list of ``text`` (articles kept)."""
    n = normalize(text)
    return n.split() if n else []
