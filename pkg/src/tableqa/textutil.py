"""Text canonicalization and fingerprinting.

Every prompt fingerprint, embedding, and word-window comparison in the
pipeline runs over the same canonical form so fixtures stay stable across
incidental whitespace or casing differences.
"""

from __future__ import annotations

import hashlib
import re

_WS_RUN = re.compile(r"\s+")
_WORD = re.compile(r"[a-z0-9']+")


def canonicalize(text: str) -> str:
    """Lowercase, collapse whitespace runs to single spaces, strip ends."""
    return _WS_RUN.sub(" ", text.lower()).strip()


def fingerprint(text: str) -> str:
    """Stable hex digest of the canonicalized text."""
    return hashlib.sha256(canonicalize(text).encode("utf-8")).hexdigest()


def words(text: str) -> list[str]:
    """Word tokens of the canonicalized text (letters, digits, apostrophes)."""
    return _WORD.findall(canonicalize(text))


def estimate_tokens(text: str) -> int:
    """Crude size estimate for budgeting: ~4 characters per token, min 1."""
    return max(1, (len(text) + 3) // 4)


def stable_bucket(token: str, buckets: int) -> int:
    """Deterministic hash bucket for a token (independent of PYTHONHASHSEED)."""
    digest = hashlib.md5(token.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") % buckets
