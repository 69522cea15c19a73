"""Shared tokenization and stable hashing helpers.

Everything here must be deterministic across processes and platforms:
no reliance on PYTHONHASHSEED, locale, or wall time.
"""

from __future__ import annotations

import hashlib
import re

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercase word tokens (runs of ASCII letters/digits)."""
    return _TOKEN_RE.findall(text.lower())


def stable_hash64(data: str | bytes) -> int:
    """Stable 64-bit hash of a string or byte payload (blake2b/8)."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    return int.from_bytes(hashlib.blake2b(data, digest_size=8).digest(), "little")


def derive_seed(*parts: object) -> int:
    """Derive a 64-bit noise seed from structured parts.

    Parts are joined with an unambiguous separator so ("a", "bc") and
    ("ab", "c") never collide.
    """
    joined = "\x1f".join(str(p) for p in parts)
    return stable_hash64(joined)
