"""Packed Hamming-distance kernels.

Fingerprints are stored as little-endian-bit-packed bytes, zero-padded up
to whole 64-bit words; distance is XOR + population count over those
words. The scan over a corpus is the package's hot loop, so it ships in
two interchangeable backends:

* ``numba`` — ``@njit``-compiled word loop (default when numba imports)
* ``numpy`` — vectorized ``np.bitwise_count`` fallback

Selection: the ``BINARYSHIELD_BACKEND`` environment variable (``auto``,
``numba`` or ``numpy``, default ``auto``), read at import time. Under
``auto`` with numba importable, both backends stay callable side by side
(``bench kernels`` in the CLI compares them); ``numpy`` disables numba
entirely, which is the escape hatch for broken JIT environments.
"""

from __future__ import annotations

import os

import numpy as np

WORD_BYTES = 8

_env = os.environ.get("BINARYSHIELD_BACKEND", "auto").strip().lower()
if _env not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"BINARYSHIELD_BACKEND must be auto, numba or numpy (got {_env!r})")

HAVE_NUMBA = False
if _env in ("auto", "numba"):
    try:
        from numba import njit

        HAVE_NUMBA = True
    except ImportError:
        if _env == "numba":
            raise ImportError(
                "BINARYSHIELD_BACKEND=numba but numba is not installed")

_ACTIVE = "numba" if (HAVE_NUMBA and _env != "numpy") else "numpy"


def active_backend() -> str:
    """Backend used when no explicit backend is requested."""
    return _ACTIVE


def available_backends() -> tuple[str, ...]:
    return ("numba", "numpy") if HAVE_NUMBA else ("numpy",)


# -- layout helpers ----------------------------------------------------------

def words_per_row(n_bytes: int) -> int:
    return (n_bytes + WORD_BYTES - 1) // WORD_BYTES


def bytes_to_words(packed: bytes | np.ndarray) -> np.ndarray:
    """One packed payload -> (w,) uint64 row, zero-padded to a word boundary."""
    raw = np.frombuffer(bytes(packed), dtype=np.uint8)
    w = words_per_row(raw.size)
    padded = np.zeros(w * WORD_BYTES, dtype=np.uint8)
    padded[: raw.size] = raw
    return padded.view(np.uint64)


def rows_to_words(rows: np.ndarray) -> np.ndarray:
    """(n, n_bytes) uint8 matrix -> (n, w) uint64 word matrix."""
    if rows.ndim != 2 or rows.dtype != np.uint8:
        raise ValueError("expected a 2-D uint8 matrix of packed rows")
    n, n_bytes = rows.shape
    w = words_per_row(n_bytes)
    padded = np.zeros((n, w * WORD_BYTES), dtype=np.uint8)
    padded[:, :n_bytes] = rows
    return np.ascontiguousarray(padded).view(np.uint64)


# -- numpy backend -----------------------------------------------------------

def _pair_distance_numpy(a: np.ndarray, b: np.ndarray) -> int:
    return int(np.bitwise_count(np.bitwise_xor(a, b)).sum())


def _scan_distances_numpy(corpus_words: np.ndarray, query_words: np.ndarray) -> np.ndarray:
    return np.bitwise_count(np.bitwise_xor(corpus_words, query_words)).sum(
        axis=1, dtype=np.int64)


# -- numba backend -----------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True, inline="always")
    def _popcount64(x):
        # SWAR popcount; LLVM lowers this pattern to the POPCNT instruction.
        x = x - ((x >> np.uint64(1)) & np.uint64(0x5555555555555555))
        x = (x & np.uint64(0x3333333333333333)) + (
            (x >> np.uint64(2)) & np.uint64(0x3333333333333333))
        x = (x + (x >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
        return np.int64((x * np.uint64(0x0101010101010101)) >> np.uint64(56))

    @njit(cache=True)
    def _pair_distance_numba(a, b):
        acc = np.int64(0)
        for j in range(a.shape[0]):
            acc += _popcount64(a[j] ^ b[j])
        return acc

    @njit(cache=True)
    def _scan_distances_numba(corpus_words, query_words):
        n, w = corpus_words.shape
        out = np.empty(n, dtype=np.int64)
        for i in range(n):
            acc = np.int64(0)
            for j in range(w):
                acc += _popcount64(corpus_words[i, j] ^ query_words[j])
            out[i] = acc
        return out


def _resolve(backend: str | None) -> str:
    if backend is None:
        return _ACTIVE
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not HAVE_NUMBA:
        raise ValueError("numba backend requested but numba is not installed")
    return backend


# -- public API ---------------------------------------------------------------

def pair_distance(a_words: np.ndarray, b_words: np.ndarray,
                  backend: str | None = None) -> int:
    """Hamming distance between two uint64 word rows of equal width."""
    if a_words.shape != b_words.shape:
        raise ValueError(
            f"word rows differ in width: {a_words.shape} vs {b_words.shape}")
    if _resolve(backend) == "numba":
        return int(_pair_distance_numba(a_words, b_words))
    return _pair_distance_numpy(a_words, b_words)


def scan_distances(corpus_words: np.ndarray, query_words: np.ndarray,
                   backend: str | None = None) -> np.ndarray:
    """Distances from one query row to every corpus row, as int64 (n,)."""
    if corpus_words.ndim != 2 or query_words.ndim != 1:
        raise ValueError("expected corpus (n, w) and query (w,)")
    if corpus_words.shape[1] != query_words.shape[0]:
        raise ValueError(
            f"word width mismatch: corpus {corpus_words.shape[1]} vs "
            f"query {query_words.shape[0]}")
    if _resolve(backend) == "numba":
        return _scan_distances_numba(corpus_words, query_words)
    return _scan_distances_numpy(corpus_words, query_words)


def warmup() -> None:
    """Trigger one-time JIT compilation so timed regions exclude it."""
    if HAVE_NUMBA:
        row = np.zeros(2, dtype=np.uint64)
        _pair_distance_numba(row, row)
        _scan_distances_numba(np.zeros((2, 2), dtype=np.uint64), row)
