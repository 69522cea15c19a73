"""Per-service fingerprint log with brute-force packed-Hamming search.

Entries are append-only and keep their arrival order; searches order
results by (distance, insertion sequence) so seeded experiments reproduce
identical match lists. The scan itself runs over a lazily built uint64
word matrix through :mod:`binaryshield.kernels`.
"""

from __future__ import annotations

import csv
import io
import json
import struct
import threading
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .errors import CorruptPayload, DimensionMismatch
from .fingerprint import (BinaryFingerprint, PrivatizedFingerprint, packed_length)

SNAPSHOT_MAGIC = b"BSFP\x00\x01"

QueryLike = bytes | BinaryFingerprint | PrivatizedFingerprint


@dataclass(frozen=True)
class StoredFingerprint:
    id: str
    bits: bytes
    dim: int
    alpha: float | None = None
    metadata: dict[str, str] = field(default_factory=dict)
    inserted_at: int | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("fingerprint id must be non-empty")
        if len(self.bits) != packed_length(self.dim):
            raise CorruptPayload(
                f"entry {self.id}: payload is {len(self.bits)} bytes, "
                f"expected {packed_length(self.dim)} for dim {self.dim}")
        object.__setattr__(self, "bits", bytes(self.bits))


@dataclass(frozen=True)
class MatchResult:
    id: str
    distance: int
    metadata_overlap: int = 0


class ScanMode(Enum):
    PACKED_HAMMING = "packed_hamming"
    DENSE_COSINE = "dense_cosine"


@dataclass
class ScanReport:
    mode: str
    corpus_size: int
    n_queries: int
    total_seconds: float
    per_query_seconds: list[float]
    backend: str

    @property
    def mean_query_seconds(self) -> float:
        return self.total_seconds / self.n_queries if self.n_queries else 0.0

    def to_json(self) -> str:
        return json.dumps({
            "mode": self.mode,
            "backend": self.backend,
            "corpus_size": self.corpus_size,
            "n_queries": self.n_queries,
            "total_seconds": self.total_seconds,
            "mean_query_seconds": self.mean_query_seconds,
        }, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["query_index", "seconds"])
        for i, s in enumerate(self.per_query_seconds):
            writer.writerow([i, f"{s:.9f}"])
        return buf.getvalue()


def _query_bytes(query: QueryLike, dim: int) -> bytes:
    if isinstance(query, (BinaryFingerprint, PrivatizedFingerprint)):
        if query.dim != dim:
            raise DimensionMismatch(query.dim, dim, "query")
        return query.bits
    data = bytes(query)
    if len(data) != packed_length(dim):
        raise DimensionMismatch(len(data) * 8, dim, "query payload bits")
    return data


def _metadata_overlap(entry_meta: dict[str, str],
                      query_meta: dict[str, str] | None) -> int:
    if not query_meta:
        return 0
    return sum(1 for k, v in query_meta.items() if entry_meta.get(k) == v)


class FingerprintStore:
    """Append-only log; many concurrent readers or one writer at a time."""

    def __init__(self, dim: int | None = None):
        self.dim = dim
        self._entries: list[StoredFingerprint] = []
        self._dense: list[np.ndarray | None] = []
        self._id_index: dict[str, int] = {}
        self._words: np.ndarray | None = None
        self._dense_matrix: np.ndarray | None = None
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)

    def get(self, entry_id: str) -> StoredFingerprint:
        return self._entries[self._id_index[entry_id]]

    def payload_bytes(self) -> int:
        return sum(len(e.bits) for e in self._entries)

    def insert(self, fp: StoredFingerprint, dense: np.ndarray | None = None) -> int:
        """Add one entry; returns its insertion sequence number."""
        if self.dim is None:
            self.dim = fp.dim
        if fp.dim != self.dim:
            raise DimensionMismatch(fp.dim, self.dim, f"entry {fp.id}")
        if fp.id in self._id_index:
            raise ValueError(f"duplicate fingerprint id {fp.id!r}")
        seq = len(self._entries)
        with self._lock:
            self._entries.append(replace(fp, inserted_at=seq))
            self._dense.append(None if dense is None
                               else np.asarray(dense, dtype=np.float32))
            self._id_index[fp.id] = seq
            self._words = None
            self._dense_matrix = None
        return seq

    def insert_many(self, fps: Iterable[StoredFingerprint],
                    dense: Sequence[np.ndarray] | None = None) -> int:
        count = 0
        for i, fp in enumerate(fps):
            self.insert(fp, dense=None if dense is None else dense[i])
            count += 1
        return count

    # -- search ----------------------------------------------------------------

    def _word_matrix(self) -> np.ndarray:
        with self._lock:
            if self._words is None:
                if not self._entries:
                    return np.zeros((0, 1), dtype=np.uint64)
                rows = np.frombuffer(b"".join(e.bits for e in self._entries),
                                     dtype=np.uint8)
                rows = rows.reshape(len(self._entries), packed_length(self.dim))
                self._words = kernels.rows_to_words(rows)
            return self._words

    def _distances(self, query: QueryLike, backend: str | None = None) -> np.ndarray:
        data = _query_bytes(query, self.dim)
        words = self._word_matrix()
        return kernels.scan_distances(words, kernels.bytes_to_words(data),
                                      backend=backend)

    def _ordered(self, idx: np.ndarray, distances: np.ndarray,
                 query_metadata: dict[str, str] | None) -> list[MatchResult]:
        order = np.lexsort((idx, distances[idx]))
        return [MatchResult(id=self._entries[i].id,
                            distance=int(distances[i]),
                            metadata_overlap=_metadata_overlap(
                                self._entries[i].metadata, query_metadata))
                for i in idx[order]]

    def search_threshold(self, query: QueryLike, tau: int,
                         query_metadata: dict[str, str] | None = None,
                         min_metadata_overlap: int = 0) -> list[MatchResult]:
        """Every entry within Hamming distance tau, ordered by
        (distance asc, insertion sequence asc)."""
        if self.dim is None:
            return []
        if not (0 <= tau <= self.dim):
            raise ValueError(f"tau must be in [0, {self.dim}], got {tau}")
        if not self._entries:
            return []
        distances = self._distances(query)
        idx = np.flatnonzero(distances <= tau)
        results = self._ordered(idx, distances, query_metadata)
        if min_metadata_overlap > 0:
            results = [r for r in results if r.metadata_overlap >= min_metadata_overlap]
        return results

    def search_topk(self, query: QueryLike, k: int,
                    query_metadata: dict[str, str] | None = None) -> list[MatchResult]:
        """The k nearest entries, ties broken by insertion sequence.

        Asking for more entries than the store holds returns the whole
        store (documented behaviour, not an error).
        """
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        if self.dim is None or not self._entries:
            return []
        distances = self._distances(query)
        n = distances.size
        if k >= n:
            idx = np.arange(n)
        else:
            kth = np.partition(distances, k - 1)[k - 1]
            less = np.flatnonzero(distances < kth)
            # flatnonzero is ascending, i.e. insertion order, so taking the
            # first equal-distance entries respects the tie-break.
            equal = np.flatnonzero(distances == kth)[: k - less.size]
            idx = np.concatenate([less, equal])
        return self._ordered(idx, distances, query_metadata)

    # -- benchmark ---------------------------------------------------------------

    def _dense_matrix_normalized(self) -> np.ndarray:
        with self._lock:
            if self._dense_matrix is None:
                if any(v is None for v in self._dense):
                    missing = sum(1 for v in self._dense if v is None)
                    raise ValueError(
                        f"DENSE_COSINE scan requires dense vectors for every "
                        f"entry; {missing} of {len(self._dense)} are missing")
                matrix = np.vstack(self._dense).astype(np.float32)
                norms = np.linalg.norm(matrix, axis=1, keepdims=True)
                norms[norms == 0] = 1.0
                self._dense_matrix = matrix / norms
            return self._dense_matrix

    def scan_benchmark(self, queries: Sequence, mode: ScanMode,
                       backend: str | None = None) -> ScanReport:
        """Time a per-query top-1 scan over the whole store.

        Queries are processed one at a time in both modes, mirroring how a
        correlation service answers independent lookups. Matrix packing /
        normalization happens before the timed region (index build cost),
        as does kernel JIT warmup.
        """
        per_query: list[float] = []
        if mode is ScanMode.PACKED_HAMMING:
            words = self._word_matrix()
            kernels.warmup()
            rows = [kernels.bytes_to_words(_query_bytes(q, self.dim)) for q in queries]
            t0 = time.perf_counter()
            for row in rows:
                tq = time.perf_counter()
                distances = kernels.scan_distances(words, row, backend=backend)
                _ = int(distances.argmin()) if distances.size else -1
                per_query.append(time.perf_counter() - tq)
            total = time.perf_counter() - t0
        elif mode is ScanMode.DENSE_COSINE:
            matrix = self._dense_matrix_normalized()
            prepared = []
            for q in queries:
                vec = np.asarray(q, dtype=np.float32).reshape(-1)
                if vec.size != matrix.shape[1]:
                    raise DimensionMismatch(vec.size, matrix.shape[1], "dense query")
                norm = np.linalg.norm(vec)
                prepared.append(vec / norm if norm else vec)
            t0 = time.perf_counter()
            for vec in prepared:
                tq = time.perf_counter()
                scores = matrix @ vec
                _ = int(scores.argmax()) if scores.size else -1
                per_query.append(time.perf_counter() - tq)
            total = time.perf_counter() - t0
        else:
            raise ValueError(f"unknown scan mode {mode!r}")
        return ScanReport(mode=mode.value, corpus_size=len(self._entries),
                          n_queries=len(queries), total_seconds=total,
                          per_query_seconds=per_query,
                          backend=backend or kernels.active_backend()
                          if mode is ScanMode.PACKED_HAMMING else "blas")

    # -- persistence ---------------------------------------------------------------

    def save_snapshot(self, path: str | Path) -> None:
        """Write the length-prefixed snapshot format (id, alpha, metadata,
        packed bits per record; dense vectors are not persisted)."""
        path = Path(path)
        with open(path, "wb") as fh:
            fh.write(SNAPSHOT_MAGIC)
            fh.write(struct.pack("<II", self.dim or 0, len(self._entries)))
            for e in self._entries:
                ident = e.id.encode("utf-8")
                fh.write(struct.pack("<I", len(ident)))
                fh.write(ident)
                if e.alpha is None:
                    fh.write(b"\x00")
                else:
                    fh.write(b"\x01")
                    fh.write(struct.pack("<d", e.alpha))
                fh.write(struct.pack("<I", len(e.metadata)))
                for key in sorted(e.metadata):
                    kb, vb = key.encode("utf-8"), e.metadata[key].encode("utf-8")
                    fh.write(struct.pack("<I", len(kb)))
                    fh.write(kb)
                    fh.write(struct.pack("<I", len(vb)))
                    fh.write(vb)
                fh.write(e.bits)

    @classmethod
    def load_snapshot(cls, path: str | Path) -> "FingerprintStore":
        path = Path(path)
        with open(path, "rb") as fh:
            magic = fh.read(len(SNAPSHOT_MAGIC))
            if magic != SNAPSHOT_MAGIC:
                raise CorruptPayload(f"{path}: bad snapshot magic {magic!r}")
            dim, count = struct.unpack("<II", fh.read(8))
            store = cls(dim=dim or None)
            n_bytes = packed_length(dim) if dim else 0
            for _ in range(count):
                (id_len,) = struct.unpack("<I", fh.read(4))
                ident = fh.read(id_len).decode("utf-8")
                has_alpha = fh.read(1) == b"\x01"
                alpha = struct.unpack("<d", fh.read(8))[0] if has_alpha else None
                (n_meta,) = struct.unpack("<I", fh.read(4))
                metadata = {}
                for _ in range(n_meta):
                    (klen,) = struct.unpack("<I", fh.read(4))
                    key = fh.read(klen).decode("utf-8")
                    (vlen,) = struct.unpack("<I", fh.read(4))
                    metadata[key] = fh.read(vlen).decode("utf-8")
                bits = fh.read(n_bytes)
                if len(bits) != n_bytes:
                    raise CorruptPayload(f"{path}: truncated record for {ident}")
                store.insert(StoredFingerprint(id=ident, bits=bits, dim=dim,
                                               alpha=alpha, metadata=metadata))
        return store
