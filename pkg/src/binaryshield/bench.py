"""Benchmark harness: random corpora, packed-vs-dense scan comparison, and
the numba-vs-numpy kernel backend comparison."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import kernels
from .fingerprint import packed_length
from .store import FingerprintStore, ScanMode, ScanReport, StoredFingerprint


def random_bit_rows(n: int, dim: int, seed: int) -> np.ndarray:
    """(n, ceil(dim/8)) packed uint8 rows with zeroed padding."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    bits = rng.integers(0, 2, size=(n, dim), dtype=np.uint8)
    return np.packbits(bits, axis=1, bitorder="little")


def make_random_store(n: int, dim: int, seed: int,
                      with_dense: bool = False) -> FingerprintStore:
    rows = random_bit_rows(n, dim, seed)
    dense = None
    if with_dense:
        rng = np.random.Generator(np.random.Philox(key=seed + 1))
        dense = rng.standard_normal((n, dim)).astype(np.float32)
    store = FingerprintStore(dim=dim)
    n_bytes = packed_length(dim)
    for i in range(n):
        store.insert(StoredFingerprint(id=f"e{i}", bits=rows[i].tobytes(),
                                       dim=dim),
                     dense=None if dense is None else dense[i])
    return store


def make_random_queries(q: int, dim: int, seed: int,
                        with_dense: bool = False):
    rows = random_bit_rows(q, dim, seed)
    packed = [rows[i].tobytes() for i in range(q)]
    if not with_dense:
        return packed
    rng = np.random.Generator(np.random.Philox(key=seed + 1))
    return packed, rng.standard_normal((q, dim)).astype(np.float32)


@dataclass
class EfficiencyReport:
    packed: ScanReport
    dense: ScanReport
    storage_float32_ratio: float
    storage_float64_ratio: float

    @property
    def speedup(self) -> float:
        if self.packed.total_seconds == 0:
            return float("inf")
        return self.dense.total_seconds / self.packed.total_seconds

    def to_json(self) -> str:
        return json.dumps({
            "packed": json.loads(self.packed.to_json()),
            "dense": json.loads(self.dense.to_json()),
            "speedup": self.speedup,
            "storage_float32_ratio": self.storage_float32_ratio,
            "storage_float64_ratio": self.storage_float64_ratio,
        }, sort_keys=True)


def efficiency_run(n: int, n_queries: int, dim: int = 768,
                   seed: int = 0) -> EfficiencyReport:
    """Build one random corpus holding both representations and time a
    per-query top-1 scan in each mode."""
    store = make_random_store(n, dim, seed, with_dense=True)
    packed_queries, dense_queries = make_random_queries(
        n_queries, dim, seed + 1000, with_dense=True)
    packed = store.scan_benchmark(packed_queries, ScanMode.PACKED_HAMMING)
    dense = store.scan_benchmark(list(dense_queries), ScanMode.DENSE_COSINE)
    dense_bytes32 = n * dim * 4
    dense_bytes64 = n * dim * 8
    binary_bytes = n * packed_length(dim)
    return EfficiencyReport(packed=packed, dense=dense,
                            storage_float32_ratio=dense_bytes32 / binary_bytes,
                            storage_float64_ratio=dense_bytes64 / binary_bytes)


def compare_backends(n: int, n_queries: int, dim: int = 768,
                     seed: int = 0) -> dict[str, ScanReport]:
    """Run the packed scan once per available kernel backend."""
    store = make_random_store(n, dim, seed)
    queries = make_random_queries(n_queries, dim, seed + 1000)
    return {backend: store.scan_benchmark(queries, ScanMode.PACKED_HAMMING,
                                          backend=backend)
            for backend in kernels.available_backends()}
