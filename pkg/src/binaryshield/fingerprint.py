"""Embedding -> binary fingerprint transformations and Hamming arithmetic.

Bit layout contract (shared with the wire format and the store): bit i of
a fingerprint lives in byte ``i // 8`` at position ``i % 8``,
least-significant-bit first; padding bits past ``dim - 1`` are zero.

Noise contract: ``randomize`` draws exactly ``dim`` float64 uniforms, in
bit-index order, from numpy's Philox4x64-10 counter generator keyed by the
64-bit seed (``np.random.Generator(np.random.Philox(key=seed)).random(dim)``).
Bit i is kept when ``u_i < p`` (strict) and flipped otherwise. Identical
(bits, alpha, seed) triples therefore reproduce identical output anywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import CorruptPayload, DimensionMismatch

DEFAULT_DIM = 768

_MAX_SEED = 2**64


def _check_seed(seed: int) -> int:
    if not (0 <= int(seed) < _MAX_SEED):
        raise ValueError(f"noise seed must be a uint64, got {seed}")
    return int(seed)


def _uniforms(seed: int, n: int) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(key=_check_seed(seed)))
    return rng.random(n)


def packed_length(dim: int) -> int:
    return (dim + 7) // 8


def pack_bits(bits: Sequence[int] | np.ndarray) -> bytes:
    """Pack a 0/1 sequence LSB-first into ``ceil(len/8)`` bytes."""
    arr = np.asarray(bits, dtype=np.uint8)
    if arr.ndim != 1:
        raise ValueError("pack_bits expects a flat bit sequence")
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValueError("pack_bits expects only 0/1 values")
    return np.packbits(arr, bitorder="little").tobytes()


def unpack_bits(data: bytes, dim: int) -> np.ndarray:
    """Inverse of :func:`pack_bits`; rejects payloads with nonzero padding."""
    if dim < 1:
        raise ValueError(f"dim must be positive, got {dim}")
    expected = packed_length(dim)
    if len(data) != expected:
        raise CorruptPayload(
            f"packed payload is {len(data)} bytes, expected {expected} for dim {dim}")
    _check_padding(data, dim)
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8), count=dim,
                         bitorder="little")


def _check_padding(data: bytes, dim: int) -> None:
    rem = dim % 8
    if rem and data[-1] & ~((1 << rem) - 1) & 0xFF:
        raise CorruptPayload(
            f"nonzero padding bits beyond index {dim - 1} (corrupt frame)")


@dataclass(frozen=True, eq=False)
class DenseEmbedding:
    """A d-dimensional real vector produced by an embedding provider."""

    values: np.ndarray
    model_id: str
    dim: int

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if arr.size != self.dim:
            raise DimensionMismatch(arr.size, self.dim, "embedding length")
        bad = np.flatnonzero(~np.isfinite(arr))
        if bad.size:
            raise ValueError(
                f"non-finite embedding coordinate at index {bad[0]}")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)


@dataclass(frozen=True)
class PrivacyBudget:
    """Per-bit privacy budget (nats); larger alpha means less noise."""

    alpha: float

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ValueError(f"alpha must be a positive finite real, got {self.alpha}")

    @classmethod
    def of(cls, value: Union["PrivacyBudget", float]) -> "PrivacyBudget":
        return value if isinstance(value, PrivacyBudget) else cls(float(value))


@dataclass(frozen=True)
class BinaryFingerprint:
    """Packed d-bit vector; the unit of storage and search."""

    bits: bytes
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be positive, got {self.dim}")
        if len(self.bits) != packed_length(self.dim):
            raise CorruptPayload(
                f"payload is {len(self.bits)} bytes, expected "
                f"{packed_length(self.dim)} for dim {self.dim}")
        _check_padding(self.bits, self.dim)
        object.__setattr__(self, "bits", bytes(self.bits))

    def popcount(self) -> int:
        return int(np.bitwise_count(np.frombuffer(self.bits, np.uint8)).sum())


@dataclass(frozen=True)
class PrivatizedFingerprint:
    """Randomized-response output; noise_seed is a local reproducibility
    handle and is never transmitted."""

    bits: bytes
    dim: int
    alpha: PrivacyBudget
    noise_seed: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be positive, got {self.dim}")
        if len(self.bits) != packed_length(self.dim):
            raise CorruptPayload(
                f"payload is {len(self.bits)} bytes, expected "
                f"{packed_length(self.dim)} for dim {self.dim}")
        _check_padding(self.bits, self.dim)
        object.__setattr__(self, "bits", bytes(self.bits))
        object.__setattr__(self, "alpha", PrivacyBudget.of(self.alpha))
        object.__setattr__(self, "noise_seed", _check_seed(self.noise_seed))

    def popcount(self) -> int:
        return int(np.bitwise_count(np.frombuffer(self.bits, np.uint8)).sum())


Fingerprint = Union[BinaryFingerprint, PrivatizedFingerprint]


def quantize(e: DenseEmbedding) -> BinaryFingerprint:
    """Sign quantization: bit i is 1 iff coordinate i is strictly positive."""
    bits = (e.values > 0).astype(np.uint8)
    return BinaryFingerprint(bits=pack_bits(bits), dim=e.dim)


def keep_probability(alpha: Union[PrivacyBudget, float]) -> float:
    """Probability e^a / (e^a + 1) of keeping a true bit; in (0.5, 1)."""
    a = PrivacyBudget.of(alpha).alpha
    return 1.0 / (1.0 + math.exp(-a))


def flip_probability(alpha: Union[PrivacyBudget, float]) -> float:
    """1 - keep_probability, computed without cancellation at large alpha."""
    a = PrivacyBudget.of(alpha).alpha
    z = math.exp(-a)  # never overflows for a > 0
    return z / (1.0 + z)


def expected_self_distortion(alpha: Union[PrivacyBudget, float], dim: int) -> float:
    """Expected Hamming distance (1 - p) * d between a vector and its
    randomized release."""
    if dim < 1:
        raise ValueError(f"dim must be positive, got {dim}")
    return flip_probability(alpha) * dim


def randomize(b: BinaryFingerprint, alpha: Union[PrivacyBudget, float],
              seed: int) -> PrivatizedFingerprint:
    """Apply per-bit randomized response under the module's noise contract."""
    budget = PrivacyBudget.of(alpha)
    p = keep_probability(budget)
    bits = unpack_bits(b.bits, b.dim)
    u = _uniforms(seed, b.dim)
    flipped = bits ^ (u >= p).astype(np.uint8)
    return PrivatizedFingerprint(bits=pack_bits(flipped), dim=b.dim,
                                 alpha=budget, noise_seed=int(seed))


def hamming(a: Fingerprint, c: Fingerprint) -> int:
    """Number of differing bit positions, via XOR + popcount on the packed
    payloads (padding is zero on both sides, so it contributes nothing)."""
    if a.dim != c.dim:
        raise DimensionMismatch(a.dim, c.dim, "hamming")
    xa = np.frombuffer(a.bits, dtype=np.uint8)
    xc = np.frombuffer(c.bits, dtype=np.uint8)
    return int(np.bitwise_count(np.bitwise_xor(xa, xc)).sum())


def random_fingerprint(dim: int, seed: int) -> BinaryFingerprint:
    """Uniform random fingerprint from the same Philox stream family."""
    rng = np.random.Generator(np.random.Philox(key=_check_seed(seed)))
    bits = rng.integers(0, 2, size=dim, dtype=np.uint8)
    return BinaryFingerprint(bits=pack_bits(bits), dim=dim)
