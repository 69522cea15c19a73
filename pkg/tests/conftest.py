import numpy as np
import pytest

from binaryshield import kernels
from binaryshield.embeddings import PseudoEmbedder


@pytest.fixture(scope="session")
def pseudo768():
    return PseudoEmbedder(dim=768)


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # one-time JIT compilation stays out of every timed assertion
    kernels.warmup()


def naive_hamming_bits(a_bytes: bytes, b_bytes: bytes, dim: int) -> int:
    """Independent per-bit oracle: unpack to individual bits and compare."""
    a = np.unpackbits(np.frombuffer(a_bytes, np.uint8), count=dim, bitorder="little")
    b = np.unpackbits(np.frombuffer(b_bytes, np.uint8), count=dim, bitorder="little")
    return int((a != b).sum())


def naive_popcount(value: int) -> int:
    return bin(value).count("1")
