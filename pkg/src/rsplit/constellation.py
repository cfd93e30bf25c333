"""PSK alphabets, exhaustive stream-vector enumeration and difference sets."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError, ResourceCapError

#: Largest exhaustive enumeration allowed by default (``4**6``).
ENUMERATION_CAP = 4 ** 6


@dataclass(frozen=True)
class PskAlphabet:
    M: int
    symbols: np.ndarray

    @property
    def bits(self) -> float:
        return float(np.log2(self.M))


@dataclass(frozen=True)
class StreamVectorSet:
    """All ``M**S`` symbol tuples over ``S`` streams, lexicographic order.

    ``index`` holds the symbol indices (row ``m`` is the base-``M`` expansion
    of ``m`` with the first stream most significant), ``vectors`` the complex
    symbols.
    """

    M: int
    S: int
    index: np.ndarray
    vectors: np.ndarray

    def __len__(self) -> int:
        return self.vectors.shape[0]


def psk_alphabet(M: int) -> PskAlphabet:
    """Unit-modulus M-PSK symbols.

    BPSK is ``{+1, -1}``; QPSK is rotated by ``pi/4``; 8-PSK is unrotated.
    """
    if M not in (2, 4, 8):
        raise ConfigError(f"unsupported PSK order {M}")
    offset = np.pi / 4 if M == 4 else 0.0
    angles = 2 * np.pi * np.arange(M) / M + offset
    symbols = np.exp(1j * angles)
    if M == 2:
        symbols = np.array([1.0 + 0j, -1.0 + 0j])
    return PskAlphabet(M=M, symbols=symbols)


def stream_vectors(M: int, S: int, cap: int = ENUMERATION_CAP) -> StreamVectorSet:
    """Enumerate all ``M**S`` stream vectors; raises ``ResourceCapError`` above ``cap``.

    The returned arrays are cached and read-only.
    """
    if S < 0:
        raise ConfigError("stream count must be non-negative")
    count = M ** S
    if count > cap:
        raise ResourceCapError(
            f"exhaustive enumeration of {M}^{S} = {count} stream vectors exceeds cap {cap}; "
            "enable outer-index subsampling (McEstimatorSettings.outer_samples) or raise the cap"
        )
    return _enumerate(int(M), int(S))


@lru_cache(maxsize=64)
def _enumerate(M: int, S: int) -> StreamVectorSet:
    alphabet = psk_alphabet(M).symbols
    index = np.array(list(itertools.product(range(M), repeat=S)), dtype=np.int64).reshape(M**S, S)
    vectors = alphabet[index]
    index.setflags(write=False)
    vectors.setflags(write=False)
    return StreamVectorSet(M=M, S=S, index=index, vectors=vectors)


def difference_set(vectors: StreamVectorSet) -> np.ndarray:
    """Pairwise differences ``x_m - x_i`` as an array of shape ``(M^S, M^S, S)``."""
    v = vectors.vectors
    return v[:, None, :] - v[None, :, :]
