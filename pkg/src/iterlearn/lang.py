"""Binary meaning/signal spaces and materialized languages.

Meanings and signals are both length-``n`` bit vectors, held as ``uint8``
numpy arrays. Bit 0 is the most significant bit of the integer index, so
``index_to_bits(5, 3)`` is ``[1, 0, 1]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError

MAX_N = 24
EAGER_N = 20


def _check_n(n: int) -> None:
    if not 1 <= n <= MAX_N:
        raise ConfigError(f"n={n} out of range: must satisfy 1 <= n <= {MAX_N}")


def index_to_bits(index: int, n: int) -> np.ndarray:
    if not 0 <= index < 1 << n:
        raise ValueError(f"index {index} outside [0, 2^{n})")
    shifts = np.arange(n - 1, -1, -1)
    bits = (index >> shifts) & 1
    return bits.astype(np.uint8)


def bits_to_index(bits) -> int:
    out = 0
    for b in np.asarray(bits).ravel():
        if b not in (0, 1):
            raise ValueError(f"not a bit: {b!r}")
        out = (out << 1) | int(b)
    return out


def indices_to_bits(indices: np.ndarray, n: int) -> np.ndarray:
    """Vectorised :func:`index_to_bits`; returns shape ``(len(indices), n)``."""
    indices = np.asarray(indices, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((indices[:, None] >> shifts) & 1).astype(np.uint8)


def bits_to_indices(bits: np.ndarray) -> np.ndarray:
    """Vectorised :func:`bits_to_index` over the rows of a 2-d bit array."""
    bits = np.asarray(bits)
    n = bits.shape[1]
    weights = np.int64(1) << np.arange(n - 1, -1, -1, dtype=np.int64)
    return bits.astype(np.int64) @ weights


def decide(p) -> np.ndarray:
    """Threshold probabilities to bits: ``p <= 0.5`` gives 0, ``p > 0.5`` gives 1."""
    return (np.asarray(p) > 0.5).astype(np.uint8)


def enumerate_space(n: int) -> np.ndarray:
    """All ``2**n`` bit vectors in ascending index order, shape ``(2**n, n)``."""
    _check_n(n)
    if n > EAGER_N:
        raise ConfigError(
            f"n={n}: eager enumeration is limited to n <= {EAGER_N}; "
            "iterate with iter_space instead"
        )
    return indices_to_bits(np.arange(1 << n), n)


def iter_space(n: int, chunk: int = 1 << 16):
    """Yield ``(start, bits)`` blocks covering the space without materializing it."""
    _check_n(n)
    total = 1 << n
    for start in range(0, total, chunk):
        stop = min(start + chunk, total)
        yield start, indices_to_bits(np.arange(start, stop), n)


@dataclass(frozen=True)
class LanguageTable:
    """A total meaning -> signal map, stored as signal indices per meaning index."""

    n: int
    signal_index: np.ndarray

    def __post_init__(self):
        idx = np.ascontiguousarray(self.signal_index, dtype=np.int64)
        if idx.shape != (1 << self.n,):
            raise ValueError(
                f"language table for n={self.n} needs {1 << self.n} entries, got {idx.shape}"
            )
        if idx.size and (idx.min() < 0 or idx.max() >= 1 << self.n):
            raise ValueError("signal index outside the signal space")
        idx.flags.writeable = False
        object.__setattr__(self, "signal_index", idx)

    @classmethod
    def from_signals(cls, signals: np.ndarray) -> "LanguageTable":
        signals = np.asarray(signals)
        return cls(signals.shape[1], bits_to_indices(signals))

    def signals(self) -> np.ndarray:
        return indices_to_bits(self.signal_index, self.n)

    def encode(self, meaning) -> np.ndarray:
        return index_to_bits(int(self.signal_index[bits_to_index(meaning)]), self.n)

    def encode_many(self, meanings: np.ndarray) -> np.ndarray:
        return indices_to_bits(self.signal_index[bits_to_indices(meanings)], self.n)

    def __len__(self) -> int:
        return self.signal_index.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, LanguageTable):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.signal_index, other.signal_index)

    __hash__ = None


def materialize_language(encode: Callable[[np.ndarray], np.ndarray], n: int) -> LanguageTable:
    """Tabulate a per-meaning encoder over the whole meaning space."""
    meanings = enumerate_space(n)
    signals = np.empty_like(meanings)
    for k, m in enumerate(meanings):
        m.flags.writeable = False
        signals[k] = np.asarray(encode(m), dtype=np.uint8)
    return LanguageTable.from_signals(signals)


def materialize_batched(encode_block: Callable[[np.ndarray], np.ndarray], n: int) -> LanguageTable:
    """Like :func:`materialize_language` for an encoder that maps a block of meanings at once."""
    _check_n(n)
    out = np.empty(1 << n, dtype=np.int64)
    for start, block in iter_space(n):
        out[start : start + len(block)] = bits_to_indices(encode_block(block))
    return LanguageTable(n, out)
