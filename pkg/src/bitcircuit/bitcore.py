"""Packed binary vectors and the word-parallel primitives built on them.

Storage convention: a vector of n bits lives in ceil(n / word_size) unsigned
words, least significant bit first within each word, and every padding bit
past n is zero.  Datasets are stored feature-major (transposed), so one
bitwise word operation touches the same feature of word_size examples at
once.  Each feature carries its precomputed complement: gates consume both
polarities, and storing the pair saves a negation per access.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._backend import kernels
from .errors import ShapeError

WORD_DTYPES = {32: np.uint32, 64: np.uint64}

#: Largest gate arity supported; truth tables stay within 2**8 bits.
MAX_ARITY = 8


def _dtype_for(word_size: int) -> np.dtype:
    try:
        return np.dtype(WORD_DTYPES[word_size])
    except KeyError:
        raise ShapeError(f"word_size must be one of {sorted(WORD_DTYPES)}, not {word_size}")


def word_count(n_bits: int, word_size: int) -> int:
    return (n_bits + word_size - 1) // word_size


def tail_mask(n_bits: int, word_size: int) -> int:
    """Mask of valid bits in the last word of an n_bits vector."""
    rem = n_bits % word_size
    if rem == 0:
        return (1 << word_size) - 1
    return (1 << rem) - 1


def ones_vector(n_bits: int, word_size: int = 64) -> np.ndarray:
    """Packed vector with the first n_bits set and zero padding."""
    dtype = _dtype_for(word_size)
    out = np.full(word_count(n_bits, word_size), np.iinfo(dtype).max, dtype=dtype)
    out[-1] = tail_mask(n_bits, word_size)
    return out


def complement_words(vec: np.ndarray, n_bits: int) -> np.ndarray:
    """Bitwise complement restricted to the first n_bits (padding stays zero)."""
    word_size = vec.dtype.itemsize * 8
    return vec ^ ones_vector(n_bits, word_size)


def pack_bits(bits: np.ndarray, word_size: int = 64) -> np.ndarray:
    """Pack rows of 0/1 values into words; returns shape (n_rows, n_words)."""
    dtype = _dtype_for(word_size)
    bits = np.ascontiguousarray(bits, dtype=np.uint8)
    if bits.ndim == 1:
        bits = bits[None, :]
    n_rows, n_bits = bits.shape
    nwords = word_count(n_bits, word_size)
    packed_bytes = np.packbits(bits, axis=1, bitorder="little")
    buf = np.zeros((n_rows, nwords * (word_size // 8)), dtype=np.uint8)
    buf[:, : packed_bytes.shape[1]] = packed_bytes
    return buf.view(dtype)


def unpack_bits(vec: np.ndarray, n_bits: int) -> np.ndarray:
    """Inverse of pack_bits for a single packed vector; returns uint8 bits."""
    return np.unpackbits(vec.view(np.uint8), bitorder="little")[:n_bits]


def _as_bit_matrix(rows) -> np.ndarray:
    try:
        arr = np.asarray(rows)
    except ValueError as exc:
        raise ShapeError(f"rows must form a rectangular 2-D bit matrix: {exc}") from None
    if arr.dtype == object or arr.ndim != 2:
        raise ShapeError("rows must form a rectangular 2-D bit matrix")
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ShapeError("rows may only contain 0/1 values")
    return arr.astype(np.uint8, copy=False)


@dataclass(frozen=True)
class FeaturePair:
    """One binary feature over all examples, stored with its complement.

    Invariants: pos & neg == 0 and pos | neg covers the first n_bits; padding
    bits are zero in both vectors.
    """

    pos: np.ndarray
    neg: np.ndarray
    n_bits: int

    @property
    def word_size(self) -> int:
        return self.pos.dtype.itemsize * 8

    @classmethod
    def from_bits(cls, bits, word_size: int = 64) -> "FeaturePair":
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.ndim != 1 or bits.size < 1:
            raise ShapeError("a feature needs a 1-D, non-empty bit sequence")
        pos = pack_bits(bits, word_size)[0]
        return cls(pos=pos, neg=complement_words(pos, bits.size), n_bits=bits.size)

    def bits(self) -> np.ndarray:
        return unpack_bits(self.pos, self.n_bits)


@dataclass(frozen=True)
class PatternSlices:
    """Disjoint indicator vectors, one per k-bit input pattern.

    slices[p] marks the examples whose k input bits spell pattern p, with
    bit i of p (most significant first) taken from input i.  Exactly one
    slice covers each example.
    """

    arity: int
    slices: np.ndarray  # (2**arity, n_words)
    n_bits: int


@dataclass
class BitDataset:
    """Feature-major packed dataset plus a packed label vector."""

    n_examples: int
    features: list[FeaturePair]
    labels: np.ndarray
    labels_neg: np.ndarray = field(repr=False, default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.labels_neg is None:
            self.labels_neg = complement_words(self.labels, self.n_examples)

    @property
    def n_features(self) -> int:
        return len(self.features)

    @property
    def word_size(self) -> int:
        return self.labels.dtype.itemsize * 8

    def feature(self, i: int) -> FeaturePair:
        return self.features[i]

    def label_bits(self) -> np.ndarray:
        return unpack_bits(self.labels, self.n_examples)

    @classmethod
    def from_rows(cls, rows, labels, word_size: int = 64) -> "BitDataset":
        """Build a dataset from example-major rows and 0/1 labels."""
        features = pack_and_transpose(rows, word_size)
        n = features[0].n_bits
        labels = np.asarray(labels, dtype=np.uint8).ravel()
        if labels.size != n:
            raise ShapeError(f"{labels.size} labels for {n} examples")
        return cls(n_examples=n, features=features, labels=pack_bits(labels, word_size)[0])


def pack_and_transpose(rows, word_size: int = 64) -> list[FeaturePair]:
    """Transpose example-major bit rows into packed feature vectors.

    Bit j of feature i's positive vector equals bit i of row j.  Raises
    ShapeError on ragged input.
    """
    matrix = _as_bit_matrix(rows)
    n_examples, n_features = matrix.shape
    if n_examples < 1 or n_features < 1:
        raise ShapeError("need at least one example and one feature")
    pos = pack_bits(matrix.T, word_size)
    ones = ones_vector(n_examples, word_size)
    return [
        FeaturePair(pos=pos[i], neg=pos[i] ^ ones, n_bits=n_examples)
        for i in range(n_features)
    ]


def stack_pair(inputs: Sequence[FeaturePair]) -> tuple[np.ndarray, np.ndarray, int]:
    n_bits = inputs[0].n_bits
    dtype = inputs[0].pos.dtype
    for f in inputs:
        if f.n_bits != n_bits or f.pos.dtype != dtype:
            raise ShapeError("inputs must share length and word size")
    pos = np.stack([f.pos for f in inputs])
    neg = np.stack([f.neg for f in inputs])
    return pos, neg, n_bits


def tensor_product(inputs: Sequence[FeaturePair]) -> PatternSlices:
    """Expand k features into the 2**k one-hot pattern indicator vectors."""
    k = len(inputs)
    if not 1 <= k <= MAX_ARITY:
        raise ShapeError(f"tensor_product supports 1..{MAX_ARITY} inputs, got {k}")
    pos, neg, n_bits = stack_pair(inputs)
    out = np.empty((1 << k, pos.shape[1]), dtype=pos.dtype)
    kernels.tensor_slices(pos, neg, out)
    return PatternSlices(arity=k, slices=out, n_bits=n_bits)


def count_per_slice(slices: PatternSlices, mask: np.ndarray) -> np.ndarray:
    """popcount(slices[p] & mask) for every pattern p."""
    if mask.shape != slices.slices.shape[1:] or mask.dtype != slices.slices.dtype:
        raise ShapeError("mask must match the slice vectors in length and word size")
    out = np.empty(slices.slices.shape[0], dtype=np.int64)
    kernels.count_slices(slices.slices, mask, out)
    return out


def popcount(vec: np.ndarray) -> int:
    return kernels.popcount(vec)
