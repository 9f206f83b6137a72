"""Dataset generators and loaders producing packed BitDatasets.

Synthetic sources: square/two-square images with bit-flip noise, and lists
of 16-bit integers drawn from one of two normal distributions.  File
sources: IDX image/label pairs (optionally gzipped), CIFAR-10 binary
batches, and whitespace "amat" text matrices.  Pixels are binarized by
keeping their most significant bits.
"""

from __future__ import annotations

import gzip
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .bitcore import BitDataset, unpack_bits
from .errors import DomainError, FormatError, ParseError, ShapeError

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801
CIFAR_RECORD_BYTES = 3073  # 1 label byte + 32*32*3 channel bytes
CIFAR_BATCH_RECORDS = 10000

_NOISE_CHUNK = 4096


@dataclass(frozen=True)
class CubesSpec:
    """Square-image task: one 15x15 square versus a 12x12 and a 9x9 pair."""

    image_side: int = 32
    square_side: int = 15
    pair_sides: tuple[int, int] = (12, 9)
    delta: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        if not 0.0 <= self.delta <= 1.0:
            raise DomainError(f"noise level must be in [0, 1], got {self.delta}")
        for side in (self.square_side, *self.pair_sides):
            if not 1 <= side <= self.image_side:
                raise DomainError(f"square side {side} does not fit a {self.image_side} image")


@dataclass(frozen=True)
class GaussSpec:
    """Two normal distributions over lists of 16-bit unsigned integers."""

    mu0: float = 32768.0
    sigma0: float = 2000.0
    mu1: float = 32768.0
    sigma1: float = 8000.0
    seed: int = 0
    list_length: int = 32
    bits_per_int: int = 16

    def validate(self) -> None:
        if self.sigma0 < 0 or self.sigma1 < 0:
            raise DomainError("standard deviations must be >= 0")
        if self.bits_per_int != 16 or self.list_length < 1:
            raise DomainError("only 16-bit integers in non-empty lists are supported")


@dataclass(frozen=True)
class QuantizeSpec:
    """Keep the `bits` most significant bits of each 8-bit channel value."""

    bits: int = 2
    channels: int = 1

    def validate(self) -> None:
        if not 1 <= self.bits <= 8:
            raise DomainError(f"bits per channel must be in 1..8, got {self.bits}")
        if self.channels < 1:
            raise DomainError("channel count must be >= 1")


def cubes_images(
    count: int, spec: CubesSpec, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, dict]:
    """Raw image form of the squares task, plus the sampled positions.

    Class 0 images hold one filled square, class 1 images the XOR of two
    filled squares (overlap renders white).  Every bit then flips
    independently with probability `spec.delta`.  Classes are balanced with
    any odd remainder going to class 0.
    """
    spec.validate()
    if count < 1:
        raise DomainError("count must be >= 1")
    side = spec.image_side
    n1 = count // 2
    n0 = count - n1
    images = np.zeros((count, side, side), dtype=np.uint8)
    labels = np.zeros(count, dtype=np.uint8)
    labels[n0:] = 1

    s = spec.square_side
    pos0 = rng.integers(0, side - s + 1, size=(n0, 2))
    sa, sb = spec.pair_sides
    pos_a = rng.integers(0, side - sa + 1, size=(n1, 2))
    pos_b = rng.integers(0, side - sb + 1, size=(n1, 2))
    for i in range(n0):
        r, c = pos0[i]
        images[i, r : r + s, c : c + s] = 1
    for i in range(n1):
        r, c = pos_a[i]
        images[n0 + i, r : r + sa, c : c + sa] ^= 1
        r, c = pos_b[i]
        images[n0 + i, r : r + sb, c : c + sb] ^= 1
    if spec.delta > 0.0:
        for start in range(0, count, _NOISE_CHUNK):
            stop = min(start + _NOISE_CHUNK, count)
            flips = rng.random((stop - start, side, side)) < spec.delta
            images[start:stop] ^= flips.view(np.uint8)
    meta = {"single": pos0, "pair_a": pos_a, "pair_b": pos_b}
    return images, labels, meta


def gen_cubes(count: int, spec: CubesSpec, word_size: int = 64) -> BitDataset:
    """Packed squares dataset; rows are images flattened row-major."""
    rng = np.random.default_rng(spec.seed)
    images, labels, _ = cubes_images(count, spec, rng)
    return BitDataset.from_rows(images.reshape(count, -1), labels, word_size)


def gen_gauss(count: int, spec: GaussSpec, word_size: int = 64) -> BitDataset:
    """Lists of integers drawn from the class's normal distribution.

    Each draw is rounded to the nearest integer, clamped to [0, 2**16 - 1]
    and emitted as 16 bits, most significant first.
    """
    spec.validate()
    if count < 1:
        raise DomainError("count must be >= 1")
    rng = np.random.default_rng(spec.seed)
    n1 = count // 2
    n0 = count - n1
    labels = np.zeros(count, dtype=np.uint8)
    labels[n0:] = 1
    draws = np.empty((count, spec.list_length), dtype=np.float64)
    draws[:n0] = rng.normal(spec.mu0, spec.sigma0, size=(n0, spec.list_length))
    draws[n0:] = rng.normal(spec.mu1, spec.sigma1, size=(n1, spec.list_length))
    ints = np.clip(np.rint(draws), 0, 2**16 - 1).astype(">u2")
    rows = np.unpackbits(ints.view(np.uint8).reshape(count, -1), axis=1, bitorder="big")
    return BitDataset.from_rows(rows, labels, word_size)


def quantize_msb(values: np.ndarray, spec: QuantizeSpec) -> np.ndarray:
    """Most-significant-bit rows: each 8-bit value contributes spec.bits bits.

    Output width is values-per-example times spec.bits; bit order within a
    value is most significant first, so the k-bit codes stay monotone.
    """
    spec.validate()
    arr = np.asarray(values, dtype=np.uint8)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ShapeError("values must be a (n_examples, n_values) byte matrix")
    n, width = arr.shape
    bits = np.unpackbits(arr, axis=1, bitorder="big").reshape(n, width, 8)
    return np.ascontiguousarray(bits[:, :, : spec.bits]).reshape(n, width * spec.bits)


def _read_binary(path) -> bytes:
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        return gzip.decompress(raw)
    return raw


def load_idx(
    image_path,
    label_path,
    class_a: int,
    class_b: int,
    spec: QuantizeSpec,
    word_size: int = 64,
) -> BitDataset:
    """IDX image/label pair filtered to two classes (class_a -> 0, class_b -> 1).

    Accepts plain or gzipped files; keeps file order; quantizes pixels via
    `quantize_msb`.
    """
    spec.validate()
    img = _read_binary(image_path)
    if len(img) < 16:
        raise FormatError("image file shorter than its header", offset=len(img))
    magic = int.from_bytes(img[0:4], "big")
    if magic != IDX_IMAGE_MAGIC:
        raise FormatError(f"bad image magic 0x{magic:08x}, want 0x{IDX_IMAGE_MAGIC:08x}", offset=0)
    count = int.from_bytes(img[4:8], "big")
    n_rows = int.from_bytes(img[8:12], "big")
    n_cols = int.from_bytes(img[12:16], "big")
    need = 16 + count * n_rows * n_cols
    if len(img) != need:
        raise FormatError(
            f"image payload is {len(img) - 16} bytes, header promises {need - 16}",
            offset=min(len(img), need),
        )
    lab = _read_binary(label_path)
    if len(lab) < 8:
        raise FormatError("label file shorter than its header", offset=len(lab))
    magic = int.from_bytes(lab[0:4], "big")
    if magic != IDX_LABEL_MAGIC:
        raise FormatError(f"bad label magic 0x{magic:08x}, want 0x{IDX_LABEL_MAGIC:08x}", offset=0)
    lab_count = int.from_bytes(lab[4:8], "big")
    if lab_count != count:
        raise FormatError(f"{lab_count} labels for {count} images", offset=4)
    if len(lab) != 8 + count:
        raise FormatError("label payload length mismatch", offset=min(len(lab), 8 + count))

    pixels = np.frombuffer(img, dtype=np.uint8, offset=16).reshape(count, n_rows * n_cols)
    labels = np.frombuffer(lab, dtype=np.uint8, offset=8)
    keep = (labels == class_a) | (labels == class_b)
    if not keep.any():
        raise DomainError(f"no examples labeled {class_a} or {class_b}")
    rows = quantize_msb(pixels[keep], spec)
    return BitDataset.from_rows(rows, (labels[keep] == class_b).astype(np.uint8), word_size)


def load_cifar10(
    paths: Sequence,
    class_a: int = 1,
    class_b: int = 2,
    spec: QuantizeSpec | None = None,
    word_size: int = 64,
    expect_records: int | None = None,
) -> BitDataset:
    """CIFAR-10 binary batches filtered to two classes (default cars vs birds).

    Records are 1 label byte plus 3072 channel bytes in row-major R,G,B
    planes, kept in that order.  `expect_records` pins the per-file record
    count (10000 for the published batches); by default any whole number of
    records is accepted so small fixtures load too.
    """
    spec = spec if spec is not None else QuantizeSpec(bits=2, channels=3)
    spec.validate()
    all_pixels = []
    all_labels = []
    for path in paths:
        raw = _read_binary(path)
        if len(raw) == 0 or len(raw) % CIFAR_RECORD_BYTES != 0:
            raise FormatError(
                f"{path}: size {len(raw)} is not a whole number of"
                f" {CIFAR_RECORD_BYTES}-byte records",
                offset=len(raw) - len(raw) % CIFAR_RECORD_BYTES,
            )
        n_rec = len(raw) // CIFAR_RECORD_BYTES
        if expect_records is not None and n_rec != expect_records:
            raise FormatError(f"{path}: {n_rec} records, expected {expect_records}", offset=0)
        records = np.frombuffer(raw, dtype=np.uint8).reshape(n_rec, CIFAR_RECORD_BYTES)
        labels = records[:, 0]
        bad = np.nonzero(labels > 9)[0]
        if bad.size:
            raise FormatError(
                f"{path}: label byte {labels[bad[0]]} out of range",
                offset=int(bad[0]) * CIFAR_RECORD_BYTES,
            )
        all_labels.append(labels)
        all_pixels.append(records[:, 1:])
    labels = np.concatenate(all_labels)
    pixels = np.concatenate(all_pixels)
    keep = (labels == class_a) | (labels == class_b)
    if not keep.any():
        raise DomainError(f"no examples labeled {class_a} or {class_b}")
    rows = quantize_msb(pixels[keep], spec)
    return BitDataset.from_rows(rows, (labels[keep] == class_b).astype(np.uint8), word_size)


def load_amat(path, threshold: float = 0.5, word_size: int = 64) -> BitDataset:
    """Whitespace-separated numeric matrix; last column is the label.

    Pixels binarize as value >= threshold; labels as value > 0.5 (so both
    0/1 and -1/+1 labelings map onto {0, 1}).
    """
    try:
        arr = np.loadtxt(path, dtype=np.float64, ndmin=2)
    except ValueError:
        _locate_amat_error(path)
        raise  # pragma: no cover - _locate_amat_error always raises
    if arr.size == 0:
        raise ParseError(f"{path}: no rows")
    if arr.shape[1] < 2:
        raise ParseError(f"{path}: need at least one feature column plus a label")
    rows = (arr[:, :-1] >= threshold).astype(np.uint8)
    labels = (arr[:, -1] > 0.5).astype(np.uint8)
    return BitDataset.from_rows(rows, labels, word_size)


def _locate_amat_error(path) -> None:
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens:
                continue
            if width is None:
                width = len(tokens)
            elif len(tokens) != width:
                raise ParseError(
                    f"{path}: row has {len(tokens)} columns, expected {width}", line=lineno
                )
            for tok in tokens:
                try:
                    float(tok)
                except ValueError:
                    raise ParseError(f"{path}: non-numeric token {tok!r}", line=lineno)
    raise ParseError(f"{path}: malformed numeric matrix")


# ---------------------------------------------------------------------------
# Canonical dataset dump, for exchanging small fixtures as text:
#
#   bgd <n_examples> <n_features>
#   <feature bits of example 0, hex, MSB first> <label bit>
#   ...
# ---------------------------------------------------------------------------


def write_bgd(dataset: BitDataset, path) -> None:
    n, nf = dataset.n_examples, dataset.n_features
    matrix = np.stack([unpack_bits(f.pos, n) for f in dataset.features]).T
    label_bits = dataset.label_bits()
    with open(path, "w") as fh:
        fh.write(f"bgd {n} {nf}\n")
        for i in range(n):
            packed = np.packbits(matrix[i], bitorder="big").tobytes()
            fh.write(f"{packed.hex()} {label_bits[i]}\n")


def read_bgd(path, word_size: int = 64) -> BitDataset:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 3 or header[0] != "bgd":
            raise ParseError(f"{path}: missing 'bgd <n> <features>' header", line=1)
        try:
            n, nf = int(header[1]), int(header[2])
        except ValueError:
            raise ParseError(f"{path}: non-integer dimensions in header", line=1)
        rows = np.zeros((n, nf), dtype=np.uint8)
        labels = np.zeros(n, dtype=np.uint8)
        n_bytes = (nf + 7) // 8
        for i in range(n):
            parts = fh.readline().split()
            if len(parts) != 2:
                raise ParseError(f"{path}: expected '<hex> <label>'", line=i + 2)
            try:
                blob = bytes.fromhex(parts[0])
            except ValueError:
                raise ParseError(f"{path}: bad hex row", line=i + 2)
            if len(blob) != n_bytes or parts[1] not in ("0", "1"):
                raise ParseError(f"{path}: row does not match header dimensions", line=i + 2)
            rows[i] = np.unpackbits(np.frombuffer(blob, dtype=np.uint8), bitorder="big")[:nf]
            labels[i] = int(parts[1])
    return BitDataset.from_rows(rows, labels, word_size)
