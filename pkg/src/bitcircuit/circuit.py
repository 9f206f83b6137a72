"""Boolean-circuit classifiers: truth tables, full a-ary trees, evaluation.

A classifier is a full tree of depth d whose internal nodes are k-input
gates and whose leaves point at input coordinates; the root's output bit is
the class decision.  Nodes are numbered breadth-first from the root, so the
children of node i are a*i+1 .. a*i+a and the parent of x is (x-1)//a.
Node ids >= internal_count are leaves, left to right.

Gates are evaluated word-parallel.  A truth table is compiled once into a
short straight-line program of AND/OR vector operations (recursive
cofactoring on the first input, with constant and duplicate sub-tables
folded away); the complement output costs one more XOR against the all-ones
mask.  The program length is bounded by 3 * 2**(k-1) - 2 operations
including that complement, so a k-gate runs in at most
(2**k + 2**(k-1) + 1) * n / word_size word operations and usually far
fewer.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._backend import kernels
from .bitcore import (
    MAX_ARITY,
    BitDataset,
    FeaturePair,
    stack_pair,
    tail_mask,
    word_count,
)
from .errors import CapacityError, DomainError, FormatError, ShapeError, ValidationError

MODEL_MAGIC = b"BGC1"

RESULT_CONST0 = -1
RESULT_CONST1 = -2
_OP_AND = 0
_OP_OR = 1

#: Trees larger than this cannot be indexed safely.
MAX_LEAVES = 1 << 62


@dataclass(frozen=True)
class TruthTable:
    """Output bits of a k-gate, indexed by input pattern.

    bits[p] is the gate output when the inputs spell pattern p, bit i of p
    (most significant first) being input i.
    """

    arity: int
    bits: np.ndarray  # uint8, length 2**arity

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.uint8)
        if bits.shape != (1 << self.arity,):
            raise ShapeError(f"arity-{self.arity} table needs {1 << self.arity} bits")
        object.__setattr__(self, "bits", bits)

    def complement(self) -> "TruthTable":
        return TruthTable(self.arity, 1 - self.bits)


@dataclass(frozen=True)
class GateProgram:
    """Straight-line vector program realizing one truth table."""

    arity: int
    instrs: np.ndarray  # (n, 3) int32 rows: opcode, src_a, src_b
    result: int  # register index, or RESULT_CONST0/RESULT_CONST1

    @property
    def n_instructions(self) -> int:
        return len(self.instrs)

    def word_ops(self, n_words: int) -> int:
        # +1 for the complement/materialization pass.
        return (self.n_instructions + 1) * n_words


@lru_cache(maxsize=65536)
def _compile_cached(arity: int, key: bytes) -> GateProgram:
    bits = tuple(key)
    instrs: list[tuple[int, int, int]] = []

    def emit(op: int, a: int, b: int) -> int:
        instrs.append((op, a, b))
        return 2 * arity + len(instrs) - 1

    def build(sub: tuple, var: int) -> int:
        if not any(sub):
            return RESULT_CONST0
        if all(sub):
            return RESULT_CONST1
        half = len(sub) // 2
        lo, hi = sub[:half], sub[half:]
        if lo == hi:
            return build(lo, var + 1)
        if len(sub) == 2:
            # (0,1) is the input itself, (1,0) its stored negation.
            return 2 * var if sub[1] else 2 * var + 1
        pos_r, neg_r = 2 * var, 2 * var + 1
        lo_r = build(lo, var + 1)
        hi_r = build(hi, var + 1)
        if lo_r == RESULT_CONST0:
            return pos_r if hi_r == RESULT_CONST1 else emit(_OP_AND, pos_r, hi_r)
        if hi_r == RESULT_CONST0:
            return neg_r if lo_r == RESULT_CONST1 else emit(_OP_AND, neg_r, lo_r)
        if lo_r == RESULT_CONST1:
            return emit(_OP_OR, neg_r, emit(_OP_AND, pos_r, hi_r))
        if hi_r == RESULT_CONST1:
            return emit(_OP_OR, pos_r, emit(_OP_AND, neg_r, lo_r))
        t = emit(_OP_AND, neg_r, lo_r)
        u = emit(_OP_AND, pos_r, hi_r)
        return emit(_OP_OR, t, u)

    result = build(bits, 0)
    arr = np.array(instrs, dtype=np.int32).reshape(len(instrs), 3)
    return GateProgram(arity=arity, instrs=arr, result=result)


def compile_gate(table: TruthTable) -> GateProgram:
    """Compile a truth table into its vector program (memoized)."""
    return _compile_cached(table.arity, table.bits.tobytes())


@dataclass
class OpCounter:
    """Accumulates elementary word-operation counts across gate evaluations."""

    word_ops: int = 0

    def add(self, n: int) -> None:
        self.word_ops += n


@dataclass
class EvalCache:
    """Per-node gate outputs for one dataset, indexed by internal node id."""

    pos: np.ndarray  # (internal_count, n_words)
    neg: np.ndarray
    n_bits: int

    def node(self, i: int) -> FeaturePair:
        return FeaturePair(pos=self.pos[i], neg=self.neg[i], n_bits=self.n_bits)


@dataclass
class CircuitTree:
    """Full a-ary tree classifier: leaf wiring plus one table per gate."""

    arity: int
    depth: int
    n_features: int
    leaf_inputs: np.ndarray  # int32, length arity**depth
    tables: np.ndarray  # uint8, (internal_count, 2**arity)

    def __post_init__(self):
        internal, leaves = tree_shape(self.arity, self.depth)
        self.leaf_inputs = np.asarray(self.leaf_inputs, dtype=np.int32)
        self.tables = np.asarray(self.tables, dtype=np.uint8)
        if self.leaf_inputs.shape != (leaves,):
            raise ShapeError(f"expected {leaves} leaf inputs, got {self.leaf_inputs.shape}")
        if self.tables.shape != (internal, 1 << self.arity):
            raise ShapeError(
                f"expected table array ({internal}, {1 << self.arity}),"
                f" got {self.tables.shape}"
            )

    @property
    def internal_count(self) -> int:
        return self.tables.shape[0]

    @property
    def leaf_count(self) -> int:
        return self.leaf_inputs.shape[0]

    def gate(self, node: int) -> TruthTable:
        return TruthTable(self.arity, self.tables[node])

    @property
    def gates(self) -> list[TruthTable]:
        return [self.gate(i) for i in range(self.internal_count)]

    def children(self, node: int) -> range:
        return range(self.arity * node + 1, self.arity * node + self.arity + 1)

    def parent(self, node: int) -> int:
        return (node - 1) // self.arity

    def copy(self) -> "CircuitTree":
        return CircuitTree(
            arity=self.arity,
            depth=self.depth,
            n_features=self.n_features,
            leaf_inputs=self.leaf_inputs.copy(),
            tables=self.tables.copy(),
        )


def tree_shape(arity: int, depth: int) -> tuple[int, int]:
    """(internal node count, leaf count) of the full tree."""
    if arity < 2:
        raise DomainError(f"arity must be >= 2, got {arity}")
    if depth < 1:
        raise DomainError(f"depth must be >= 1, got {depth}")
    leaves = arity**depth
    if leaves > MAX_LEAVES:
        raise CapacityError(f"{arity}**{depth} leaves exceed the supported index range")
    return (leaves - 1) // (arity - 1), leaves


def gate_count_universe(arity: int) -> int:
    """Number of distinct gates of the given arity: 2**(2**arity)."""
    if not 1 <= arity <= MAX_ARITY:
        raise DomainError(f"arity must be in 1..{MAX_ARITY}, got {arity}")
    return 1 << (1 << arity)


def _run_table(
    arity: int,
    table_bits: np.ndarray,
    pos: np.ndarray,
    neg: np.ndarray,
    n_bits: int,
    out_pos: np.ndarray,
    out_neg: np.ndarray,
    counter: OpCounter | None = None,
) -> None:
    prog = _compile_cached(arity, table_bits.tobytes())
    mask = tail_mask(n_bits, pos.dtype.itemsize * 8)
    ops = kernels.run_gate_program(prog.instrs, prog.result, pos, neg, out_pos, out_neg, mask)
    if counter is not None:
        counter.add(ops)


def apply_gate(
    table: TruthTable,
    children: list[FeaturePair],
    counter: OpCounter | None = None,
) -> FeaturePair:
    """Evaluate one gate on its children's outputs, word-parallel.

    The output's positive vector is the union of the tensor-product slices
    whose table bit is 1; its negation is kept alongside like any feature.
    """
    if table.arity != len(children):
        raise ShapeError(f"table arity {table.arity} != {len(children)} children")
    pos, neg, n_bits = stack_pair(children)
    out_pos = np.empty_like(pos[0])
    out_neg = np.empty_like(pos[0])
    _run_table(table.arity, table.bits, pos, neg, n_bits, out_pos, out_neg, counter)
    return FeaturePair(pos=out_pos, neg=out_neg, n_bits=n_bits)


def _check_leaves(tree: CircuitTree, data: BitDataset) -> None:
    bad = np.nonzero(tree.leaf_inputs >= data.n_features)[0]
    if bad.size:
        raise ValidationError(
            f"leaf {bad[0]} reads input coordinate {tree.leaf_inputs[bad[0]]}"
            f" but the dataset has only {data.n_features} features"
        )


def _gather_children(
    tree: CircuitTree,
    data: BitDataset,
    cache: EvalCache,
    node: int,
    pos_buf: np.ndarray,
    neg_buf: np.ndarray,
) -> None:
    internal = tree.internal_count
    for i, child in enumerate(tree.children(node)):
        if child >= internal:
            fp = data.features[tree.leaf_inputs[child - internal]]
            pos_buf[i] = fp.pos
            neg_buf[i] = fp.neg
        else:
            pos_buf[i] = cache.pos[child]
            neg_buf[i] = cache.neg[child]


def evaluate(
    tree: CircuitTree,
    data: BitDataset,
    counter: OpCounter | None = None,
) -> tuple[np.ndarray, EvalCache]:
    """Run the whole circuit bottom-up, keeping every node's output.

    Returns (root positive vector, cache).  Memory scales with the number of
    internal nodes; use `predict` when only the decisions are needed.
    """
    _check_leaves(tree, data)
    n = data.n_examples
    nwords = word_count(n, data.word_size)
    dtype = data.labels.dtype
    internal = tree.internal_count
    cache = EvalCache(
        pos=np.empty((internal, nwords), dtype=dtype),
        neg=np.empty((internal, nwords), dtype=dtype),
        n_bits=n,
    )
    pos_buf = np.empty((tree.arity, nwords), dtype=dtype)
    neg_buf = np.empty((tree.arity, nwords), dtype=dtype)
    for node in range(internal - 1, -1, -1):
        _gather_children(tree, data, cache, node, pos_buf, neg_buf)
        _run_table(
            tree.arity, tree.tables[node], pos_buf, neg_buf, n,
            cache.pos[node], cache.neg[node], counter,
        )
    return cache.pos[0].copy(), cache


def predict(
    tree: CircuitTree,
    data: BitDataset,
    counter: OpCounter | None = None,
) -> np.ndarray:
    """Classify without retaining per-node outputs (depth-first, low memory)."""
    _check_leaves(tree, data)
    n = data.n_examples
    nwords = word_count(n, data.word_size)
    dtype = data.labels.dtype
    internal = tree.internal_count

    def walk(node: int) -> tuple[np.ndarray, np.ndarray]:
        if node >= internal:
            fp = data.features[tree.leaf_inputs[node - internal]]
            return fp.pos, fp.neg
        pos = np.empty((tree.arity, nwords), dtype=dtype)
        neg = np.empty((tree.arity, nwords), dtype=dtype)
        for i, child in enumerate(tree.children(node)):
            cp, cn = walk(child)
            pos[i] = cp
            neg[i] = cn
        out_pos = np.empty(nwords, dtype=dtype)
        out_neg = np.empty(nwords, dtype=dtype)
        _run_table(tree.arity, tree.tables[node], pos, neg, n, out_pos, out_neg, counter)
        return out_pos, out_neg

    return walk(0)[0]


def recompute_node(tree: CircuitTree, data: BitDataset, cache: EvalCache, node: int) -> FeaturePair:
    """Re-derive one node's output from its children's cached outputs."""
    nwords = cache.pos.shape[1]
    pos = np.empty((tree.arity, nwords), dtype=cache.pos.dtype)
    neg = np.empty_like(pos)
    _gather_children(tree, data, cache, node, pos, neg)
    out_pos = np.empty(nwords, dtype=pos.dtype)
    out_neg = np.empty(nwords, dtype=pos.dtype)
    _run_table(tree.arity, tree.tables[node], pos, neg, cache.n_bits, out_pos, out_neg)
    return FeaturePair(pos=out_pos, neg=out_neg, n_bits=cache.n_bits)


# ---------------------------------------------------------------------------
# Model file format
#
#   magic "BGC1" | u8 arity | u8 depth | u32 n_features | u32 leaf_count |
#   leaf indices (u32 each) | per-gate tables, ceil(2**arity / 8) bytes,
#   breadth-first, bit p of the byte block = bits[p] (LSB first) |
#   CRC32 of everything before it (u32)
#
# All integers little-endian.
# ---------------------------------------------------------------------------

_HEADER = struct.Struct("<BBII")


def serialize(tree: CircuitTree) -> bytes:
    tbytes = np.packbits(tree.tables, axis=1, bitorder="little").tobytes()
    body = (
        MODEL_MAGIC
        + _HEADER.pack(tree.arity, tree.depth, tree.n_features, tree.leaf_count)
        + tree.leaf_inputs.astype("<u4").tobytes()
        + tbytes
    )
    return body + struct.pack("<I", zlib.crc32(body))


def deserialize(blob: bytes) -> CircuitTree:
    if len(blob) < 4:
        raise FormatError("stream shorter than the magic", offset=len(blob))
    if blob[:4] != MODEL_MAGIC:
        raise FormatError(f"bad magic {blob[:4]!r}, expected {MODEL_MAGIC!r}", offset=0)
    if len(blob) < 4 + _HEADER.size:
        raise FormatError("truncated header", offset=len(blob))
    arity, depth, n_features, leaf_count = _HEADER.unpack_from(blob, 4)
    if not 2 <= arity <= MAX_ARITY:
        raise FormatError(f"arity {arity} outside 2..{MAX_ARITY}", offset=4)
    if depth < 1:
        raise FormatError("depth must be >= 1", offset=5)
    internal, leaves = tree_shape(arity, depth)
    if leaf_count != leaves:
        raise FormatError(f"leaf count {leaf_count} != {arity}**{depth}", offset=10)
    table_bytes = ((1 << arity) + 7) // 8
    leaf_off = 4 + _HEADER.size
    tables_off = leaf_off + 4 * leaves
    crc_off = tables_off + internal * table_bytes
    expected = crc_off + 4
    if len(blob) < expected:
        raise FormatError("truncated stream", offset=len(blob))
    if len(blob) > expected:
        raise FormatError("trailing bytes after checksum", offset=expected)
    (crc,) = struct.unpack_from("<I", blob, crc_off)
    if crc != zlib.crc32(blob[:crc_off]):
        raise FormatError("checksum mismatch", offset=crc_off)
    leaf_inputs = np.frombuffer(blob, dtype="<u4", count=leaves, offset=leaf_off)
    if (leaf_inputs >= n_features).any():
        bad = int(np.nonzero(leaf_inputs >= n_features)[0][0])
        raise FormatError(
            f"leaf {bad} points at coordinate {leaf_inputs[bad]}"
            f" beyond n_features={n_features}",
            offset=leaf_off + 4 * bad,
        )
    raw = np.frombuffer(blob, dtype=np.uint8, count=internal * table_bytes, offset=tables_off)
    tables = np.unpackbits(raw.reshape(internal, table_bytes), axis=1, bitorder="little")
    return CircuitTree(
        arity=arity,
        depth=depth,
        n_features=n_features,
        leaf_inputs=leaf_inputs.astype(np.int32),
        tables=tables[:, : 1 << arity].copy(),
    )


# ---------------------------------------------------------------------------
# Netlist export: one text line per gate, children before parents.
#
#   g<id> <operand> ... <operand> 0x<table>
#
# Operands are g<id> for gate outputs and x<coordinate> for data bits; the
# table is the truth-table bits read as an integer (bit p = output on
# pattern p), zero-padded to ceil(2**arity / 4) hex digits.
# ---------------------------------------------------------------------------


def export_netlist(tree: CircuitTree) -> str:
    width = ((1 << tree.arity) + 3) // 4
    lines = [
        "# bitcircuit netlist v1",
        f"# arity={tree.arity} depth={tree.depth} n_features={tree.n_features}"
        f" gates={tree.internal_count} leaves={tree.leaf_count}",
    ]
    internal = tree.internal_count
    for node in range(internal - 1, -1, -1):
        parts = [f"g{node}"]
        for child in tree.children(node):
            if child >= internal:
                parts.append(f"x{tree.leaf_inputs[child - internal]}")
            else:
                parts.append(f"g{child}")
        value = 0
        for p, bit in enumerate(tree.tables[node]):
            value |= int(bit) << p
        parts.append(f"0x{value:0{width}x}")
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"
