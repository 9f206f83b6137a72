"""Naive reference implementations the fast paths are checked against.

Everything here works example by example on plain Python ints/lists, never
through the packed word representation, so agreement with the library is
meaningful.
"""

from math import log2

import numpy as np

from bitcircuit.bitcore import BitDataset
from bitcircuit.circuit import CircuitTree, tree_shape


def naive_transpose(rows):
    """Double-loop bit transpose of a list of equal-width rows."""
    n = len(rows)
    m = len(rows[0])
    return [[rows[j][i] for j in range(n)] for i in range(m)]


def pattern_index(bits):
    """Canonical pattern index: first input is the most significant bit."""
    p = 0
    for b in bits:
        p = (p << 1) | int(b)
    return p


def naive_gate(table_bits, child_bits_per_example):
    """Evaluate one gate per example from its children's bit columns."""
    return [int(table_bits[pattern_index(bits)]) for bits in child_bits_per_example]


def naive_tree_eval(tree: CircuitTree, rows) -> list[int]:
    """Per-example recursive interpreter over the unpacked input rows."""
    internal = tree.internal_count

    def node_value(node: int, row) -> int:
        if node >= internal:
            return int(row[tree.leaf_inputs[node - internal]])
        bits = [node_value(c, row) for c in tree.children(node)]
        return int(tree.tables[node][pattern_index(bits)])

    return [node_value(0, row) for row in rows]


def parse_netlist(text: str):
    """Parse the line-oriented gate listing into {id: (operands, table)}."""
    gates = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        gid = int(tokens[0][1:])
        operands = tokens[1:-1]
        table = int(tokens[-1], 16)
        gates[gid] = (operands, table)
    return gates


def naive_netlist_eval(gates, row) -> int:
    """Evaluate the parsed netlist on one example row."""

    def operand_value(token: str) -> int:
        if token.startswith("x"):
            return int(row[int(token[1:])])
        return gate_value(int(token[1:]))

    def gate_value(gid: int) -> int:
        operands, table = gates[gid]
        return (table >> pattern_index([operand_value(t) for t in operands])) & 1

    return gate_value(0)


def entropy_bits(counts) -> float:
    total = sum(counts)
    if total == 0:
        return 0.0
    return -sum(c / total * log2(c / total) for c in counts if c > 0)


def gain_of_table(c0, c1, table_bits) -> float:
    """Mutual information between gate output and label, from first principles."""
    n = sum(c0) + sum(c1)
    cells = [[0, 0], [0, 0]]  # [output][label]
    for p, bit in enumerate(table_bits):
        cells[int(bit)][0] += c0[p]
        cells[int(bit)][1] += c1[p]
    h_label = entropy_bits([sum(c0), sum(c1)])
    h_cond = sum(sum(cells[o]) / n * entropy_bits(cells[o]) for o in (0, 1) if sum(cells[o]))
    return h_label - h_cond


def accuracy_of_table(c0, c1, table_bits) -> int:
    """Training examples classified correctly when the gate is the classifier."""
    return sum(c1[p] if bit else c0[p] for p, bit in enumerate(table_bits))


def all_tables(arity: int):
    npat = 1 << arity
    for value in range(1 << npat):
        yield [(value >> p) & 1 for p in range(npat)]


def random_rows(rng, n, m):
    return rng.integers(0, 2, size=(n, m), dtype=np.uint8)


def random_dataset(rng, n, m, word_size=64) -> BitDataset:
    return BitDataset.from_rows(
        random_rows(rng, n, m), rng.integers(0, 2, size=n, dtype=np.uint8), word_size
    )


def random_tree(rng, arity, depth, n_features) -> CircuitTree:
    internal, leaves = tree_shape(arity, depth)
    return CircuitTree(
        arity=arity,
        depth=depth,
        n_features=n_features,
        leaf_inputs=rng.integers(0, n_features, size=leaves).astype(np.int32),
        tables=rng.integers(0, 2, size=(internal, 1 << arity), dtype=np.uint8),
    )
