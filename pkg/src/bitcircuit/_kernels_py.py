"""Pure numpy implementation of the word-parallel kernels.

Mirrors the compiled extension in `_kernels.pyx` call for call; the backend
selected at import time is the only difference visible to callers.  Both
backends operate on packed bit vectors stored as 1-D/2-D arrays of uint32 or
uint64 words, least significant bit first within each word.

Gate programs are straight-line bitwise programs produced by
`circuit.compile_gate`: an (n_instr, 3) int32 array of (opcode, src_a, src_b)
rows with opcode 0 = AND, 1 = OR.  Register file layout: register 2*i holds
child i's positive vector, 2*i+1 its negation, and instruction j writes
register 2*k + j.  `result` selects the register holding the gate output,
with -1/-2 meaning constant 0/1.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"

OP_AND = 0
OP_OR = 1
RESULT_CONST0 = -1
RESULT_CONST1 = -2


def popcount(a: np.ndarray) -> int:
    return int(np.bitwise_count(a).sum(dtype=np.int64))


def popcount_and(a: np.ndarray, b: np.ndarray) -> int:
    return int(np.bitwise_count(a & b).sum(dtype=np.int64))


def popcount_xor(a: np.ndarray, b: np.ndarray) -> int:
    return int(np.bitwise_count(a ^ b).sum(dtype=np.int64))


def tensor_slices(pos: np.ndarray, neg: np.ndarray, out: np.ndarray) -> None:
    """Fill `out[p]` with the AND of each input's positive/negative vector.

    Pattern index p reads MSB-first: bit i of p selects positive (1) or
    negative (0) for input i.  Built by in-place doubling, so `out` doubles
    as the work buffer.
    """
    k = pos.shape[0]
    out[0] = neg[0]
    out[1] = pos[0]
    for i in range(1, k):
        for q in range((1 << i) - 1, -1, -1):
            np.bitwise_and(out[q], pos[i], out=out[2 * q + 1])
            np.bitwise_and(out[q], neg[i], out=out[2 * q])


def count_slices(slices: np.ndarray, mask: np.ndarray, out: np.ndarray) -> None:
    np.sum(np.bitwise_count(slices & mask), axis=1, dtype=np.int64, out=out)


def pattern_counts(
    pos: np.ndarray,
    neg: np.ndarray,
    lab1: np.ndarray,
    lab0: np.ndarray,
    c0: np.ndarray,
    c1: np.ndarray,
) -> None:
    """Per-pattern class tallies: c1[p] = |{examples with pattern p, label 1}|."""
    k, nwords = pos.shape
    scratch = np.empty((1 << k, nwords), dtype=pos.dtype)
    tensor_slices(pos, neg, scratch)
    count_slices(scratch, lab1, c1)
    count_slices(scratch, lab0, c0)


def run_gate_program(
    prog: np.ndarray,
    result: int,
    pos: np.ndarray,
    neg: np.ndarray,
    out_pos: np.ndarray,
    out_neg: np.ndarray,
    tail_mask: int,
) -> int:
    """Execute a compiled gate program; returns the word-operation count."""
    k, nwords = pos.shape
    regs: list[np.ndarray] = []
    for i in range(k):
        regs.append(pos[i])
        regs.append(neg[i])
    for op, a, b in prog:
        if op == OP_AND:
            regs.append(regs[a] & regs[b])
        else:
            regs.append(regs[a] | regs[b])
    ones = np.full(nwords, np.iinfo(pos.dtype).max, dtype=pos.dtype)
    ones[-1] = tail_mask
    if result == RESULT_CONST0:
        out_pos[:] = 0
    elif result == RESULT_CONST1:
        out_pos[:] = ones
    else:
        out_pos[:] = regs[result]
    np.bitwise_xor(out_pos, ones, out=out_neg)
    return (len(prog) + 1) * nwords
