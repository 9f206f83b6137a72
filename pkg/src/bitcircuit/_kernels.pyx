# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled word-parallel kernels.

Same contract as `_kernels_py`; see that module for the program encoding.
Loops run word-at-a-time with a scalar register file so one pass over memory
evaluates a whole gate program.
"""

import numpy as np

from libc.stdint cimport int32_t, int64_t, uint32_t, uint64_t

cdef extern from *:
    """
    static inline int bc_popcount64(uint64_t x) { return __builtin_popcountll(x); }
    static inline int bc_popcount32(uint32_t x) { return __builtin_popcount(x); }
    """
    int bc_popcount64(uint64_t x) nogil
    int bc_popcount32(uint32_t x) nogil

BACKEND = "cython"

OP_AND = 0
OP_OR = 1
RESULT_CONST0 = -1
RESULT_CONST1 = -2

# Register file bound: 2*8 child registers + 3*2**7 - 3 instructions max.
DEF MAX_REGS = 400
DEF MAX_SLICES = 256

ctypedef fused word_t:
    uint32_t
    uint64_t


cdef inline int _pop(word_t x) nogil:
    if word_t is uint64_t:
        return bc_popcount64(x)
    else:
        return bc_popcount32(x)


def popcount(word_t[::1] a):
    cdef int64_t total = 0
    cdef Py_ssize_t w
    with nogil:
        for w in range(a.shape[0]):
            total += _pop(a[w])
    return total


def popcount_and(word_t[::1] a, word_t[::1] b):
    cdef int64_t total = 0
    cdef Py_ssize_t w
    with nogil:
        for w in range(a.shape[0]):
            total += _pop(<word_t>(a[w] & b[w]))
    return total


def popcount_xor(word_t[::1] a, word_t[::1] b):
    cdef int64_t total = 0
    cdef Py_ssize_t w
    with nogil:
        for w in range(a.shape[0]):
            total += _pop(<word_t>(a[w] ^ b[w]))
    return total


def tensor_slices(word_t[:, ::1] pos, word_t[:, ::1] neg, word_t[:, ::1] out):
    cdef int k = pos.shape[0]
    cdef Py_ssize_t nwords = pos.shape[1]
    cdef Py_ssize_t w
    cdef int i, q
    cdef word_t buf[MAX_SLICES]
    with nogil:
        for w in range(nwords):
            buf[0] = neg[0, w]
            buf[1] = pos[0, w]
            for i in range(1, k):
                for q in range((1 << i) - 1, -1, -1):
                    buf[2 * q + 1] = buf[q] & pos[i, w]
                    buf[2 * q] = buf[q] & neg[i, w]
            for q in range(1 << k):
                out[q, w] = buf[q]


def count_slices(word_t[:, ::1] slices, word_t[::1] mask, int64_t[::1] out):
    cdef Py_ssize_t nwords = slices.shape[1]
    cdef Py_ssize_t p, w
    cdef int64_t total
    with nogil:
        for p in range(slices.shape[0]):
            total = 0
            for w in range(nwords):
                total += _pop(<word_t>(slices[p, w] & mask[w]))
            out[p] = total


def pattern_counts(word_t[:, ::1] pos, word_t[:, ::1] neg,
                   word_t[::1] lab1, word_t[::1] lab0,
                   int64_t[::1] c0, int64_t[::1] c1):
    cdef int k = pos.shape[0]
    cdef int npat = 1 << k
    cdef Py_ssize_t nwords = pos.shape[1]
    cdef Py_ssize_t w
    cdef int i, q
    cdef word_t buf[MAX_SLICES]
    cdef int64_t acc0[MAX_SLICES]
    cdef int64_t acc1[MAX_SLICES]
    cdef word_t w1, w0
    with nogil:
        for q in range(npat):
            acc0[q] = 0
            acc1[q] = 0
        for w in range(nwords):
            buf[0] = neg[0, w]
            buf[1] = pos[0, w]
            for i in range(1, k):
                for q in range((1 << i) - 1, -1, -1):
                    buf[2 * q + 1] = buf[q] & pos[i, w]
                    buf[2 * q] = buf[q] & neg[i, w]
            w1 = lab1[w]
            w0 = lab0[w]
            for q in range(npat):
                acc1[q] += _pop(<word_t>(buf[q] & w1))
                acc0[q] += _pop(<word_t>(buf[q] & w0))
        for q in range(npat):
            c0[q] = acc0[q]
            c1[q] = acc1[q]


def run_gate_program(int32_t[:, ::1] prog, int result,
                     word_t[:, ::1] pos, word_t[:, ::1] neg,
                     word_t[::1] out_pos, word_t[::1] out_neg,
                     word_t tail_mask):
    cdef int k = pos.shape[0]
    cdef int ninstr = prog.shape[0]
    cdef Py_ssize_t nwords = pos.shape[1]
    cdef Py_ssize_t w
    cdef int i, j
    cdef word_t regs[MAX_REGS]
    cdef word_t ones, po
    cdef word_t full = <word_t>(-1)
    with nogil:
        for w in range(nwords):
            ones = tail_mask if w == nwords - 1 else full
            for i in range(k):
                regs[2 * i] = pos[i, w]
                regs[2 * i + 1] = neg[i, w]
            for j in range(ninstr):
                if prog[j, 0] == 0:
                    regs[2 * k + j] = regs[prog[j, 1]] & regs[prog[j, 2]]
                else:
                    regs[2 * k + j] = regs[prog[j, 1]] | regs[prog[j, 2]]
            if result == -1:
                po = 0
            elif result == -2:
                po = ones
            else:
                po = regs[result]
            out_pos[w] = po
            out_neg[w] = po ^ ones
    return (ninstr + 1) * nwords
