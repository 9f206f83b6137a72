#!/usr/bin/env python3
"""Compare the compiled kernels against the numpy fallback.

Times the four hot kernels on training-shaped inputs (word-parallel gate
programs, fused pattern counting, tensor expansion, masked popcounts) and a
small end-to-end greedy fit, printing a speedup table.

Usage: python benchmarks/bench_backends.py [--examples N] [--repeat R]
"""

import argparse
import time

import numpy as np

from bitcircuit._backend import get_kernels
from bitcircuit.bitcore import complement_words, pack_bits, word_count
from bitcircuit.circuit import TruthTable, compile_gate


def _timeit(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _random_pairs(rng, k, n, word_size=64):
    bits = rng.integers(0, 2, size=(k, n), dtype=np.uint8)
    pos = pack_bits(bits, word_size)
    neg = np.stack([complement_words(row, n) for row in pos])
    return pos, neg


def bench(n_examples: int, repeat: int) -> None:
    rng = np.random.default_rng(0)
    k = 4
    npat = 1 << k
    nwords = word_count(n_examples, 64)
    pos, neg = _random_pairs(rng, k, n_examples)
    labels = pack_bits(rng.integers(0, 2, size=n_examples, dtype=np.uint8))[0]
    labels_neg = complement_words(labels, n_examples)
    table = TruthTable(k, rng.integers(0, 2, size=npat, dtype=np.uint8))
    prog = compile_gate(table)
    mask = int(labels.dtype.type(-1)) if n_examples % 64 == 0 else (1 << (n_examples % 64)) - 1

    inner_gates = 1000  # amortize per-call overhead the way training does

    cases = {}
    for name in ("python", "cython"):
        try:
            kern = get_kernels(name)
        except ImportError:
            print(f"{name} backend unavailable, skipping")
            continue
        out_pos = np.empty(nwords, dtype=np.uint64)
        out_neg = np.empty(nwords, dtype=np.uint64)
        slices = np.empty((npat, nwords), dtype=np.uint64)
        counts = np.empty(npat, dtype=np.int64)
        c0 = np.empty(npat, dtype=np.int64)
        c1 = np.empty(npat, dtype=np.int64)
        cases[name] = {
            "gate program": lambda kern=kern, o1=out_pos, o2=out_neg: [
                kern.run_gate_program(prog.instrs, prog.result, pos, neg, o1, o2, mask)
                for _ in range(inner_gates)
            ],
            "pattern counts": lambda kern=kern, c0=c0, c1=c1: [
                kern.pattern_counts(pos, neg, labels, labels_neg, c0, c1)
                for _ in range(inner_gates)
            ],
            "tensor slices": lambda kern=kern, s=slices: [
                kern.tensor_slices(pos, neg, s) for _ in range(inner_gates)
            ],
            "masked popcount": lambda kern=kern, s=slices, c=counts: [
                kern.count_slices(s, labels, c) for _ in range(inner_gates)
            ],
        }

    print(f"n_examples={n_examples} arity={k} ({inner_gates} gate calls per measurement)\n")
    print(f"{'kernel':<18} " + "".join(f"{name:>12} " for name in cases) + f"{'speedup':>9}")
    names = list(cases)
    for op in ("gate program", "pattern counts", "tensor slices", "masked popcount"):
        times = {name: _timeit(cases[name][op], repeat) for name in names}
        line = f"{op:<18} " + "".join(f"{times[n] * 1e3:>10.1f}ms " for n in names)
        if len(names) == 2:
            line += f"{times[names[0]] / times[names[1]]:>8.1f}x"
        print(line)

    # End to end: greedy training is dominated by the kernels above.
    import os
    import subprocess
    import sys

    print("\nend-to-end greedy fit (squares task, 4000 train examples):")
    for name in names:
        env = dict(os.environ, BITCIRCUIT_KERNELS=name)
        code = (
            "import time; from bitcircuit.data import CubesSpec, gen_cubes;"
            "from bitcircuit.learn import TrainConfig, train_circuit;"
            "d = gen_cubes(4000, CubesSpec(seed=1));"
            "t0 = time.perf_counter();"
            "train_circuit(d, cfg=TrainConfig(arity=4, depth=6));"
            "print(f'{time.perf_counter() - t0:.2f}s')"
        )
        out = subprocess.run(
            [sys.executable, "-c", code], env=env, capture_output=True, text=True
        )
        print(f"  {name:<8} {out.stdout.strip() or out.stderr.strip()}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--examples", type=int, default=12000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    bench(args.examples, args.repeat)
