"""Training: greedy layer-wise truth-table fitting plus leaf-rewiring search.

The greedy pass wires every leaf to a random input coordinate, then chooses
truth tables bottom-up.  Each gate is fitted from the per-pattern class
tallies of its children's outputs, as if its own output bit were the final
decision: gates below the root maximize the information gain between their
output and the label, the root maximizes training accuracy.

The hill climber then repeatedly re-points one random leaf at another
random coordinate, re-fits the tables of the t ancestors nearest that leaf,
recomputes the cached outputs along the whole leaf-to-root path, and keeps
the change only if the training error strictly improves.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from math import log2

import numpy as np

from ._backend import kernels
from .bitcore import (
    MAX_ARITY,
    WORD_DTYPES,
    BitDataset,
    FeaturePair,
    complement_words,
    stack_pair,
    word_count,
)
from .circuit import (
    CircuitTree,
    EvalCache,
    TruthTable,
    _gather_children,
    _run_table,
    predict,
    recompute_node,
    tree_shape,
)
from .errors import CacheInvariantError, DomainError, ShapeError

CRITERIA = ("mixed", "accuracy", "infogain")
TIE_POLICIES = ("majority", "zero", "one")

RNG_ALGORITHM = "numpy-pcg64"

_GAIN_RTOL = 1e-12


@dataclass
class PatternCounts:
    """Per-pattern class tallies for one gate's input patterns."""

    arity: int
    c0: np.ndarray  # int64, length 2**arity
    c1: np.ndarray

    @property
    def total(self) -> int:
        return int(self.c0.sum() + self.c1.sum())


@dataclass
class TrainConfig:
    """Hyperparameters shared by the greedy trainer and the hill climber.

    `t` is the number of ancestor gates re-fitted above a rewired leaf,
    counted from the leaf upward; `n_trials`=0 disables hill climbing.
    """

    arity: int = 4
    depth: int = 8
    t: int = 4
    n_trials: int = 0
    criterion: str = "mixed"
    seed: int = 0
    tie_policy: str = "majority"
    accept_equal: bool = False
    word_size: int = 64

    def validate(self) -> None:
        if not 2 <= self.arity <= MAX_ARITY:
            raise DomainError(f"arity must be in 2..{MAX_ARITY}, got {self.arity}")
        if self.depth < 1:
            raise DomainError(f"depth must be >= 1, got {self.depth}")
        if not 1 <= self.t <= self.depth:
            raise DomainError(f"t must be in 1..depth, got t={self.t} depth={self.depth}")
        if self.n_trials < 0:
            raise DomainError("n_trials must be >= 0")
        if self.criterion not in CRITERIA:
            raise DomainError(f"criterion must be one of {CRITERIA}")
        if self.tie_policy not in TIE_POLICIES:
            raise DomainError(f"tie_policy must be one of {TIE_POLICIES}")
        if self.word_size not in WORD_DTYPES:
            raise DomainError(f"word_size must be one of {sorted(WORD_DTYPES)}")


@dataclass
class TrainReport:
    train_error: float
    test_error: float | None = None
    trials: int = 0
    accepted: int = 0
    rejected: int = 0
    refit_gates: int = 0
    path_recomputes: int = 0
    rng_algorithm: str = RNG_ALGORITHM
    timings_ms: dict[str, float] = field(default_factory=dict)


def error_rate(predictions: np.ndarray, labels: np.ndarray, n_bits: int) -> float:
    """Fraction of the first n_bits on which the two packed vectors differ."""
    if predictions.shape != labels.shape or predictions.dtype != labels.dtype:
        raise ShapeError("predictions and labels must match in length and word size")
    return kernels.popcount_xor(predictions, labels) / n_bits


def gather_pattern_counts(children: list[FeaturePair], labels: np.ndarray) -> PatternCounts:
    """Tally training examples per (input pattern, class) for one gate."""
    pos, neg, n_bits = stack_pair(children)
    if labels.shape != pos.shape[1:] or labels.dtype != pos.dtype:
        raise ShapeError("labels must match the children in length and word size")
    labels_neg = complement_words(labels, n_bits)
    k = pos.shape[0]
    c0 = np.empty(1 << k, dtype=np.int64)
    c1 = np.empty(1 << k, dtype=np.int64)
    kernels.pattern_counts(pos, neg, labels, labels_neg, c0, c1)
    return PatternCounts(arity=k, c0=c0, c1=c1)


def _fit_accuracy_bits(c0: np.ndarray, c1: np.ndarray, tie_policy: str) -> np.ndarray:
    bits = (c1 > c0).astype(np.uint8)
    ties = c1 == c0
    if ties.any():
        if tie_policy == "majority":
            fill = 1 if c1.sum() > c0.sum() else 0
        else:
            fill = 1 if tie_policy == "one" else 0
        bits[ties] = fill
    return bits


def fit_gate_accuracy(counts: PatternCounts, tie_policy: str = "majority") -> TruthTable:
    """Per-pattern majority vote; the most accurate table for these counts."""
    return TruthTable(counts.arity, _fit_accuracy_bits(counts.c0, counts.c1, tie_policy))


def _entropy_terms(n1: np.ndarray, total: np.ndarray) -> np.ndarray:
    """total * H2(n1/total) in bits, elementwise, with 0-count terms = 0."""
    n1 = np.asarray(n1, dtype=np.float64)
    total = np.asarray(total, dtype=np.float64)
    n0 = total - n1
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(n1 * np.log2(n1 / total) + n0 * np.log2(n0 / total))
    return np.where((n1 > 0) & (n0 > 0), h, 0.0)


def info_gain_of_split(counts: PatternCounts, table: TruthTable) -> float:
    """Mutual information, in bits, between the gate's output and the label."""
    total = counts.total
    if total == 0:
        raise DomainError("information gain is undefined on empty counts")
    if table.arity != counts.arity:
        raise ShapeError("table arity does not match the counts")
    on = table.bits.astype(bool)
    n1_out1 = int(counts.c1[on].sum())
    n0_out1 = int(counts.c0[on].sum())
    t1 = int(counts.c1.sum())
    out1 = n1_out1 + n0_out1
    h_label = float(_entropy_terms(np.array(t1), np.array(total)))
    h_cond = float(_entropy_terms(np.array(n1_out1), np.array(out1))) + float(
        _entropy_terms(np.array(t1 - n1_out1), np.array(total - out1))
    )
    return (h_label - h_cond) / total


def _xlg(x: int) -> float:
    return x * log2(x) if x > 0 else 0.0


def _fit_infogain_bits(c0: np.ndarray, c1: np.ndarray, tie_policy: str) -> np.ndarray:
    # Scalar arithmetic: the pattern counts are tiny (<= 256 entries) and
    # this fit runs once per gate per hill-climbing trial.
    counts0 = c0.tolist()
    counts1 = c1.tolist()
    npat = len(counts0)
    tot0 = sum(counts0)
    tot1 = sum(counts1)
    n = tot0 + tot1
    if n == 0:
        raise DomainError("cannot fit a gate on empty counts")
    # Patterns no training example hits sort as if perfectly mixed.
    order = sorted(
        range(npat),
        key=lambda p: counts1[p] / (counts0[p] + counts1[p])
        if counts0[p] + counts1[p]
        else 0.5,
    )
    # Split j sends the first j patterns (sorted by class-1 proportion) to
    # output 0 and the rest to 1; j runs 0..2**k inclusive.  Maximizing the
    # gain means minimizing the count-weighted conditional entropy.
    entries = []
    l0 = l1 = 0
    for j in range(npat + 1):
        r0 = tot0 - l0
        r1 = tot1 - l1
        cond = (
            _xlg(l0 + l1) - _xlg(l0) - _xlg(l1)
            + _xlg(r0 + r1) - _xlg(r0) - _xlg(r1)
        )
        entries.append((cond, l0 + r1))
        if j < npat:
            p = order[j]
            l0 += counts0[p]
            l1 += counts1[p]
    best_cond = min(e[0] for e in entries)
    tol = _GAIN_RTOL * max(1.0, float(n))
    best_j = -1
    best_correct = -1
    for j, (cond, correct) in enumerate(entries):
        if cond <= best_cond + tol and correct > best_correct:
            best_correct = correct
            best_j = j
    bits = np.zeros(npat, dtype=np.uint8)
    bits[order[best_j:]] = 1
    return bits


def fit_gate_infogain(counts: PatternCounts, tie_policy: str = "majority") -> TruthTable:
    """Best threshold split of the patterns ordered by class-1 proportion.

    Maximizes information gain over every split respecting that order; ties
    go to the split with higher training accuracy, then the lower index.
    For two classes this search is exact: no table of the same arity has
    higher gain.
    """
    return TruthTable(counts.arity, _fit_infogain_bits(counts.c0, counts.c1, tie_policy))


def _fit_bits(c0, c1, node: int, cfg: TrainConfig) -> np.ndarray:
    if cfg.criterion == "accuracy" or (cfg.criterion == "mixed" and node == 0):
        return _fit_accuracy_bits(c0, c1, cfg.tie_policy)
    return _fit_infogain_bits(c0, c1, cfg.tie_policy)


def train_greedy(
    data: BitDataset,
    test: BitDataset | None = None,
    cfg: TrainConfig | None = None,
    leaf_inputs: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[CircuitTree, EvalCache, TrainReport]:
    """Fit a full tree bottom-up; returns the tree, its output cache, a report.

    Leaves are wired to coordinates drawn uniformly with replacement unless
    `leaf_inputs` pins them.  Passing `rng` overrides the seed in `cfg` (the
    hill climber can then continue the same stream).
    """
    cfg = cfg if cfg is not None else TrainConfig()
    cfg.validate()
    if data.n_features < 1 or data.n_examples < 1:
        raise DomainError("training data must have at least one feature and one example")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    internal, leaves = tree_shape(cfg.arity, cfg.depth)
    if leaf_inputs is None:
        leaf_inputs = rng.integers(0, data.n_features, size=leaves).astype(np.int32)
    else:
        leaf_inputs = np.asarray(leaf_inputs, dtype=np.int32)

    t0 = time.perf_counter()
    n = data.n_examples
    nwords = word_count(n, data.word_size)
    dtype = data.labels.dtype
    npat = 1 << cfg.arity
    tree = CircuitTree(
        arity=cfg.arity,
        depth=cfg.depth,
        n_features=data.n_features,
        leaf_inputs=leaf_inputs,
        tables=np.zeros((internal, npat), dtype=np.uint8),
    )
    cache = EvalCache(
        pos=np.empty((internal, nwords), dtype=dtype),
        neg=np.empty((internal, nwords), dtype=dtype),
        n_bits=n,
    )
    pos_buf = np.empty((cfg.arity, nwords), dtype=dtype)
    neg_buf = np.empty((cfg.arity, nwords), dtype=dtype)
    c0 = np.empty(npat, dtype=np.int64)
    c1 = np.empty(npat, dtype=np.int64)
    for node in range(internal - 1, -1, -1):
        _gather_children(tree, data, cache, node, pos_buf, neg_buf)
        kernels.pattern_counts(pos_buf, neg_buf, data.labels, data.labels_neg, c0, c1)
        tree.tables[node] = _fit_bits(c0, c1, node, cfg)
        _run_table(
            cfg.arity, tree.tables[node], pos_buf, neg_buf, n,
            cache.pos[node], cache.neg[node],
        )
    greedy_ms = (time.perf_counter() - t0) * 1e3

    report = TrainReport(
        train_error=error_rate(cache.pos[0], data.labels, n),
        timings_ms={"greedy_ms": greedy_ms},
    )
    if test is not None:
        t1 = time.perf_counter()
        report.test_error = error_rate(predict(tree, test), test.labels, test.n_examples)
        report.timings_ms["eval_ms"] = (time.perf_counter() - t1) * 1e3
    return tree, cache, report


def _check_cache(tree: CircuitTree, data: BitDataset, cache: EvalCache) -> None:
    if cache.n_bits != data.n_examples or cache.pos.shape[0] != tree.internal_count:
        raise CacheInvariantError("cache shape does not match the tree/dataset")
    root = recompute_node(tree, data, cache, 0)
    if not np.array_equal(root.pos, cache.pos[0]):
        raise CacheInvariantError("cached root output disagrees with its children")


def hill_climb(
    tree: CircuitTree,
    cache: EvalCache,
    data: BitDataset,
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> tuple[CircuitTree, EvalCache, TrainReport]:
    """Leaf-rewiring local search; mutates and returns the given tree/cache.

    Each trial re-points one uniformly chosen leaf at a different uniformly
    chosen coordinate, re-fits the `cfg.t` nearest ancestor tables (same
    per-level criterion as the greedy pass), recomputes outputs along the
    whole leaf-to-root path, and accepts only a strict training-error
    improvement (or an equal error with `cfg.accept_equal`).  Rejected
    trials restore the leaf, the tables and the cache exactly.
    """
    cfg.validate()
    _check_cache(tree, data, cache)
    report = TrainReport(train_error=0.0)
    n = data.n_examples
    if cfg.n_trials == 0:
        report.train_error = error_rate(cache.pos[0], data.labels, n)
        return tree, cache, report

    t0 = time.perf_counter()
    internal = tree.internal_count
    leaves = tree.leaf_count
    n_features = data.n_features
    depth = tree.depth
    t_eff = min(cfg.t, depth)
    nwords = cache.pos.shape[1]
    npat = 1 << cfg.arity

    # path[i] is the i-th ancestor of the rewired leaf, path[-1] the root.
    path = np.empty(depth, dtype=np.int64)
    saved_tables = np.empty((t_eff, npat), dtype=np.uint8)
    saved_pos = np.empty((depth, nwords), dtype=cache.pos.dtype)
    saved_neg = np.empty_like(saved_pos)
    pos_buf = np.empty((cfg.arity, nwords), dtype=cache.pos.dtype)
    neg_buf = np.empty_like(pos_buf)
    c0 = np.empty(npat, dtype=np.int64)
    c1 = np.empty(npat, dtype=np.int64)

    err = kernels.popcount_xor(cache.pos[0], data.labels)
    for _ in range(cfg.n_trials):
        leaf = int(rng.integers(leaves))
        if n_features < 2:
            report.rejected += 1
            continue
        old_coord = int(tree.leaf_inputs[leaf])
        new_coord = int(rng.integers(n_features - 1))
        if new_coord >= old_coord:
            new_coord += 1

        node = internal + leaf
        for i in range(depth):
            node = (node - 1) // cfg.arity
            path[i] = node
            saved_pos[i] = cache.pos[node]
            saved_neg[i] = cache.neg[node]
            if i < t_eff:
                saved_tables[i] = tree.tables[node]

        tree.leaf_inputs[leaf] = new_coord
        for i in range(depth):
            g = int(path[i])
            _gather_children(tree, data, cache, g, pos_buf, neg_buf)
            if i < t_eff:
                kernels.pattern_counts(pos_buf, neg_buf, data.labels, data.labels_neg, c0, c1)
                tree.tables[g] = _fit_bits(c0, c1, g, cfg)
                report.refit_gates += 1
            _run_table(cfg.arity, tree.tables[g], pos_buf, neg_buf, n, cache.pos[g], cache.neg[g])
        report.path_recomputes += depth

        new_err = kernels.popcount_xor(cache.pos[0], data.labels)
        if new_err < err or (cfg.accept_equal and new_err == err):
            err = new_err
            report.accepted += 1
        else:
            tree.leaf_inputs[leaf] = old_coord
            for i in range(depth):
                g = int(path[i])
                cache.pos[g] = saved_pos[i]
                cache.neg[g] = saved_neg[i]
                if i < t_eff:
                    tree.tables[g] = saved_tables[i]
            report.rejected += 1

    report.trials = cfg.n_trials
    report.train_error = err / n
    report.timings_ms["hill_climb_ms"] = (time.perf_counter() - t0) * 1e3
    return tree, cache, report


def train_circuit(
    data: BitDataset,
    test: BitDataset | None = None,
    cfg: TrainConfig | None = None,
) -> tuple[CircuitTree, EvalCache, TrainReport]:
    """Greedy pass followed by `cfg.n_trials` of hill climbing, one RNG stream."""
    cfg = cfg if cfg is not None else TrainConfig()
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    tree, cache, report = train_greedy(data, test=None, cfg=cfg, rng=rng)
    if cfg.n_trials > 0:
        tree, cache, climb = hill_climb(tree, cache, data, cfg, rng)
        climb.timings_ms = {**report.timings_ms, **climb.timings_ms}
        report = climb
    if test is not None:
        t0 = time.perf_counter()
        report.test_error = error_rate(predict(tree, test), test.labels, test.n_examples)
        report.timings_ms["eval_ms"] = (time.perf_counter() - t0) * 1e3
    return tree, cache, report
