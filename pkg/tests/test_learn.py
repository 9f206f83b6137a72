import numpy as np
import pytest

from bitcircuit.bitcore import BitDataset, pack_and_transpose, pack_bits, unpack_bits
from bitcircuit.circuit import TruthTable, apply_gate, evaluate
from bitcircuit.errors import CacheInvariantError, DomainError, ShapeError
from bitcircuit.learn import (
    PatternCounts,
    TrainConfig,
    error_rate,
    fit_gate_accuracy,
    fit_gate_infogain,
    gather_pattern_counts,
    hill_climb,
    info_gain_of_split,
    train_circuit,
    train_greedy,
)

from oracles import (
    accuracy_of_table,
    all_tables,
    gain_of_table,
    pattern_index,
    random_dataset,
    random_rows,
)


def counts(c0, c1):
    c0 = np.asarray(c0, dtype=np.int64)
    k = int(np.log2(len(c0)))
    return PatternCounts(arity=k, c0=c0, c1=np.asarray(c1, dtype=np.int64))


def random_counts(rng, arity, high=30):
    npat = 1 << arity
    return counts(
        rng.integers(0, high, size=npat),
        rng.integers(0, high, size=npat),
    )


class TestGatherPatternCounts:
    def test_all_zero_labels(self):
        rng = np.random.default_rng(0)
        feats = pack_and_transpose(random_rows(rng, 40, 2))
        labels = pack_bits(np.zeros(40, dtype=np.uint8))[0]
        pc = gather_pattern_counts(feats, labels)
        assert pc.c1.sum() == 0
        assert pc.c0.sum() == 40

    def test_handcrafted_tally(self):
        rows = np.array([[1, 1], [1, 0], [0, 0], [0, 1], [1, 1]], dtype=np.uint8)
        labels = np.array([1, 0, 0, 1, 1], dtype=np.uint8)
        pc = gather_pattern_counts(pack_and_transpose(rows), pack_bits(labels)[0])
        assert pc.c0.tolist() == [1, 0, 1, 0]
        assert pc.c1.tolist() == [0, 1, 0, 2]

    def test_order_free(self):
        rng = np.random.default_rng(1)
        rows = random_rows(rng, 33, 3)
        labels = rng.integers(0, 2, size=33, dtype=np.uint8)
        perm = rng.permutation(33)
        a = gather_pattern_counts(pack_and_transpose(rows), pack_bits(labels)[0])
        b = gather_pattern_counts(pack_and_transpose(rows[perm]), pack_bits(labels[perm])[0])
        assert np.array_equal(a.c0, b.c0)
        assert np.array_equal(a.c1, b.c1)

    def test_shape_mismatch(self):
        feats = pack_and_transpose([[1, 0], [0, 1], [1, 1]])
        with pytest.raises(ShapeError):
            gather_pattern_counts(feats, np.zeros(9, dtype=np.uint64))

    def test_matches_per_example_tally(self):
        rng = np.random.default_rng(2)
        rows = random_rows(rng, 130, 4)
        labels = rng.integers(0, 2, size=130, dtype=np.uint8)
        pc = gather_pattern_counts(pack_and_transpose(rows), pack_bits(labels)[0])
        want0, want1 = [0] * 16, [0] * 16
        for row, y in zip(rows, labels):
            (want1 if y else want0)[pattern_index(row)] += 1
        assert pc.c0.tolist() == want0
        assert pc.c1.tolist() == want1


class TestFitAccuracy:
    def test_strict_majorities(self):
        table = fit_gate_accuracy(counts([9, 9, 0, 0], [0, 0, 9, 9]))
        assert table.bits.tolist() == [0, 0, 1, 1]

    def test_and_shaped_counts(self):
        # Majority label per pattern equals AND of the pattern bits.
        c1 = [2, 1, 3, 9]
        c0 = [9, 8, 7, 2]
        table = fit_gate_accuracy(counts(c0, c1))
        assert table.bits.tolist() == [0, 0, 0, 1]

    def test_beats_every_table(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            pc = random_counts(rng, 2)
            ours = accuracy_of_table(pc.c0, pc.c1, fit_gate_accuracy(pc).bits)
            assert ours == max(accuracy_of_table(pc.c0, pc.c1, t) for t in all_tables(2))

    def test_per_pattern_independence(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            pc = random_counts(rng, 3)
            base = fit_gate_accuracy(pc, tie_policy="zero").bits
            p = int(rng.integers(8))
            pc.c0[p], pc.c1[p] = int(rng.integers(30)), int(rng.integers(30))
            bumped = fit_gate_accuracy(pc, tie_policy="zero").bits
            assert int((base != bumped).sum()) <= 1
            assert (base[np.arange(8) != p] == bumped[np.arange(8) != p]).all()

    def test_tie_policies(self):
        tied = counts([5, 3, 0, 0], [5, 0, 3, 0])
        assert fit_gate_accuracy(tied, "zero").bits.tolist() == [0, 0, 1, 0]
        assert fit_gate_accuracy(tied, "one").bits.tolist() == [1, 0, 1, 1]
        # global majority is class 0 here (8 + 3 + 5 vs 8): ties become 0
        assert fit_gate_accuracy(tied, "majority").bits.tolist() == [0, 0, 1, 0]
        skewed = counts([5, 0, 0, 0], [5, 9, 0, 0])
        assert fit_gate_accuracy(skewed, "majority").bits.tolist() == [1, 1, 1, 1]


class TestInfoGain:
    def test_perfect_separation(self):
        pc = counts([50, 50, 0, 0], [0, 0, 50, 50])
        assert info_gain_of_split(pc, TruthTable(2, [0, 0, 1, 1])) == pytest.approx(1.0)

    def test_constant_table(self):
        pc = counts([10, 20, 30, 5], [7, 3, 9, 1])
        assert info_gain_of_split(pc, TruthTable(2, [1, 1, 1, 1])) == 0.0
        assert info_gain_of_split(pc, TruthTable(2, [0, 0, 0, 0])) == 0.0

    def test_hand_computed_value(self):
        pc = counts([90, 60, 40, 10], [10, 40, 60, 90])
        gain = info_gain_of_split(pc, TruthTable(2, [0, 0, 1, 1]))
        # H(label) = 1 bit; each output side is 150/50, so the conditional
        # entropy is H2(0.25) = 0.81127812445913283 bits.
        assert gain == pytest.approx(0.18872187554086717, rel=1e-12)
        assert gain == pytest.approx(gain_of_table(pc.c0, pc.c1, [0, 0, 1, 1]), rel=1e-12)

    def test_empty_counts_rejected(self):
        with pytest.raises(DomainError):
            info_gain_of_split(counts([0] * 4, [0] * 4), TruthTable(2, [0, 0, 1, 1]))


class TestFitInfoGain:
    def test_monotone_proportions_split_in_the_middle(self):
        pc = counts([100, 75, 25, 0], [0, 25, 75, 100])
        table = fit_gate_infogain(pc)
        assert table.bits.tolist() == [0, 0, 1, 1]
        # Exhaustive threshold enumeration oracle over the sorted order.
        order = [0, 1, 2, 3]
        best = max(
            gain_of_table(pc.c0, pc.c1, [int(i >= j) for i in order]) for j in range(5)
        )
        assert gain_of_table(pc.c0, pc.c1, table.bits) == pytest.approx(best, rel=1e-12)

    def test_perfectly_separable(self):
        pc = counts([40, 0, 25, 0], [0, 30, 0, 35])
        table = fit_gate_infogain(pc)
        gain = info_gain_of_split(pc, table)
        h_label = gain_of_table(pc.c0, pc.c1, [0, 1, 0, 1])
        assert gain == pytest.approx(h_label, rel=1e-12)
        assert accuracy_of_table(pc.c0, pc.c1, table.bits) == pc.total

    @pytest.mark.parametrize("arity", [1, 2, 3])
    def test_brute_force_optimal(self, arity):
        rng = np.random.default_rng(10 + arity)
        for _ in range(200):
            pc = random_counts(rng, arity)
            if pc.total == 0:
                continue
            ours = gain_of_table(pc.c0, pc.c1, fit_gate_infogain(pc).bits)
            best = max(gain_of_table(pc.c0, pc.c1, t) for t in all_tables(arity))
            assert ours == pytest.approx(best, abs=1e-10)

    def test_empty_patterns_are_deterministic(self):
        pc = counts([10, 0, 0, 10], [2, 0, 0, 30])
        a = fit_gate_infogain(pc).bits
        b = fit_gate_infogain(counts([10, 0, 0, 10], [2, 0, 0, 30])).bits
        assert np.array_equal(a, b)

    def test_empty_counts_rejected(self):
        with pytest.raises(DomainError):
            fit_gate_infogain(counts([0] * 4, [0] * 4))


class TestErrorRate:
    def test_extremes(self):
        rng = np.random.default_rng(5)
        bits = rng.integers(0, 2, size=75, dtype=np.uint8)
        v = pack_bits(bits)[0]
        w = pack_bits(1 - bits)[0]
        assert error_rate(v, v, 75) == 0.0
        assert error_rate(v, w, 75) == 1.0

    def test_hand_count(self):
        a = pack_bits(np.array([1, 0, 1, 1, 0, 0, 1, 0, 1, 1, 0, 0], dtype=np.uint8))[0]
        b = pack_bits(np.array([1, 1, 1, 0, 0, 0, 1, 1, 1, 1, 0, 0], dtype=np.uint8))[0]
        assert error_rate(a, b, 12) == pytest.approx(0.25)


def identity_dataset(rng, n=64, m=6):
    rows = random_rows(rng, n, m)
    return BitDataset.from_rows(rows, rows[:, 0]), rows


class TestTrainGreedy:
    def test_identity_is_learned_with_forced_leaves(self):
        rng = np.random.default_rng(6)
        ds, _ = identity_dataset(rng)
        for arity, depth in [(2, 1), (2, 3), (3, 2)]:
            leaves = np.zeros(arity**depth, dtype=np.int32)
            _, _, report = train_greedy(
                ds, cfg=TrainConfig(arity=arity, depth=depth, t=1, seed=0), leaf_inputs=leaves
            )
            assert report.train_error == 0.0

    def test_reproducible(self):
        rng = np.random.default_rng(7)
        ds = random_dataset(rng, 256, 12)
        cfg = TrainConfig(arity=3, depth=3, t=1, seed=42)
        t1, c1_, r1 = train_greedy(ds, cfg=cfg)
        t2, c2_, r2 = train_greedy(ds, cfg=cfg)
        assert np.array_equal(t1.leaf_inputs, t2.leaf_inputs)
        assert np.array_equal(t1.tables, t2.tables)
        assert np.array_equal(c1_.pos, c2_.pos)
        assert r1.train_error == r2.train_error

    def test_root_is_optimal_given_its_children(self):
        rng = np.random.default_rng(8)
        ds = random_dataset(rng, 16, 5)
        tree, cache, report = train_greedy(ds, cfg=TrainConfig(arity=2, depth=2, t=1, seed=3))
        children = [cache.node(1), cache.node(2)]
        ours = report.train_error
        for bits in all_tables(2):
            out = apply_gate(TruthTable(2, bits), children)
            assert ours <= error_rate(out.pos, ds.labels, 16) + 1e-12

    def test_report_and_test_error(self):
        rng = np.random.default_rng(9)
        ds = random_dataset(rng, 128, 6)
        test = random_dataset(rng, 64, 6)
        _, _, report = train_greedy(ds, test, TrainConfig(arity=2, depth=2, t=1, seed=0))
        assert 0.0 <= report.train_error <= 1.0
        assert 0.0 <= report.test_error <= 1.0
        assert report.rng_algorithm == "numpy-pcg64"
        assert "greedy_ms" in report.timings_ms

    def test_config_validation(self):
        rng = np.random.default_rng(10)
        ds = random_dataset(rng, 16, 3)
        with pytest.raises(DomainError):
            train_greedy(ds, cfg=TrainConfig(arity=1, depth=2))
        with pytest.raises(DomainError):
            train_greedy(ds, cfg=TrainConfig(arity=2, depth=2, t=5))
        with pytest.raises(DomainError):
            train_greedy(ds, cfg=TrainConfig(arity=2, depth=2, t=1, criterion="nope"))

    def test_permutation_invariance(self):
        rng = np.random.default_rng(11)
        rows = random_rows(rng, 200, 10)
        labels = rng.integers(0, 2, size=200, dtype=np.uint8)
        perm = rng.permutation(10)
        inv = np.empty(10, dtype=np.int32)
        inv[perm] = np.arange(10)
        cfg = TrainConfig(arity=2, depth=3, t=1, seed=5)
        leaves = np.random.default_rng(99).integers(0, 10, size=8).astype(np.int32)
        ds_a = BitDataset.from_rows(rows, labels)
        ds_b = BitDataset.from_rows(rows[:, perm], labels)
        tree_a, cache_a, _ = train_greedy(ds_a, cfg=cfg, leaf_inputs=leaves)
        tree_b, cache_b, _ = train_greedy(ds_b, cfg=cfg, leaf_inputs=inv[leaves])
        assert np.array_equal(cache_a.pos[0], cache_b.pos[0])
        assert np.array_equal(tree_a.tables, tree_b.tables)


class TestHillClimb:
    def setup_tree(self, seed, n=96, m=8, arity=2, depth=3, trials=60, **kw):
        rng = np.random.default_rng(seed)
        ds = random_dataset(rng, n, m)
        cfg = TrainConfig(arity=arity, depth=depth, t=min(2, depth), n_trials=trials, seed=seed, **kw)
        gen = np.random.default_rng(cfg.seed)
        tree, cache, report = train_greedy(ds, cfg=cfg, rng=gen)
        return ds, cfg, gen, tree, cache, report

    def test_zero_trials_is_identity(self):
        ds, cfg, gen, tree, cache, _ = self.setup_tree(0, trials=0)
        before_tables = tree.tables.copy()
        t2, c2, report = hill_climb(tree, cache, ds, cfg, gen)
        assert t2 is tree and c2 is cache
        assert report.trials == 0 and report.accepted == 0 and report.rejected == 0
        assert np.array_equal(tree.tables, before_tables)

    def test_monotone_over_many_runs(self):
        for seed in range(50):
            ds, cfg, gen, tree, cache, greedy_report = self.setup_tree(seed)
            _, _, report = hill_climb(tree, cache, ds, cfg, gen)
            assert report.train_error <= greedy_report.train_error + 1e-12
            assert report.accepted + report.rejected == report.trials == cfg.n_trials

    def test_rejected_trials_restore_everything(self):
        # A circuit already at zero training error can never strictly improve.
        rng = np.random.default_rng(13)
        ds, _ = identity_dataset(rng, n=48, m=5)
        cfg = TrainConfig(arity=2, depth=2, t=2, n_trials=40, seed=1)
        gen = np.random.default_rng(cfg.seed)
        tree, cache, _ = train_greedy(
            ds, cfg=cfg, leaf_inputs=np.zeros(4, dtype=np.int32), rng=gen
        )
        leaves, tables = tree.leaf_inputs.copy(), tree.tables.copy()
        pos, neg = cache.pos.copy(), cache.neg.copy()
        _, _, report = hill_climb(tree, cache, ds, cfg, gen)
        assert report.accepted == 0 and report.rejected == cfg.n_trials
        assert np.array_equal(tree.leaf_inputs, leaves)
        assert np.array_equal(tree.tables, tables)
        assert np.array_equal(cache.pos, pos)
        assert np.array_equal(cache.neg, neg)

    def test_cache_coherent_after_climb(self):
        ds, cfg, gen, tree, cache, _ = self.setup_tree(21, trials=200)
        _, _, _ = hill_climb(tree, cache, ds, cfg, gen)
        preds, fresh = evaluate(tree, ds)
        assert np.array_equal(fresh.pos, cache.pos)
        assert np.array_equal(fresh.neg, cache.neg)

    def test_work_counters(self):
        ds, cfg, gen, tree, cache, _ = self.setup_tree(22, depth=3, trials=25)
        _, _, report = hill_climb(tree, cache, ds, cfg, gen)
        assert report.refit_gates == cfg.n_trials * min(cfg.t, cfg.depth)
        assert report.path_recomputes == cfg.n_trials * cfg.depth

    def test_inconsistent_cache_detected(self):
        ds, cfg, gen, tree, cache, _ = self.setup_tree(23)
        cache.pos[0] ^= np.uint64(1)
        with pytest.raises(CacheInvariantError):
            hill_climb(tree, cache, ds, cfg, gen)

    def test_accept_equal_flag(self):
        ds, cfg, gen, tree, cache, _ = self.setup_tree(24, trials=30, accept_equal=True)
        _, _, report = hill_climb(tree, cache, ds, cfg, gen)
        assert report.accepted + report.rejected == 30


class TestTrainCircuit:
    def test_pipeline_improves_or_matches_greedy(self):
        rng = np.random.default_rng(30)
        ds = random_dataset(rng, 128, 10)
        base = TrainConfig(arity=2, depth=3, t=2, n_trials=0, seed=7)
        _, _, greedy_report = train_circuit(ds, cfg=base)
        climbed = TrainConfig(arity=2, depth=3, t=2, n_trials=300, seed=7)
        _, _, report = train_circuit(ds, cfg=climbed)
        assert report.train_error <= greedy_report.train_error + 1e-12
        assert report.trials == 300

    def test_test_error_reported(self):
        rng = np.random.default_rng(31)
        ds = random_dataset(rng, 100, 7)
        test = random_dataset(rng, 60, 7)
        _, _, report = train_circuit(ds, test, TrainConfig(arity=2, depth=2, t=1, seed=0))
        assert report.test_error is not None
