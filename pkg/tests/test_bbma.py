from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rumble.bbma import BbmaConfig, block_decision_accuracy, run_bbma
from rumble.core import BlockStructure, RngStream, block_patterns
from rumble.functions import (
    DecomposableFitness,
    SubfunctionTable,
    brute_force_optimum,
    evaluate,
    make_onemax,
    make_trap_problem,
)


def random_problem(m, k, seed):
    rng = np.random.default_rng(seed)
    tables = tuple(SubfunctionTable(k, tuple(rng.permutation(1 << k).astype(float))) for _ in range(m))
    order = rng.permutation(m * k)
    return DecomposableFitness(BlockStructure.from_permutation(m, k, order), tables)


class TestDeterministic:
    @pytest.mark.parametrize("k,m,expected", [(1, 10, 11), (4, 10, 151), (3, 7, 50), (1, 1, 2)])
    def test_exact_cost(self, k, m, expected):
        f = make_onemax(m) if k == 1 else make_trap_problem(k, m)
        r = run_bbma(f, BbmaConfig(), RngStream(0))
        assert r.evaluations == expected
        assert r.generations == m

    @pytest.mark.parametrize("seed", range(10))
    def test_trap_optimum(self, seed):
        f = make_trap_problem(4, 10)
        r = run_bbma(f, BbmaConfig(), RngStream(seed))
        assert r.success and r.correct_bbs == 10 and r.best_fitness == 40

    @settings(max_examples=60, deadline=None)
    @given(m=st.integers(1, 4), k=st.integers(1, 4), seed=st.integers(0, 2**32))
    def test_matches_brute_force(self, m, k, seed):
        f = random_problem(m, k, seed)
        value, _ = brute_force_optimum(f)
        r = run_bbma(f, BbmaConfig(), RngStream(seed))
        assert r.best_fitness == value

    def test_block_order_invariance(self):
        f = make_trap_problem(3, 6)
        start = np.zeros(18, dtype=np.uint8)
        results = {run_bbma(f, BbmaConfig(block_order=o), RngStream(0), initial=start).best_fitness
                   for o in ([0, 1, 2, 3, 4, 5], [5, 4, 3, 2, 1, 0], [2, 0, 5, 1, 3, 4])}
        assert results == {18.0}

    def test_bad_block_order(self):
        with pytest.raises(ValueError):
            run_bbma(make_onemax(3), BbmaConfig(block_order=[0, 0, 1]), RngStream(0))

    def test_candidates(self):
        f = make_trap_problem(3, 4)
        start = np.zeros(12, dtype=np.uint8)
        seen = []

        def observer(j, incumbent, candidates):
            seen.append(j)
            pats = block_patterns(candidates, f.blocks)
            assert len(candidates) == 7
            assert len(set(pats[:, j])) == 7
            before = block_patterns(incumbent, f.blocks)
            others = [i for i in range(4) if i != j]
            # candidates differ from each other only in block j
            assert (pats[:, others] == pats[0, others]).all()
            assert before[j] == 7

        run_bbma(f, BbmaConfig(), RngStream(0), initial=start, observer=observer)
        assert seen == [0, 1, 2, 3]

    def test_fitness_never_decreases(self):
        f = random_problem(5, 3, 11)
        values = []
        run_bbma(f, BbmaConfig(), RngStream(1),
                 observer=lambda j, inc, cands: values.append(evaluate(f, inc)))
        assert values == sorted(values)

    def test_initial_is_not_mutated(self):
        start = np.zeros(5, dtype=np.uint8)
        run_bbma(make_onemax(5), BbmaConfig(), RngStream(0), initial=start)
        assert not start.any()

    def test_deterministic(self):
        f = make_trap_problem(4, 5, noise_variance=2.0)
        assert run_bbma(f, BbmaConfig(samples=4), RngStream(3, 1)) == run_bbma(f, BbmaConfig(samples=4), RngStream(3, 1))


class TestNoisy:
    def test_cost(self):
        f = make_onemax(20, noise_variance=1.0)
        r = run_bbma(f, BbmaConfig(samples=8), RngStream(0))
        assert r.evaluations == 8 * 21 == 168
        assert r.samples == 8

    def test_accuracy(self):
        f = make_onemax(20, noise_variance=1.0)
        correct = sum(run_bbma(f, BbmaConfig(samples=8), RngStream(5, t)).correct_bbs for t in range(900))
        assert correct / (900 * 20) >= 1 - 1 / 20

    def test_zero_samples(self):
        with pytest.raises(ValueError):
            BbmaConfig(samples=0)


class TestDecisionAccuracy:
    def test_noiseless(self):
        assert block_decision_accuracy(make_trap_problem(4, 5), 1, 500, RngStream(0)) == 1.0

    def test_many_samples(self):
        f = make_trap_problem(4, 5, noise_variance=4.0)
        assert block_decision_accuracy(f, 512, 5000, RngStream(0)) >= 0.99

    def test_monotone(self):
        f = make_onemax(10, noise_variance=4.0)
        acc = [block_decision_accuracy(f, s, 20000, RngStream(1)) for s in (1, 2, 4, 8, 16, 32)]
        assert acc == sorted(acc)
        assert acc[0] < 0.8

    def test_matches_direct_averaging(self):
        # Averaging explicit noisy evaluations gives the same decision rate.
        f = make_onemax(3, noise_variance=4.0)
        rng = np.random.default_rng(2)
        trials, ns = 20000, 4
        draws = rng.normal(0, 2.0, size=(trials, 2, ns)).mean(axis=2)
        direct = np.mean(1 + draws[:, 1] > draws[:, 0])
        assert block_decision_accuracy(f, ns, trials, RngStream(2)) == pytest.approx(direct, abs=0.015)

    def test_invalid(self):
        with pytest.raises(ValueError):
            block_decision_accuracy(make_onemax(3), 0, 10, RngStream(0))


def test_exhaustive_small_trap():
    f = make_trap_problem(2, 2)
    for bits in product((0, 1), repeat=4):
        r = run_bbma(f, BbmaConfig(), RngStream(0), initial=np.array(bits, dtype=np.uint8))
        assert r.best_fitness == 4
