"""
Tests for the classical solvers, the benchmark harness and the division process.
"""
import tempfile
import unittest
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from .boolean_tree import EvalTree, eval_tree, random_k_fault_tree
from .classical_solver import (
    BENCHMARK_COLUMNS,
    DIVISION_STRATEGIES,
    SHORTCIRCUIT,
    SPLITSEARCH,
    BenchmarkCell,
    SplitSearch,
    benchmark_frame,
    constant_strategy,
    fault_level_recovery,
    run_benchmark,
    simulate_division_process,
    solve_shortcircuit,
    solve_splitsearch,
    write_benchmark_csv,
)
from .exceptions import InvalidParametersError
from .hard_distribution import HardDistSpec, PosteriorTracker, sample_hard_tree
from .oracles import ExplicitLeafOracle
from .span_program import DirectFunctionSpec, analyze_function


def splitsearch_success(hard, budget, trials, seed):
    sequence = np.random.SeedSequence(seed)
    hits = 0
    for child in sequence.spawn(trials):
        oracle = sample_hard_tree(hard, int(child.generate_state(1)[0]))
        result = solve_splitsearch(hard, oracle, budget, np.random.default_rng(child))
        hits += int(result.answer == oracle.root_value)
    return hits / trials


def assert_spread_accounting(testcase, hard, tracker):
    replay = PosteriorTracker(hard)
    for count, (path, bit) in enumerate(tracker.history, start=1):
        replay.update(path, bit)
        testcase.assertLessEqual(replay.spread, hard.n0 * count + 1e-9)


class ShortCircuitTests(SimpleTestCase):
    """Test short-circuit evaluation."""

    def setUp(self):
        self.nand = DirectFunctionSpec.nand()

    def test_left_first_example(self):
        """Test the all-ones depth-2 tree needs two queries left to right."""
        oracle = ExplicitLeafOracle(2, 2, [1, 1, 1, 1])
        result = solve_shortcircuit(self.nand, oracle)
        self.assertEqual(result.answer, 1)
        self.assertEqual(result.queries, 2)
        self.assertFalse(result.exhausted)

    def test_forcing_child(self):
        """Test a 0 child forces NAND to 1."""
        for second in (0, 1):
            oracle = ExplicitLeafOracle(2, 1, [0, second])
            result = solve_shortcircuit(self.nand, oracle, np.random.default_rng(0))
            self.assertEqual(result.answer, 1)
            self.assertLessEqual(result.queries, 2)

    def test_always_correct(self):
        """Test the answer equals the true root value on random trees."""
        rng = np.random.default_rng(31)
        for spec in (self.nand, DirectFunctionSpec.majority(3)):
            analysis = analyze_function(spec)
            for _ in range(500):
                depth = int(rng.integers(1, 7 if spec.arity == 2 else 5))
                tree = random_k_fault_tree(analysis, depth, int(rng.integers(0, 3)), rng)
                oracle = ExplicitLeafOracle(spec.arity, depth, tree.leaf_values())
                result = solve_shortcircuit(spec, oracle, rng)
                self.assertEqual(result.answer, eval_tree(spec, tree))
                self.assertEqual(result.queries, oracle.queries)

    def test_budget_exhausted(self):
        """Test a depth-4 tree cannot be settled with one query."""
        oracle = ExplicitLeafOracle(2, 4, EvalTree.explicit(2, [1] * 16).leaf_values())
        result = solve_shortcircuit(self.nand, oracle, np.random.default_rng(2), budget=1)
        self.assertTrue(result.exhausted)
        self.assertLessEqual(result.queries, 1)

    def test_arity_mismatch(self):
        """Test a ternary function on a binary oracle is rejected."""
        with self.assertRaises(InvalidParametersError):
            solve_shortcircuit(DirectFunctionSpec.majority(3), ExplicitLeafOracle(2, 1, [0, 1]))


class SplitSearchTests(SimpleTestCase):
    """Test split search on hard distributions."""

    def setUp(self):
        self.nand = DirectFunctionSpec.nand()

    def test_large_block_success(self):
        """Test 4 log2(n_tilde) probes on n = 1024 recover the root value."""
        hard = HardDistSpec.build(self.nand, n=1024)
        budget = 4 * int(np.ceil(np.log2(hard.n_tilde)))
        self.assertEqual(budget, 40)
        self.assertGreaterEqual(splitsearch_success(hard, budget, 150, seed=1), 0.8)

    def test_single_probe_is_a_coin(self):
        """Test one leaf carries no information about the root."""
        hard = HardDistSpec.build(self.nand, n=64)
        self.assertAlmostEqual(splitsearch_success(hard, 1, 1000, seed=2), 0.5, delta=0.05)

    def test_confidence_trace_below_bound(self):
        """Test every traced confidence stays below D/S and queries match the oracle."""
        hard = HardDistSpec.build(self.nand, n=128)
        for seed in range(10):
            oracle = sample_hard_tree(hard, seed)
            result = solve_splitsearch(hard, oracle, 30, np.random.default_rng(seed))
            self.assertEqual(result.queries, oracle.queries)
            self.assertLessEqual(result.queries, 30)
            self.assertEqual(len(result.confidence_trace), result.queries)
            for _, value, bound in result.confidence_trace:
                self.assertLessEqual(value, bound + 1e-12)

    def test_spread_accounting_on_transcripts(self):
        """Test D stays below n0 times the observations along split-search transcripts."""
        hard = HardDistSpec.build(self.nand, n=128)
        for seed in range(10):
            oracle = sample_hard_tree(hard, seed)
            tracker, _ = SplitSearch(hard, np.random.default_rng(seed)).search_block(oracle.query, 30)
            self.assertEqual(len(tracker.history), oracle.queries)
            assert_spread_accounting(self, hard, tracker)

    def test_recovery_improves_with_budget(self):
        """Test the split depth is found more often with more probes."""
        hard = HardDistSpec.build(self.nand, n=64)
        low = fault_level_recovery(hard, 8, 100, seed=3)
        high = fault_level_recovery(hard, 40, 100, seed=3)
        self.assertGreater(high, low)

    def test_two_levels_improve_with_budget(self):
        """Test T_2 success grows with the budget."""
        hard = HardDistSpec.build(self.nand, n=6, k=2, strict=False)
        low = splitsearch_success(hard, 10, 200, seed=4)
        high = splitsearch_success(hard, 100, 200, seed=4)
        self.assertGreater(high, low + 0.1)

    def test_zero_budget(self):
        """Test a zero budget answers without queries."""
        hard = HardDistSpec.build(self.nand, n=16)
        oracle = sample_hard_tree(hard, 0)
        result = solve_splitsearch(hard, oracle, 0, np.random.default_rng(0))
        self.assertEqual(result.queries, 0)
        self.assertIn(result.answer, (0, 1))

    def test_invalid_arguments(self):
        """Test negative budgets and mismatched oracles are rejected."""
        hard = HardDistSpec.build(self.nand, n=16)
        with self.assertRaises(InvalidParametersError):
            solve_splitsearch(hard, sample_hard_tree(hard, 0), -1, np.random.default_rng(0))
        other = HardDistSpec.build(self.nand, n=8)
        with self.assertRaises(InvalidParametersError):
            solve_splitsearch(hard, sample_hard_tree(other, 0), 5, np.random.default_rng(0))


class BenchmarkTests(SimpleTestCase):
    """Test the benchmark harness."""

    def setUp(self):
        self.hard = HardDistSpec.build(DirectFunctionSpec.nand(), n=6, strict=False)
        self.grid = [
            BenchmarkCell(hard=self.hard, algorithm=SHORTCIRCUIT),
            BenchmarkCell(hard=self.hard, algorithm=SPLITSEARCH, budget=6),
        ]

    def test_unlimited_shortcircuit_always_succeeds(self):
        """Test exact evaluation scores 1.0."""
        rows = run_benchmark(self.grid[:1], trials=30, seed=0)
        self.assertEqual(rows[0].success, 1.0)
        self.assertIsNone(rows[0].budget)
        self.assertGreater(rows[0].mean_queries, 0)

    def test_deterministic(self):
        """Test equal seeds give equal rows."""
        first = run_benchmark(self.grid, trials=20, seed=8)
        second = run_benchmark(self.grid, trials=20, seed=8)
        self.assertEqual([row.to_dict() for row in first], [row.to_dict() for row in second])

    def test_jobs_do_not_change_results(self):
        """Test parallel trials reproduce the sequential rows."""
        sequential = run_benchmark(self.grid, trials=12, seed=5, jobs=1)
        parallel = run_benchmark(self.grid, trials=12, seed=5, jobs=2)
        self.assertEqual([row.to_dict() for row in sequential], [row.to_dict() for row in parallel])

    def test_csv_header(self):
        """Test the CSV schema."""
        rows = run_benchmark(self.grid, trials=5, seed=1)
        with tempfile.TemporaryDirectory() as tmp:
            path = write_benchmark_csv(rows, Path(tmp) / 'bench.csv')
            lines = path.read_text().splitlines()
        self.assertEqual(lines[0], 'algorithm,n,k,trials,budget,success,mean_queries,seed')
        self.assertEqual(len(lines), 3)
        self.assertTrue(lines[1].startswith('shortcircuit,6,1,5,,'))

    def test_frame_columns(self):
        """Test the data frame column order."""
        frame = benchmark_frame(run_benchmark(self.grid, trials=3, seed=2))
        self.assertEqual(list(frame.columns), BENCHMARK_COLUMNS)

    def test_invalid_grid(self):
        """Test empty grids and zero trials are rejected."""
        with self.assertRaises(InvalidParametersError):
            run_benchmark([], trials=3, seed=0)
        with self.assertRaises(InvalidParametersError):
            run_benchmark(self.grid, trials=0, seed=0)


class DivisionProcessTests(SimpleTestCase):
    """Test the pot-division simulation."""

    def test_constant_halving(self):
        """Test p = 1/2 halves deterministically."""
        table = simulate_division_process(1.0, 6, constant_strategy(0.5), 1000,
                                          np.random.default_rng(0), [2.0 ** -7, 2.0 ** -5])
        self.assertEqual(table['probability'].tolist(), [0.0, 1.0])

    def test_single_step(self):
        """Test one step with p = 0.9 lands below half with probability 0.1."""
        table = simulate_division_process(1.0, 1, constant_strategy(0.9), 20000,
                                          np.random.default_rng(1), [0.5])
        row = table.iloc[0]
        self.assertAlmostEqual(row['probability'], 0.1, delta=3 * np.sqrt(0.09 / 20000) + 1e-3)
        self.assertEqual(row['bound'], 1.0)

    def test_bound_holds_for_every_strategy(self):
        """Test Pr[A_m < F A_0] stays below 2^m F for every registered strategy."""
        f = 2.0 ** -15
        trials = 20000
        for name, factory in DIVISION_STRATEGIES.items():
            table = simulate_division_process(1.0, 10, factory(), trials,
                                              np.random.default_rng(7), [f])
            row = table.iloc[0]
            slack = 3 * np.sqrt(row['bound'] * (1 - row['bound']) / trials)
            self.assertLess(row['probability'], row['bound'] + slack, name)

    def test_columns(self):
        """Test the table schema."""
        table = simulate_division_process(2.0, 3, constant_strategy(), 10,
                                          np.random.default_rng(0), [0.1])
        self.assertEqual(list(table.columns), ['F', 'bound', 'probability', 'stderr', 'trials'])
        self.assertEqual(int(table['trials'].iloc[0]), 10)

    def test_invalid_parameters(self):
        """Test a nonpositive pot and zero trials are rejected."""
        with self.assertRaises(InvalidParametersError):
            simulate_division_process(0.0, 3, constant_strategy(), 10, np.random.default_rng(0), [0.1])
        with self.assertRaises(InvalidParametersError):
            simulate_division_process(1.0, 3, constant_strategy(), 0, np.random.default_rng(0), [0.1])


if __name__ == '__main__':
    unittest.main()
