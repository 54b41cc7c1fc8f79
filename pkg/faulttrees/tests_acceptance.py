"""
Full-size statistical runs of the experiment claims.

These take minutes rather than seconds. Run them alone with
``python manage.py test faulttrees --tag slow`` or leave them out with
``--exclude-tag slow``.
"""
import math
import time
import unittest

import numpy as np
from django.test import SimpleTestCase, tag

from .boolean_tree import ComplexityParams, annotate, complexity_bound, query_estimate, random_k_fault_tree
from .classical_solver import DIVISION_STRATEGIES, SplitSearch, simulate_division_process
from .hard_distribution import HardDistSpec, PosteriorTracker, sample_hard_tree
from .nand_walk import nand_analysis, verify_complexity_rules
from .span_program import DirectFunctionSpec, analyze_function, build_program, normalize_trivial, witness_size
from .tests_classical_solver import assert_spread_accounting, splitsearch_success
from .tests_hard_distribution import brute_force_likelihood

SMALL_ENERGY = 1e-6


@tag('slow')
class SplitSearchAcceptanceTests(SimpleTestCase):
    """Test split search at n = 1024."""

    def setUp(self):
        self.hard = HardDistSpec.build(DirectFunctionSpec.nand(), n=1024)
        self.budget = 4 * math.ceil(math.log2(self.hard.n_tilde))

    def test_success_rate(self):
        """Test 40 queries recover the root in at least 95% of 500 trials."""
        self.assertEqual(self.budget, 40)
        self.assertGreaterEqual(splitsearch_success(self.hard, self.budget, 500, seed=1), 0.95)

    def test_spread_accounting_on_solver_transcripts(self):
        """Test D never exceeds n0 times the observations of a split-search transcript."""
        sequence = np.random.SeedSequence(5)
        for child in sequence.spawn(100):
            oracle = sample_hard_tree(self.hard, int(child.generate_state(1)[0]))
            tracker, trace = SplitSearch(self.hard, np.random.default_rng(child)).search_block(
                oracle.query, self.budget
            )
            self.assertEqual(len(trace), oracle.queries)
            assert_spread_accounting(self, self.hard, tracker)
            for _, value, bound in trace:
                self.assertLessEqual(value, bound + 1e-12)


@tag('slow')
class WitnessAcceptanceTests(SimpleTestCase):
    """Test weak-cost independence on 1000 random cases."""

    def test_weak_cost_independence(self):
        """Test changing only weak costs never moves the witness size by more than 1e-9."""
        rng = np.random.default_rng(70)
        specs = [
            DirectFunctionSpec.nand(),
            DirectFunctionSpec.majority(3),
            DirectFunctionSpec.majority(5),
            DirectFunctionSpec.threshold(4, 2),
            DirectFunctionSpec.threshold(4, 1),
            DirectFunctionSpec.negated_threshold(3, 3),
        ]
        programs = [normalize_trivial(build_program(spec)) for spec in specs]
        for _ in range(1000):
            index = int(rng.integers(len(specs)))
            spec, program = specs[index], programs[index]
            bits = tuple(int(b) for b in rng.integers(2, size=spec.arity))
            value = spec.value(bits)
            weak = np.array([label != value for label in spec.labels(bits)])
            costs = rng.uniform(0.1, 5.0, size=spec.arity)
            perturbed = np.where(weak, rng.uniform(0.0, 50.0, size=spec.arity), costs)
            self.assertAlmostEqual(
                witness_size(program, bits, costs).value,
                witness_size(program, bits, perturbed).value,
                delta=1e-9,
            )


@tag('slow')
class TreeAcceptanceTests(SimpleTestCase):
    """Test the complexity induction and NAND sign agreement on large samples."""

    def setUp(self):
        self.nand = analyze_function(DirectFunctionSpec.nand())
        self.defaults = ComplexityParams.defaults()

    def test_induction_bound(self):
        """Test 200 random trees with n <= 12 and k <= 3 satisfy the bound at every node."""
        rng = np.random.default_rng(170)
        for _ in range(200):
            depth = int(rng.integers(1, 13))
            k = int(rng.integers(0, 4))
            tree = random_k_fault_tree(self.nand, depth, k, rng)
            report = complexity_bound(self.nand, annotate(self.nand, tree), self.defaults, k)
            self.assertEqual(report.violations, [], (depth, k))
            self.assertTrue(np.all(report.z <= report.bound * (1 + 1e-9)))
            self.assertAlmostEqual(
                report.query_estimate / query_estimate(depth, k, self.nand.omega, self.defaults), 1.0, places=9
            )

    def test_walk_signs(self):
        """Test ratio signs match the node values on 500 random trees with n <= 10 and k <= 3."""
        rng = np.random.default_rng(409)
        analysis = nand_analysis()
        for _ in range(500):
            depth = int(rng.integers(1, 11))
            k = int(rng.integers(0, 4))
            report = verify_complexity_rules(random_k_fault_tree(analysis, depth, k, rng), SMALL_ENERGY)
            self.assertTrue(report.sign_agreement, (depth, k))
            self.assertTrue(report.root_sign_ok, (depth, k))


@tag('slow')
class HardDistributionAcceptanceTests(SimpleTestCase):
    """Test sampled trees and the posterior on large samples."""

    def setUp(self):
        self.nand = DirectFunctionSpec.nand()
        self.analysis = analyze_function(self.nand)

    def test_sampled_trees_are_k_fault(self):
        """Test 500 T_1 and 500 T_2 samples satisfy the k * k0 fault condition with the drawn root."""
        for hard in (
            HardDistSpec.build(self.nand, n=8),
            HardDistSpec.build(self.nand, n=4, k=2, strict=False),
        ):
            for seed in range(500):
                oracle = sample_hard_tree(hard, seed)
                annotation = annotate(self.analysis, oracle.materialize())
                self.assertLessEqual(annotation.max_kappa, hard.k * hard.k0, (hard.k, seed))
                self.assertEqual(int(annotation.values[0]), oracle.root_value)

    def test_posterior_matches_enumeration(self):
        """Test the tracker equals enumeration on 200 random transcripts of up to 6 queries."""
        hard = HardDistSpec.build(self.nand, n=6, strict=False)
        rng = np.random.default_rng(496)
        for seed in range(200):
            oracle = sample_hard_tree(hard, seed)
            count = int(rng.integers(1, 7))
            indices = rng.choice(2 ** hard.n, size=count, replace=False)
            tracker = PosteriorTracker(hard)
            observations = []
            for index in indices:
                path = tuple(int(d) for d in np.base_repr(int(index), 2).zfill(hard.n))
                bit = oracle.query(path)
                tracker.update(path, bit)
                observations.append((path, bit))
                if len(observations) == 1:
                    np.testing.assert_array_equal(tracker.p, 0.5)
            np.testing.assert_allclose(tracker.p, brute_force_likelihood(hard, observations), atol=1e-12)


@tag('slow')
class DivisionAcceptanceTests(SimpleTestCase):
    """Test the division bound with 10^5 trials."""

    def test_bound_for_every_strategy(self):
        """Test Pr[A_10 < F A_0] stays below 2^10 F + 3 sigma for F = 2^-12 and 2^-15."""
        trials = 100_000
        f_values = [2.0 ** -12, 2.0 ** -15]
        started = time.perf_counter()
        for name, factory in DIVISION_STRATEGIES.items():
            table = simulate_division_process(1.0, 10, factory(), trials, np.random.default_rng(497), f_values)
            for _, row in table.iterrows():
                slack = 3 * math.sqrt(row['bound'] * (1 - row['bound']) / trials)
                self.assertLess(row['probability'], row['bound'] + slack, (name, row['F']))
        self.assertLess(time.perf_counter() - started, 10.0)


if __name__ == '__main__':
    unittest.main()
