"""
Tests for hard distributions, lazy oracles and the category posterior.
"""
import itertools
import json
import unittest
from fractions import Fraction

import numpy as np
from django.test import SimpleTestCase

from .boolean_tree import annotate, eval_tree, node_values
from .exceptions import (
    EmptyPosteriorError,
    GadgetSearchError,
    InconsistentObservationError,
    InvalidParametersError,
    InvalidTreeError,
    MalformedPathError,
)
from .hard_distribution import (
    GadgetDistribution,
    HardDistSpec,
    PosteriorTracker,
    confidence,
    default_gadgets,
    posterior_update,
    sample_hard_tree,
    tree_likelihood,
    trivial_tree,
)
from .oracles import oracle_query
from .span_program import DirectFunctionSpec, analyze_function


def block_leaves(hard, category, root, choices):
    """Explicit leaves of a T_1 block with the given gadget choice per depth-i prefix."""
    spec = hard.spec
    n, n0 = hard.n, hard.n0
    top = trivial_tree(spec, root, category).leaf_values()
    leaves = []
    for index, value in enumerate(top):
        prefix = tuple(int(d) for d in np.base_repr(index, 2).zfill(category)) if category else ()
        gadget = hard.gadgets.leaves(int(value), choices.get(prefix, 0))
        for bit in gadget:
            leaves.extend(trivial_tree(spec, bit, n - n0 - category).leaf_values().tolist())
    return leaves


def brute_force_likelihood(hard, observations):
    """p(i, r) by enumerating the gadget draws of every touched gadget root."""
    table = np.zeros((hard.n_tilde, 2))
    for category in range(1, hard.n_tilde + 1):
        prefixes = sorted({path[:category] for path, _ in observations})
        for root in (0, 1):
            top = trivial_tree(hard.spec, root, category).leaf_values()
            gadget_values = [
                int(top[int(''.join(map(str, prefix)), 2)]) if category else root
                for prefix in prefixes
            ]
            total = 0.0
            options = [range(len(hard.gadgets.trees[v])) for v in gadget_values]
            for assignment in itertools.product(*options):
                choices = dict(zip(prefixes, assignment))
                leaves = block_leaves(hard, category, root, choices)
                if all(leaves[int(''.join(map(str, path)), 2)] == bit for path, bit in observations):
                    weight = 1.0
                    for value, choice in zip(gadget_values, assignment):
                        weight *= float(hard.gadgets.trees[value][choice][1])
                    total += weight
            table[category - 1, root] = total
    return table


class TrivialTreeTests(SimpleTestCase):
    """Test the all-trivial trees t_{r,n}."""

    def setUp(self):
        self.nand = DirectFunctionSpec.nand()

    def test_nand_example(self):
        """Test t_{1,2} for NAND."""
        tree = trivial_tree(self.nand, 1, 2)
        np.testing.assert_array_equal(tree.leaf_values(), [1, 1, 1, 1])
        np.testing.assert_array_equal(node_values(self.nand, tree), [1, 0, 0, 1, 1, 1, 1])

    def test_height_zero(self):
        """Test a height-0 tree is the single leaf r."""
        for r in (0, 1):
            np.testing.assert_array_equal(trivial_tree(self.nand, r, 0).leaf_values(), [r])

    def test_trees_differ_everywhere(self):
        """Test t_{0,n} and t_{1,n} differ at every node."""
        for spec in (self.nand, DirectFunctionSpec.majority(3)):
            for height in range(5):
                zero = node_values(spec, trivial_tree(spec, 0, height))
                one = node_values(spec, trivial_tree(spec, 1, height))
                self.assertTrue(np.all(zero != one))
                self.assertEqual(int(zero[0]), 0)
                self.assertEqual(int(one[0]), 1)

    def test_negative_height(self):
        """Test negative heights are rejected."""
        with self.assertRaises(InvalidParametersError):
            trivial_tree(self.nand, 0, -1)


class GadgetTests(SimpleTestCase):
    """Test gadget distributions."""

    def test_nand_gadgets(self):
        """Test the fixed NAND pairs: depth 2, one fault, uniform marginals."""
        analysis = analyze_function(DirectFunctionSpec.nand())
        gadgets = default_gadgets(analysis)
        self.assertEqual((gadgets.height, gadgets.fault_bound), (2, 1))
        for r in (0, 1):
            self.assertEqual(len(gadgets.trees[r]), 2)
            self.assertTrue(all(w == Fraction(1, 2) for _, w in gadgets.trees[r]))
            self.assertEqual(gadgets.leaf_marginals(r), [Fraction(1, 2)] * 4)
        self.assertEqual(gadgets.verify(analysis), [])

    def test_majority_search(self):
        """Test 3-MAJ gets a valid searched distribution of height 2."""
        analysis = analyze_function(DirectFunctionSpec.majority(3))
        gadgets = default_gadgets(analysis)
        self.assertEqual(gadgets.height, 2)
        self.assertEqual(gadgets.verify(analysis), [])

    def test_and_has_no_gadgets(self):
        """Test AND fails: value-1 trees force every leaf to 1."""
        analysis = analyze_function(DirectFunctionSpec.threshold(2, 2))
        with self.assertRaises(GadgetSearchError) as context:
            default_gadgets(analysis)
        self.assertEqual(context.exception.exit_code, 3)

    def test_verify_reports_problems(self):
        """Test a skewed distribution is flagged."""
        analysis = analyze_function(DirectFunctionSpec.nand())
        half = Fraction(1, 2)
        skewed = GadgetDistribution(
            arity=2, height=2, fault_bound=1,
            trees={
                1: [((1, 1, 0, 0), Fraction(1, 4)), ((0, 0, 1, 1), Fraction(3, 4))],
                0: [((0, 1, 1, 0), half), ((1, 0, 0, 1), half)],
            },
        )
        problems = skewed.verify(analysis)
        self.assertTrue(any('marginal' in problem for problem in problems))

    def test_choose(self):
        """Test uniform draws map onto cumulative weights."""
        gadgets = default_gadgets(analyze_function(DirectFunctionSpec.nand()))
        self.assertEqual(gadgets.choose(1, 0.0), 0)
        self.assertEqual(gadgets.choose(1, 0.75), 1)
        self.assertEqual(gadgets.choose(1, 0.999999), 1)

    def test_dict_round_trip(self):
        """Test exact rational weights survive serialization."""
        gadgets = default_gadgets(analyze_function(DirectFunctionSpec.nand()))
        data = gadgets.to_dict()
        self.assertEqual(data['trees']['1'][0]['weight'], '1/2')
        restored = GadgetDistribution.from_dict(data)
        self.assertEqual(restored.trees, gadgets.trees)


class HardDistSpecTests(SimpleTestCase):
    """Test hard distribution parameters."""

    def test_derived_parameters(self):
        """Test n_tilde and beta at n = 1024."""
        hard = HardDistSpec.build(DirectFunctionSpec.nand(), n=1024)
        self.assertEqual(hard.n0, 2)
        self.assertEqual(hard.k0, 1)
        self.assertEqual(hard.n_tilde, 1022)
        self.assertEqual(hard.beta, 0)
        self.assertEqual(hard.total_height, 1024)

    def test_height_ratio(self):
        """Test strict specs need n >= 4 n0."""
        with self.assertRaises(InvalidParametersError):
            HardDistSpec.build(DirectFunctionSpec.nand(), n=6)
        hard = HardDistSpec.build(DirectFunctionSpec.nand(), n=6, strict=False)
        self.assertEqual(hard.n_tilde, 4)

    def test_degenerate_n(self):
        """Test n - n0 <= 1 is rejected even without the ratio check."""
        with self.assertRaises(InvalidParametersError):
            HardDistSpec.build(DirectFunctionSpec.nand(), n=3, strict=False)

    def test_bad_k(self):
        """Test k must be positive."""
        with self.assertRaises(InvalidParametersError):
            HardDistSpec.build(DirectFunctionSpec.nand(), n=8, k=0)

    def test_parity(self):
        """Test NAND's x0-parity is the path length mod 2."""
        hard = HardDistSpec.build(DirectFunctionSpec.nand(), n=8)
        self.assertEqual(hard.parity(()), 0)
        self.assertEqual(hard.parity((0, 1, 1)), 1)
        self.assertEqual(hard.parity((1, 0)), 0)


class LazyTreeOracleTests(SimpleTestCase):
    """Test lazily sampled trees."""

    def setUp(self):
        self.nand = DirectFunctionSpec.nand()
        self.analysis = analyze_function(self.nand)
        self.small = HardDistSpec.build(self.nand, n=8)

    def test_sampled_trees_are_k_fault(self):
        """Test materialized T_1 samples satisfy the k0-fault condition with the drawn root."""
        for seed in range(30):
            oracle = sample_hard_tree(self.small, seed)
            tree = oracle.materialize()
            annotation = annotate(self.analysis, tree)
            self.assertLessEqual(annotation.max_kappa, self.small.k0)
            self.assertEqual(int(annotation.values[0]), oracle.root_value)
            self.assertEqual(oracle.queries, 0)

    def test_stacked_levels_are_k_fault(self):
        """Test T_2 samples satisfy the (2 k0)-fault condition."""
        hard = HardDistSpec.build(self.nand, n=4, k=2, strict=False)
        for seed in range(20):
            oracle = sample_hard_tree(hard, seed)
            annotation = annotate(self.analysis, oracle.materialize())
            self.assertLessEqual(annotation.max_kappa, 2 * hard.k0)
            self.assertEqual(int(annotation.values[0]), oracle.root_value)

    def test_majority_samples(self):
        """Test sampled 3-MAJ trees respect the searched fault bound."""
        majority = analyze_function(DirectFunctionSpec.majority(3))
        hard = HardDistSpec(analysis=majority, gadgets=default_gadgets(majority), n=5, strict=False)
        for seed in range(10):
            oracle = sample_hard_tree(hard, seed)
            annotation = annotate(majority, oracle.materialize())
            self.assertLessEqual(annotation.max_kappa, hard.k0)
            self.assertEqual(int(annotation.values[0]), oracle.root_value)

    def test_forced_root(self):
        """Test conditioning on the root value."""
        hard = HardDistSpec.build(self.nand, n=6, strict=False)
        for seed in range(1000):
            self.assertEqual(sample_hard_tree(hard, seed, forced_root=1).root_value, 1)
        for seed in range(100):
            tree = sample_hard_tree(hard, seed, forced_root=0).materialize()
            self.assertEqual(eval_tree(self.nand, tree), 0)

    def test_unforced_root_marginal(self):
        """Test the root value is a fair coin over seeds."""
        roots = [sample_hard_tree(self.small, seed).root_value for seed in range(1000)]
        self.assertAlmostEqual(float(np.mean(roots)), 0.5, delta=0.05)

    def test_categories_in_range(self):
        """Test categories lie in 1..n_tilde."""
        hard = HardDistSpec.build(self.nand, n=16)
        categories = {sample_hard_tree(hard, seed).category(()) for seed in range(500)}
        self.assertTrue(categories <= set(range(1, hard.n_tilde + 1)))
        self.assertGreater(len(categories), hard.n_tilde // 2)

    def test_memoized_queries(self):
        """Test repeated queries are free and distinct ones are counted."""
        hard = HardDistSpec.build(self.nand, n=16)
        oracle = sample_hard_tree(hard, 4)
        path = (0, 1) * 8
        first = oracle_query(oracle, path)
        self.assertEqual(oracle_query(oracle, path), first)
        self.assertEqual(oracle.queries, 1)

        rng = np.random.default_rng(0)
        seen = {path}
        while len(seen) < 25:
            candidate = tuple(int(d) for d in rng.integers(2, size=16))
            seen.add(candidate)
            oracle.query(candidate)
        self.assertEqual(oracle.queries, 25)
        self.assertEqual(len(oracle.transcript), 25)

    def test_shared_trivial_ancestor(self):
        """Test leaves whose common ancestor lies below the gadget leaves agree."""
        hard = HardDistSpec.build(self.nand, n=16)
        checked = 0
        for seed in range(40):
            oracle = sample_hard_tree(hard, seed)
            if oracle.category(()) + hard.n0 > 15:
                continue
            left = (0,) * 16
            right = (0,) * 15 + (1,)
            self.assertEqual(oracle.query(left), oracle.query(right))
            checked += 1
        self.assertGreater(checked, 0)

    def test_order_independence(self):
        """Test leaf values do not depend on query order."""
        hard = HardDistSpec.build(self.nand, n=8, k=2)
        rng = np.random.default_rng(12)
        paths = [tuple(int(d) for d in rng.integers(2, size=16)) for _ in range(30)]
        forward = sample_hard_tree(hard, 99)
        backward = sample_hard_tree(hard, 99)
        values = {path: forward.query(path) for path in paths}
        for path in reversed(paths):
            self.assertEqual(backward.query(path), values[path])

    def test_transcript_replay(self):
        """Test identical runs give identical transcripts that replay."""
        hard = HardDistSpec.build(self.nand, n=8)
        paths = [tuple(int(d) for d in np.base_repr(i * 37 % 256, 2).zfill(8)) for i in range(12)]
        first = sample_hard_tree(hard, 5)
        second = sample_hard_tree(hard, 5)
        for path in paths:
            first.query(path)
            second.query(path)
        self.assertEqual(first.transcript_lines(), second.transcript_lines())
        self.assertTrue(sample_hard_tree(hard, 5).replay(first.transcript_lines()))

        record = json.loads(first.transcript_lines()[0])
        record["bit"] = 1 - record["bit"]
        self.assertFalse(sample_hard_tree(hard, 5).replay([json.dumps(record)]))

    def test_malformed_paths(self):
        """Test bad lengths and digits are rejected."""
        oracle = sample_hard_tree(self.small, 0)
        with self.assertRaises(MalformedPathError) as ctx:
            oracle.query((0, 1))
        self.assertIn('digits, got 2', ctx.exception.details['reason'])
        with self.assertRaises(MalformedPathError):
            oracle.query((0,) * 7 + (2,))
        with self.assertRaises(MalformedPathError):
            oracle.category((0, 1))

    def test_materialize_limit(self):
        """Test huge trees are never materialized."""
        oracle = sample_hard_tree(HardDistSpec.build(self.nand, n=1024), 0)
        with self.assertRaises(InvalidParametersError):
            oracle.materialize()

    def test_summary(self):
        """Test the oracle summary fields."""
        summary = sample_hard_tree(self.small, 3).summary()
        self.assertEqual(summary['seed'], 3)
        self.assertEqual(summary['height'], 8)
        self.assertIn(summary['top_category'], range(1, 7))


class PosteriorTrackerTests(SimpleTestCase):
    """Test the exact category posterior."""

    def setUp(self):
        self.hard = HardDistSpec.build(DirectFunctionSpec.nand(), n=6, strict=False)

    def random_paths(self, rng, count):
        indices = rng.choice(2 ** self.hard.n, size=count, replace=False)
        return [tuple(int(d) for d in np.base_repr(int(i), 2).zfill(self.hard.n)) for i in indices]

    def test_fresh_tracker(self):
        """Test S = 2 n_tilde and zero confidence before any query."""
        tracker = PosteriorTracker(self.hard)
        self.assertEqual(tracker.total, 2 * self.hard.n_tilde)
        self.assertEqual(confidence(tracker), 0.0)
        self.assertEqual(tracker.spread, 0.0)

    def test_first_observation(self):
        """Test the first leaf halves every entry."""
        tracker = posterior_update(PosteriorTracker(self.hard), (0, 1, 0, 0, 1, 1), 1)
        np.testing.assert_allclose(tracker.p, 0.5)
        self.assertEqual(tracker.total, self.hard.n_tilde)
        self.assertEqual(tracker.spread, 0.0)

    def test_certain_root(self):
        """Test confidence 1 when one root value is excluded."""
        tracker = PosteriorTracker(self.hard)
        tracker.p[:, 1] = 0.0
        self.assertEqual(tracker.confidence(), 1.0)
        self.assertEqual(tracker.best_guess(), 0)

    def test_empty_posterior(self):
        """Test zero mass is an error."""
        tracker = PosteriorTracker(self.hard)
        tracker.p[:] = 0.0
        with self.assertRaises(EmptyPosteriorError):
            tracker.confidence()

    def test_matches_brute_force(self):
        """Test the tracker against enumeration of every category, root and gadget draw."""
        for seed in range(8):
            rng = np.random.default_rng(seed)
            oracle = sample_hard_tree(self.hard, seed)
            tracker = PosteriorTracker(self.hard)
            observations = []
            for path in self.random_paths(rng, 6):
                bit = oracle.query(path)
                tracker.update(path, bit)
                observations.append((path, bit))
                expected = brute_force_likelihood(self.hard, observations)
                np.testing.assert_allclose(tracker.p, expected, atol=1e-12)
            self.assertGreater(tracker.p[oracle.category(()) - 1, oracle.root_value], 0)

    def test_spread_growth(self):
        """Test D grows by at most n0 per observation and bounds the confidence."""
        hard = HardDistSpec.build(DirectFunctionSpec.nand(), n=32)
        for seed in range(10):
            rng = np.random.default_rng(seed)
            oracle = sample_hard_tree(hard, seed)
            tracker = PosteriorTracker(hard)
            for _ in range(20):
                path = tuple(int(d) for d in rng.integers(2, size=32))
                before = tracker.spread
                tracker.update(path, oracle.query(path))
                self.assertLessEqual(tracker.spread - before, hard.n0 + 1e-12)
                self.assertLessEqual(tracker.confidence(), tracker.confidence_bound() + 1e-12)

    def test_predictive_is_probability(self):
        """Test the predictive probability of a fresh leaf lies in [0, 1]."""
        tracker = PosteriorTracker(self.hard)
        tracker.update((0,) * 6, 0)
        tracker.update((0, 0, 1, 0, 0, 0), 1)
        value = tracker.predictive((0, 1, 0, 0, 0, 0))
        self.assertGreaterEqual(value, 0.0)
        self.assertLessEqual(value, 1.0)
        self.assertAlmostEqual(float(tracker.category_posterior().sum()), 1.0)
        self.assertAlmostEqual(float(tracker.root_posterior().sum()), 1.0)

    def test_inconsistent_observation(self):
        """Test contradicting an observed leaf fails and leaves the tracker unchanged."""
        tracker = PosteriorTracker(self.hard)
        tracker.update((0,) * 6, 1)
        snapshot = tracker.p.copy()
        with self.assertRaises(InconsistentObservationError):
            tracker.update((0,) * 6, 0)
        np.testing.assert_array_equal(tracker.p, snapshot)
        self.assertEqual(len(tracker.history), 1)

    def test_malformed_leaf(self):
        """Test block leaves must have n digits."""
        with self.assertRaises(MalformedPathError):
            PosteriorTracker(self.hard).update((0, 1), 0)

    def test_tree_likelihood(self):
        """Test the per-leaf product of block probabilities."""
        p_root = np.array([[0.2, 0.8], [0.5, 0.5], [1.0, 0.0]])
        self.assertAlmostEqual(tree_likelihood(p_root, [1, 0, 0]), 0.8 * 0.5 * 1.0)
        self.assertEqual(tree_likelihood(p_root, [1, 1, 1]), 0.0)
        with self.assertRaises(InvalidTreeError):
            tree_likelihood(p_root, [0, 1])

    def test_export(self):
        """Test the tracker summary."""
        tracker = PosteriorTracker(self.hard)
        tracker.update((1,) * 6, 0)
        data = tracker.to_dict()
        self.assertEqual(data['observations'], 1)
        self.assertAlmostEqual(data['S'], self.hard.n_tilde)


if __name__ == '__main__':
    unittest.main()
