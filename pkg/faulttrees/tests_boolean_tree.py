"""
Tests for evaluation trees, fault annotation and the complexity recursion.
"""
import math
import unittest

import numpy as np
from django.test import SimpleTestCase

from .boolean_tree import (
    PRIMARY,
    WEIGHTED,
    ComplexityParams,
    EvalTree,
    annotate,
    complexity_bound,
    eval_tree,
    node_values,
    path_fault_count,
    query_estimate,
    query_scaling_table,
    random_k_fault_tree,
    validate_k_fault,
)
from .exceptions import (
    ArityMismatchError,
    InvalidParametersError,
    InvalidTreeError,
    ZeroStrongChildrenError,
)
from .hard_distribution import trivial_tree
from .oracles import ExplicitLeafOracle
from .span_program import DirectFunctionSpec, analyze_function


def brute_force_kappa(analysis, leaves, arity):
    """Kappa of the root by direct recursion over leaf blocks."""
    def visit(block):
        if len(block) == 1:
            return int(block[0]), 0
        size = len(block) // arity
        children = [visit(block[j * size:(j + 1) * size]) for j in range(arity)]
        bits = tuple(value for value, _ in children)
        profile = analysis.profile(bits)
        strong = [kappa for (_, kappa), is_strong in zip(children, profile.strong) if is_strong]
        return profile.value, max(strong) + (0 if profile.trivial else 1)
    return visit(list(leaves))


def mixed_depth_four():
    """Depth-4 NAND tree whose root is a fault: t_{0,3} next to t_{1,3}."""
    nand = DirectFunctionSpec.nand()
    leaves = np.concatenate([
        trivial_tree(nand, 0, 3).leaf_values(),
        trivial_tree(nand, 1, 3).leaf_values(),
    ])
    return EvalTree(arity=2, depth=4, leaves=leaves)


class EvalTreeTests(SimpleTestCase):
    """Test tree construction and evaluation."""

    def setUp(self):
        self.nand = DirectFunctionSpec.nand()
        self.majority = DirectFunctionSpec.majority(3)

    def test_eval_examples(self):
        """Test documented root values."""
        self.assertEqual(eval_tree(self.nand, EvalTree.explicit(2, [1, 1, 1, 1])), 1)
        self.assertEqual(eval_tree(self.nand, EvalTree.explicit(2, [0, 1])), 1)
        self.assertEqual(eval_tree(self.majority, EvalTree.explicit(3, [1, 0, 1])), 1)

    def test_node_values_order(self):
        """Test node values are listed breadth-first."""
        values = node_values(self.nand, EvalTree.explicit(2, [1, 1, 1, 1]))
        np.testing.assert_array_equal(values, [1, 0, 0, 1, 1, 1, 1])

    def test_arity_mismatch(self):
        """Test evaluating a binary tree with a ternary function fails."""
        with self.assertRaises(ArityMismatchError):
            eval_tree(self.majority, EvalTree.explicit(2, [0, 1]))

    def test_invalid_leaves(self):
        """Test wrong leaf counts and non-bits are rejected."""
        with self.assertRaises(InvalidTreeError):
            EvalTree(arity=2, depth=2, leaves=np.array([0, 1, 1]))
        with self.assertRaises(InvalidTreeError):
            EvalTree(arity=2, depth=1, leaves=np.array([0, 2]))
        with self.assertRaises(InvalidTreeError):
            EvalTree(arity=2, depth=1)

    def test_explicit_and_oracle_agree(self):
        """Test evaluation through a leaf oracle matches explicit leaves."""
        rng = np.random.default_rng(3)
        for _ in range(50):
            depth = int(rng.integers(1, 7))
            leaves = rng.integers(2, size=2 ** depth)
            explicit = EvalTree(arity=2, depth=depth, leaves=leaves)
            oracle = ExplicitLeafOracle(2, depth, leaves)
            lazy = EvalTree.from_oracle(oracle)
            self.assertEqual(eval_tree(self.nand, explicit), eval_tree(self.nand, lazy))
            self.assertEqual(oracle.queries, 2 ** depth)

    def test_navigation(self):
        """Test children and parent lookups."""
        tree = EvalTree(arity=3, depth=2, leaves=np.zeros(9, dtype=int))
        self.assertEqual(list(tree.children(0)), [1, 2, 3])
        self.assertEqual(list(tree.children(2)), [7, 8, 9])
        self.assertEqual(tree.parent(9), 2)
        self.assertIsNone(tree.parent(0))
        self.assertEqual(tree.node_count, 13)
        self.assertEqual(tree.internal_count, 4)

    def test_dict_round_trip(self):
        """Test the JSON tree format."""
        tree = EvalTree.explicit(2, [0, 1, 1, 0])
        data = tree.to_dict()
        self.assertEqual(data, {'arity': 2, 'depth': 2, 'leaves': [0, 1, 1, 0]})
        np.testing.assert_array_equal(EvalTree.from_dict(data).leaf_values(), tree.leaf_values())


class AnnotateTests(SimpleTestCase):
    """Test fault annotation and kappa."""

    def setUp(self):
        self.nand = analyze_function(DirectFunctionSpec.nand())
        self.majority = analyze_function(DirectFunctionSpec.majority(3))

    def test_trivial_tree(self):
        """Test the all-ones depth-2 tree has no faults."""
        annotation = annotate(self.nand, EvalTree.explicit(2, [1, 1, 1, 1]))
        self.assertFalse(annotation.fault.any())
        self.assertEqual(annotation.max_kappa, 0)

    def test_single_fault_example(self):
        """Test the (0,1,1,1) tree: fault on the left, root fault through its right child."""
        annotation = annotate(self.nand, EvalTree.explicit(2, [0, 1, 1, 1]))
        np.testing.assert_array_equal(annotation.values[:3], [1, 1, 0])
        np.testing.assert_array_equal(annotation.fault[:3], [True, True, False])
        np.testing.assert_array_equal(annotation.kappa[:3], [1, 1, 0])
        np.testing.assert_array_equal(annotation.strong[0], [False, True])
        self.assertFalse(validate_k_fault(annotation, 0))
        self.assertTrue(validate_k_fault(annotation, 1))

    def test_trivial_trees_have_zero_kappa(self):
        """Test t_{r,n} is fault free."""
        for spec, analysis in ((DirectFunctionSpec.nand(), self.nand),
                               (DirectFunctionSpec.majority(3), self.majority)):
            for r in (0, 1):
                for height in range(5):
                    annotation = annotate(analysis, trivial_tree(spec, r, height))
                    self.assertEqual(annotation.max_kappa, 0)
                    self.assertTrue(validate_k_fault(annotation, 0))

    def test_kappa_matches_brute_force(self):
        """Test annotate against an independent recursion on random trees."""
        rng = np.random.default_rng(2024)
        for trial in range(1000):
            if trial % 2:
                analysis, arity, depth = self.nand, 2, int(rng.integers(1, 7))
            else:
                analysis, arity, depth = self.majority, 3, int(rng.integers(1, 5))
            leaves = rng.integers(2, size=arity ** depth)
            annotation = annotate(analysis, EvalTree(arity=arity, depth=depth, leaves=leaves))
            value, kappa = brute_force_kappa(analysis, leaves, arity)
            self.assertEqual(int(annotation.values[0]), value)
            self.assertEqual(int(annotation.kappa[0]), kappa)

    def test_kappa_below_path_fault_count(self):
        """Test kappa never exceeds the largest number of faults on a path."""
        rng = np.random.default_rng(5)
        for _ in range(200):
            depth = int(rng.integers(1, 7))
            tree = EvalTree(arity=2, depth=depth, leaves=rng.integers(2, size=2 ** depth))
            annotation = annotate(self.nand, tree)
            faults = path_fault_count(annotation)
            self.assertLessEqual(annotation.max_kappa, faults)
            self.assertTrue(validate_k_fault(annotation, faults))

    def test_leaves_and_heights(self):
        """Test leaves are never faults and heights count down to zero."""
        annotation = annotate(self.nand, EvalTree.explicit(2, [0, 1, 1, 0]))
        self.assertFalse(annotation.fault[3:].any())
        np.testing.assert_array_equal(annotation.heights(), [2, 1, 1, 0, 0, 0, 0])

    def test_zero_strong_children(self):
        """Test a classification table without strong children is rejected."""
        broken = analyze_function(DirectFunctionSpec.nand())
        broken.strong = np.zeros_like(broken.strong)
        with self.assertRaises(ZeroStrongChildrenError):
            annotate(broken, EvalTree.explicit(2, [0, 1]))

    def test_random_k_fault_trees(self):
        """Test sampled trees satisfy their fault bound."""
        rng = np.random.default_rng(9)
        for analysis in (self.nand, self.majority):
            for k in range(4):
                for _ in range(10):
                    depth = 6 if analysis.arity == 2 else 4
                    tree = random_k_fault_tree(analysis, depth, k, rng)
                    self.assertTrue(validate_k_fault(annotate(analysis, tree), k))

    def test_random_tree_root_value(self):
        """Test the requested root value is honored."""
        rng = np.random.default_rng(1)
        for r in (0, 1):
            tree = random_k_fault_tree(self.nand, 5, 2, rng, root_value=r)
            self.assertEqual(eval_tree(self.nand.spec, tree), r)


class ComplexityTests(SimpleTestCase):
    """Test the subformula complexity recursion."""

    def setUp(self):
        self.nand = analyze_function(DirectFunctionSpec.nand())
        self.defaults = ComplexityParams.defaults()

    def report(self, tree, params=None, k=None, **kwargs):
        annotation = annotate(self.nand, tree)
        k = annotation.max_kappa if k is None else k
        return complexity_bound(self.nand, annotation, params or self.defaults, k, **kwargs)

    def test_default_constants(self):
        """Test the derived energy constant."""
        self.assertEqual(self.defaults.c1, 1.0)
        self.assertEqual(self.defaults.c2, 1.0)
        self.assertEqual(self.defaults.c_prime, 2.0)
        self.assertAlmostEqual(self.defaults.c_energy, 0.005)

    def test_trivial_tree_without_constants(self):
        """Test z is 1 everywhere when c1 = c2 = 0 on a trivial tree."""
        params = ComplexityParams(c1=0.0, c2=0.0, c_energy=0.01, c_prime=2.0)
        report = self.report(trivial_tree(self.nand.spec, 1, 5), params)
        np.testing.assert_allclose(report.z, 1.0, atol=1e-9)

    def test_unit_constant_estimate(self):
        """Test depth 4, k = 1 with c_energy = 1 gives 32 queries."""
        params = ComplexityParams(c1=1.0, c2=1.0, c_energy=1.0, c_prime=2.0)
        report = self.report(mixed_depth_four(), params, k=1, enforce_smallness=False)
        self.assertAlmostEqual(report.query_estimate, 32.0, places=6)

    def test_smallness_enforced(self):
        """Test constants violating the smallness conditions are rejected."""
        params = ComplexityParams(c1=1.0, c2=1.0, c_energy=1.0, c_prime=2.0)
        with self.assertRaises(InvalidParametersError):
            self.report(mixed_depth_four(), params, k=1)

    def test_ranges_checked_without_smallness(self):
        """Test skipping the smallness check still rejects out-of-range constants."""
        for params in (
            ComplexityParams(c1=1.0, c2=1.0, c_energy=0.0, c_prime=2.0),
            ComplexityParams(c1=1.0, c2=1.0, c_energy=-1.0, c_prime=2.0),
            ComplexityParams(c1=-1.0, c2=1.0, c_energy=1.0, c_prime=2.0),
            ComplexityParams(c1=1.0, c2=1.0, c_energy=1.0, c_prime=0.5),
        ):
            with self.assertRaises(InvalidParametersError):
                self.report(mixed_depth_four(), params, k=1, enforce_smallness=False)

    def test_preconditions(self):
        """Test k below max kappa, depth 0 and unknown estimators are rejected."""
        with self.assertRaises(InvalidParametersError):
            self.report(mixed_depth_four(), k=0)
        with self.assertRaises(InvalidParametersError):
            self.report(EvalTree.explicit(2, [1]), k=0)
        with self.assertRaises(InvalidParametersError):
            self.report(mixed_depth_four(), estimator='exact')

    def test_induction_bound_on_random_trees(self):
        """Test random 2-fault depth-8 trees satisfy the bound at every node."""
        rng = np.random.default_rng(17)
        for _ in range(20):
            tree = random_k_fault_tree(self.nand, 8, 2, rng)
            report = self.report(tree, k=2)
            self.assertEqual(report.violations, [])
            self.assertTrue(np.all(report.z <= report.bound * (1 + 1e-9)))

    def test_fault_increases_root(self):
        """Test a fault at the root raises z(root)."""
        trivial = self.report(trivial_tree(self.nand.spec, 1, 4), k=1)
        faulty = self.report(mixed_depth_four(), k=1)
        self.assertGreaterEqual(faulty.z[0], trivial.z[0])

    def test_linear_growth_without_faults(self):
        """Test z grows at most linearly on trivial trees with c2 = 0."""
        params = ComplexityParams(c1=1.0, c2=0.0, c_energy=0.01, c_prime=2.0)
        for depth in range(1, 9):
            report = self.report(trivial_tree(self.nand.spec, depth % 2, depth), params, k=0)
            self.assertLessEqual(report.z[0], params.c1 * depth + 1 + 1e-9)

    def test_weighted_estimator_is_tighter(self):
        """Test the cost-weighted estimator never exceeds the primary one."""
        rng = np.random.default_rng(23)
        for _ in range(10):
            tree = random_k_fault_tree(self.nand, 6, 2, rng)
            primary = self.report(tree, k=2, estimator=PRIMARY)
            weighted = self.report(tree, k=2, estimator=WEIGHTED)
            self.assertTrue(np.all(weighted.z <= primary.z + 1e-9))

    def test_query_estimate(self):
        """Test n^2 omega^k / c_energy."""
        unit = ComplexityParams(c1=1.0, c2=1.0, c_energy=1.0, c_prime=2.0)
        self.assertAlmostEqual(query_estimate(16, 2, 2.0, unit), 1024.0)
        self.assertAlmostEqual(query_estimate(7, 0, 2.0, unit), 49.0)

    def test_scaling_table(self):
        """Test k = log2 n with omega = 2 scales as n^3."""
        unit = ComplexityParams(c1=1.0, c2=1.0, c_energy=1.0, c_prime=2.0)
        table = query_scaling_table([2, 4, 8, 16], 2.0, unit)
        self.assertEqual(list(table.columns), ['n', 'k', 'query_estimate'])
        np.testing.assert_allclose(table['query_estimate'], table['n'] ** 3)
        self.assertEqual(list(table['k']), [int(math.log2(n)) for n in (2, 4, 8, 16)])

    def test_report_export(self):
        """Test the report JSON carries per-node arrays."""
        report = self.report(mixed_depth_four(), k=1)
        data = report.to_dict()
        self.assertEqual(len(data['z']), 31)
        self.assertEqual(len(data['bound']), 31)
        self.assertEqual(data['estimator'], PRIMARY)
        self.assertAlmostEqual(data['root_z'], float(report.z[0]))


if __name__ == '__main__':
    unittest.main()
