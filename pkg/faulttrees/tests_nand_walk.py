"""
Tests for NAND-tree ratio propagation and walk-graph spectra.
"""
import math
import tempfile
import unittest
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from .boolean_tree import EvalTree, annotate, random_k_fault_tree
from .exceptions import (
    ArityMismatchError,
    EnergyOutOfRangeError,
    InvalidParametersError,
    InvalidTreeError,
    ResonanceError,
)
from .nand_walk import (
    TAIL,
    build_walk_graph,
    eigenvector_ratios,
    first_order_complexity,
    fit_gap_constant,
    hamiltonian_spectrum,
    nand_analysis,
    propagate_ratios,
    ratio_recursion,
    verify_complexity_rules,
)

SMALL_ENERGY = 1e-6


def all_trivial(root: int, depth: int) -> EvalTree:
    leaf = root if depth % 2 == 0 else 1 - root
    return EvalTree.explicit(2, [leaf] * 2 ** depth)


class PropagateRatiosTests(SimpleTestCase):
    """Test ratio propagation on small trees."""

    def test_depth_one_examples(self):
        """Test the root ratio for each pair of leaf values."""
        e = 0.01
        state = propagate_ratios(EvalTree.explicit(2, [0, 0]), e)
        self.assertAlmostEqual(state.y[0], e / (2 - e ** 2), places=12)

        state = propagate_ratios(EvalTree.explicit(2, [1, 1]), e)
        self.assertAlmostEqual(state.y[0], -1 / (3 * e), places=8)
        self.assertAlmostEqual(state.complexity[0], 3.0, places=9)

        state = propagate_ratios(EvalTree.explicit(2, [1, 0]), e)
        self.assertAlmostEqual(state.y[0], e / (1 - 2 * e ** 2), places=12)

    def test_signs_follow_values(self):
        """Test positive ratios mark value-1 nodes."""
        state = propagate_ratios(EvalTree.explicit(2, [0, 1, 1, 1]), SMALL_ENERGY)
        np.testing.assert_array_equal(state.sign_value, state.values)
        self.assertTrue(state.to_dict()['sign_agreement'])

    def test_resonance(self):
        """Test a vanishing denominator is reported."""
        with self.assertRaises(ResonanceError):
            propagate_ratios(EvalTree.explicit(2, [0, 0]), math.sqrt(2), limit=10)

    def test_energy_out_of_range(self):
        """Test E times the complexity must stay below the limit."""
        with self.assertRaises(EnergyOutOfRangeError):
            propagate_ratios(EvalTree.explicit(2, [1, 1]), 0.5)

    def test_invalid_parameters(self):
        """Test nonpositive energies and leaf coefficients are rejected."""
        tree = EvalTree.explicit(2, [0, 1])
        with self.assertRaises(InvalidParametersError):
            propagate_ratios(tree, 0.0)
        with self.assertRaises(InvalidParametersError):
            propagate_ratios(tree, SMALL_ENERGY, b_leaf=0.0)

    def test_arity_mismatch(self):
        """Test ternary trees are rejected."""
        with self.assertRaises(ArityMismatchError):
            propagate_ratios(EvalTree.explicit(3, [0, 1, 1]), SMALL_ENERGY)

    def test_trivial_trees_stay_linear(self):
        """Test fault-free trees keep complexity within depth + 2."""
        for depth in range(1, 9):
            for root in (0, 1):
                state = propagate_ratios(all_trivial(root, depth), SMALL_ENERGY)
                self.assertLessEqual(state.max_complexity, depth + 2 + 1e-3)
        self.assertAlmostEqual(propagate_ratios(all_trivial(1, 4), SMALL_ENERGY).complexity[0], 2.0, places=4)
        self.assertAlmostEqual(propagate_ratios(all_trivial(0, 4), SMALL_ENERGY).complexity[0], 3.0, places=4)

    def test_one_fault_doubles_complexity(self):
        """Test a fault at the root doubles its complexity against the trivial tree."""
        mixed = EvalTree.explicit(2, [1] * 8 + [0] * 8)
        faulty = propagate_ratios(mixed, SMALL_ENERGY).complexity[0]
        trivial = propagate_ratios(all_trivial(1, 4), SMALL_ENERGY).complexity[0]
        self.assertAlmostEqual(faulty / trivial, 2.0, delta=0.05)

    def test_ratio_recursion_matches_unit_leaves(self):
        """Test the graph recursion equals propagation with a = 0 and b = 1."""
        tree = EvalTree.explicit(2, [0, 1, 1, 0, 0, 0, 1, 1])
        state = propagate_ratios(tree, SMALL_ENERGY, a_leaf=0.0, b_leaf=1.0)
        np.testing.assert_allclose(ratio_recursion(tree, SMALL_ENERGY), state.y, rtol=1e-12)


class ComplexityRuleTests(SimpleTestCase):
    """Test the 2^kappa growth checks."""

    def test_random_trees(self):
        """Test sign agreement and a bounded fit constant on random k-fault trees."""
        rng = np.random.default_rng(12)
        analysis = nand_analysis()
        for _ in range(200):
            depth = int(rng.integers(1, 9))
            k = int(rng.integers(0, 3))
            tree = random_k_fault_tree(analysis, depth, k, rng)
            report = verify_complexity_rules(tree, SMALL_ENERGY)
            self.assertTrue(report.sign_agreement)
            self.assertTrue(report.root_sign_ok)
            self.assertLessEqual(report.c_fit, 8.0)
            self.assertLessEqual(report.max_kappa, k)

    def test_first_order_agrees(self):
        """Test Richardson extrapolation stays within 5% of the direct value."""
        rng = np.random.default_rng(4)
        tree = random_k_fault_tree(nand_analysis(), 6, 2, rng)
        direct = propagate_ratios(tree, SMALL_ENERGY).complexity
        np.testing.assert_allclose(first_order_complexity(tree, SMALL_ENERGY), direct, rtol=0.05)


class WalkGraphTests(SimpleTestCase):
    """Test graph realization."""

    def test_depth_one(self):
        """Test two present leaves, the root and the tail."""
        walk = build_walk_graph(EvalTree.explicit(2, [0, 0]))
        self.assertEqual(walk.graph.number_of_nodes(), 4)
        self.assertEqual(walk.graph.number_of_edges(), 3)
        self.assertIn(TAIL, walk.nodes)
        self.assertTrue(walk.is_valid())

    def test_depth_two(self):
        """Test value-1 leaves are dropped."""
        present = build_walk_graph(EvalTree.explicit(2, [0, 0, 0, 0]))
        self.assertEqual(present.graph.number_of_nodes(), 8)
        self.assertEqual(present.graph.number_of_edges(), 7)
        absent = build_walk_graph(EvalTree.explicit(2, [1, 1, 1, 1]))
        self.assertEqual(absent.graph.number_of_nodes(), 4)
        self.assertTrue(absent.is_valid())

    def test_invalid_trees(self):
        """Test non-binary and depth-0 trees are rejected."""
        with self.assertRaises(ArityMismatchError):
            build_walk_graph(EvalTree.explicit(3, [0, 0, 0]))
        with self.assertRaises(InvalidTreeError):
            build_walk_graph(EvalTree.explicit(2, [0]))

    def test_edgelist(self):
        """Test the edge list has one line per edge."""
        walk = build_walk_graph(EvalTree.explicit(2, [0, 1, 0, 0]))
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'walk.edges'
            walk.write_edgelist(path)
            lines = path.read_text().splitlines()
        self.assertEqual(len(lines), walk.graph.number_of_edges())


class SpectrumTests(SimpleTestCase):
    """Test Hamiltonian spectra."""

    def test_star(self):
        """Test the depth-1 all-present graph is a three-leaf star."""
        report = hamiltonian_spectrum(build_walk_graph(EvalTree.explicit(2, [0, 0])))
        root3 = math.sqrt(3)
        np.testing.assert_allclose(report.eigenvalues, [-root3, 0.0, 0.0, root3], atol=1e-9)
        self.assertAlmostEqual(report.gap, root3, places=9)
        self.assertEqual(int(report.root_support.sum()), 3)
        self.assertLessEqual(report.max_residual, 1e-8)

    def test_bipartite_symmetry(self):
        """Test the spectrum is symmetric about zero."""
        rng = np.random.default_rng(3)
        tree = random_k_fault_tree(nand_analysis(), 5, 1, rng)
        report = hamiltonian_spectrum(build_walk_graph(tree))
        np.testing.assert_allclose(np.sort(report.eigenvalues), np.sort(-report.eigenvalues), atol=1e-8)
        self.assertLessEqual(report.max_residual, 1e-8)
        self.assertEqual(len(report.to_frame()), len(report.nodes))

    def test_eigenvector_matches_recursion(self):
        """Test the lowest eigenvector's ratios follow the recursion at its eigenvalue."""
        tree = EvalTree.explicit(2, [0, 1, 0, 0, 1, 0, 0, 0])
        walk = build_walk_graph(tree)
        report = hamiltonian_spectrum(walk)
        energy = float(report.eigenvalues[0])
        ratios = eigenvector_ratios(walk, report.vectors[:, 0])
        expected = ratio_recursion(tree, energy)
        self.assertEqual(len(ratios), len(walk.nodes) - 1)
        for node, value in ratios.items():
            self.assertAlmostEqual(value, expected[node], places=7)
        self.assertAlmostEqual(ratios[0], -energy, places=7)

    def test_gap_fit(self):
        """Test a positive gap constant across sizes and fault counts."""
        rng = np.random.default_rng(21)
        analysis = nand_analysis()
        records = []
        for n in range(2, 9):
            for k in range(0, 4):
                tree = random_k_fault_tree(analysis, n, k, rng)
                kappa = annotate(analysis, tree).max_kappa
                records.append((n, kappa, hamiltonian_spectrum(build_walk_graph(tree)).gap))
        self.assertGreater(fit_gap_constant(records), 0.01)

    def test_empty_fit(self):
        """Test fitting without any gap raises."""
        with self.assertRaises(InvalidParametersError):
            fit_gap_constant([])
        with self.assertRaises(InvalidParametersError):
            fit_gap_constant([(3, 0, None)])


if __name__ == '__main__':
    unittest.main()
