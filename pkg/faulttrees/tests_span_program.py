"""
Tests for span programs, witness sizes and function analysis.
"""
import itertools
import unittest

import numpy as np
from django.test import SimpleTestCase
from scipy import linalg

from .exceptions import (
    DegenerateProgramError,
    GenericPositionError,
    InvalidFunctionSpecError,
    NonDirectFunctionError,
    ThresholdRangeError,
)
from .span_program import (
    FALSE_CASE,
    MAX_ARITY,
    TRUE_CASE,
    DirectFunctionSpec,
    SpanProgram,
    _check_generic_position,
    all_inputs,
    analyze,
    analyze_function,
    build_program,
    feasible_branches,
    normalize_trivial,
    sp_evaluate,
    witness_size,
)

SQRT_HALF = 1 / np.sqrt(2)


def threshold_specs():
    for arity in range(2, 6):
        for h in range(1, arity + 1):
            yield DirectFunctionSpec.threshold(arity, h)
            yield DirectFunctionSpec.negated_threshold(arity, h)


class DirectFunctionSpecTests(SimpleTestCase):
    """Test function descriptions."""

    def test_nand_truth_table(self):
        """Test NAND is the negated 2-threshold with negative polarities."""
        spec = DirectFunctionSpec.nand()
        self.assertEqual(spec.truth_table, (1, 1, 1, 0))
        self.assertEqual(spec.polarity, (False, False))
        self.assertTrue(spec.is_nand)
        self.assertEqual(spec.x0, (1, 1))
        self.assertEqual(spec.x1, (0, 0))

    def test_majority(self):
        """Test 3-MAJ truth table."""
        spec = DirectFunctionSpec.majority(3)
        for bits in all_inputs(3):
            self.assertEqual(spec.value(bits), int(sum(bits) >= 2))

    def test_threshold_out_of_range(self):
        """Test thresholds outside 1..arity are rejected."""
        with self.assertRaises(ThresholdRangeError):
            DirectFunctionSpec.threshold(3, 4)
        with self.assertRaises(ThresholdRangeError):
            DirectFunctionSpec.threshold(3, 0)

    def test_non_direct_custom(self):
        """Test XOR admits no direct polarity assignment."""
        with self.assertRaises(NonDirectFunctionError):
            DirectFunctionSpec.custom([0, 1, 1, 0])

    def test_custom_polarity_inferred(self):
        """Test a custom OR table gets positive polarities."""
        spec = DirectFunctionSpec.custom([0, 1, 1, 1])
        self.assertEqual(spec.polarity, (True, True))
        self.assertEqual(spec.label_threshold(), 1)

    def test_bad_arity(self):
        """Test arity bounds."""
        with self.assertRaises(InvalidFunctionSpecError):
            DirectFunctionSpec(arity=1, kind='threshold', h=1)

    def test_dict_round_trip(self):
        """Test to_dict and from_dict agree."""
        spec = DirectFunctionSpec.majority(5)
        self.assertEqual(DirectFunctionSpec.from_dict(spec.to_dict()), spec)


class BuildProgramTests(SimpleTestCase):
    """Test span program construction."""

    def test_nand_program(self):
        """Test NAND is a single row (1, 1) with negated inputs."""
        program = build_program(DirectFunctionSpec.nand())
        np.testing.assert_allclose(program.matrix, [[1.0, 1.0]])
        self.assertEqual(program.polarity, (False, False))

    def test_majority_is_vandermonde(self):
        """Test 3-MAJ gets the 2x3 Vandermonde matrix."""
        program = build_program(DirectFunctionSpec.majority(3))
        np.testing.assert_allclose(program.matrix, [[1, 1, 1], [1, 2, 3]])

    def test_every_threshold_up_to_max_arity_builds(self):
        """Test the generic-position check accepts every threshold spec in range."""
        for arity in range(2, MAX_ARITY + 1):
            for h in range(1, arity + 1):
                program = build_program(DirectFunctionSpec.threshold(arity, h))
                self.assertEqual(program.matrix.shape, (h, arity), (arity, h))

    def test_widest_program_evaluates_extremes(self):
        """Test the largest Vandermonde program accepts x1 and rejects x0."""
        spec = DirectFunctionSpec.threshold(MAX_ARITY, MAX_ARITY)
        program = build_program(spec)
        self.assertEqual(sp_evaluate(program, spec.x1), 1)
        self.assertEqual(sp_evaluate(program, spec.x0), 0)

    def test_generic_position_violation(self):
        """Test repeated nodes are rejected by the column-span check."""
        with self.assertRaises(GenericPositionError):
            _check_generic_position(np.array([[1.0, 1.0, 1.0], [1.0, 2.0, 2.0]]), 1e-9)
        with self.assertRaises(GenericPositionError):
            _check_generic_position(np.array([[1.0, 1.0], [0.0, 2.0]]), 1e-9)

    def test_and_needs_both_columns(self):
        """Test AND evaluates to 0 with one column available."""
        program = build_program(DirectFunctionSpec.threshold(2, 2))
        self.assertEqual(sp_evaluate(program, (1, 0)), 0)
        self.assertEqual(sp_evaluate(program, (1, 1)), 1)

    def test_evaluate_matches_truth_table(self):
        """Test sp_evaluate equals the truth table for every threshold program."""
        for spec in threshold_specs():
            for program in (build_program(spec), normalize_trivial(build_program(spec))):
                for bits in all_inputs(spec.arity):
                    self.assertEqual(sp_evaluate(program, bits), spec.value(bits), (spec, bits))

    def test_evaluate_examples(self):
        """Test documented evaluation examples."""
        nand = build_program(DirectFunctionSpec.nand())
        majority = build_program(DirectFunctionSpec.majority(3))
        self.assertEqual(sp_evaluate(nand, (1, 1)), 0)
        self.assertEqual(sp_evaluate(majority, (1, 1, 0)), 1)
        self.assertEqual(sp_evaluate(majority, (1, 0, 0)), 0)

    def test_or_semantics(self):
        """Test h=1 programs accept any input with an available column."""
        program = build_program(DirectFunctionSpec.threshold(3, 1))
        for bits in all_inputs(3):
            self.assertEqual(sp_evaluate(program, bits), int(any(bits)))


class NormalizeTrivialTests(SimpleTestCase):
    """Test normalization of the target row."""

    def test_nand_row(self):
        """Test NAND's row becomes (1/sqrt2, 1/sqrt2)."""
        program = normalize_trivial(build_program(DirectFunctionSpec.nand()))
        np.testing.assert_allclose(program.matrix, [[SQRT_HALF, SQRT_HALF]], atol=1e-12)
        self.assertTrue(program.normalized)

    def test_idempotent(self):
        """Test normalizing twice changes nothing."""
        once = normalize_trivial(build_program(DirectFunctionSpec.majority(3)))
        twice = normalize_trivial(once)
        np.testing.assert_allclose(once.matrix, twice.matrix, atol=1e-12)

    def test_row_orthogonality_and_trivial_inputs(self):
        """Test r0 is a unit vector orthogonal to the other rows and x0, x1 cost 1."""
        for spec in threshold_specs():
            program = normalize_trivial(build_program(spec))
            r0, rest = program.matrix[0], program.matrix[1:]
            self.assertAlmostEqual(float(np.linalg.norm(r0)), 1.0, delta=1e-9)
            if rest.shape[0]:
                self.assertLessEqual(float(np.abs(rest @ r0).max()), 1e-9)
            self.assertAlmostEqual(witness_size(program, spec.x0).value, 1.0, delta=1e-9)
            self.assertAlmostEqual(witness_size(program, spec.x1).value, 1.0, delta=1e-9)

    def test_degenerate(self):
        """Test r0 inside the span of the other rows is rejected."""
        program = SpanProgram(matrix=np.array([[1.0, 1.0], [1.0, 1.0]]), polarity=(True, True))
        with self.assertRaises(DegenerateProgramError):
            normalize_trivial(program)


class WitnessSizeTests(SimpleTestCase):
    """Test witness sizes."""

    def setUp(self):
        self.nand = normalize_trivial(build_program(DirectFunctionSpec.nand()))
        self.majority = normalize_trivial(build_program(DirectFunctionSpec.majority(3)))

    def test_nand_trivial_input(self):
        """Test x1 = (0, 0) has witness r0 and size 1."""
        report = witness_size(self.nand, (0, 0))
        self.assertEqual(report.branch, TRUE_CASE)
        self.assertAlmostEqual(report.value, 1.0, delta=1e-9)
        np.testing.assert_allclose(report.witness, [SQRT_HALF, SQRT_HALF], atol=1e-9)

    def test_nand_fault_input(self):
        """Test (0, 1) has witness size 2."""
        self.assertAlmostEqual(witness_size(self.nand, (0, 1)).value, 2.0, delta=1e-9)
        self.assertAlmostEqual(witness_size(self.nand, (1, 0)).value, 2.0, delta=1e-9)

    def test_weak_cost_ignored(self):
        """Test raising the weak input's cost leaves the size at 2."""
        self.assertAlmostEqual(witness_size(self.nand, (0, 1), costs=(1, 17)).value, 2.0, delta=1e-9)

    def test_contributions_sum_to_value(self):
        """Test per-coordinate contributions add up to the witness size."""
        report = witness_size(self.majority, (1, 1, 1), costs=(1.0, 2.0, 3.0))
        self.assertAlmostEqual(float(report.contributions.sum()), report.value, delta=1e-9)

    def test_constraints_hold(self):
        """Test witnesses satisfy their branch's linear constraints."""
        for spec in threshold_specs():
            program = normalize_trivial(build_program(spec))
            matrix = program.matrix
            for bits in all_inputs(spec.arity):
                report = witness_size(program, bits)
                available = program.available(bits)
                if report.branch == TRUE_CASE:
                    np.testing.assert_allclose(matrix @ report.witness, program.target, atol=1e-9)
                    self.assertTrue(np.all(np.abs(report.witness[~available]) <= 1e-12))
                else:
                    self.assertTrue(np.all(np.abs(report.witness[available]) <= 1e-9))
                    coefficients = np.linalg.lstsq(matrix.T, report.witness, rcond=None)[0]
                    self.assertAlmostEqual(float(coefficients[0]), 1.0, delta=1e-9)
                    np.testing.assert_allclose(matrix.T @ coefficients, report.witness, atol=1e-9)

    def test_exactly_one_branch_feasible(self):
        """Test one witness branch is feasible per input and it matches sp_evaluate."""
        for spec in threshold_specs():
            program = normalize_trivial(build_program(spec))
            for bits in all_inputs(spec.arity):
                branches = feasible_branches(program, bits)
                self.assertNotEqual(branches[TRUE_CASE], branches[FALSE_CASE], (spec, bits))
                self.assertEqual(branches[TRUE_CASE], bool(sp_evaluate(program, bits)))

    def test_weak_cost_independence(self):
        """Test changing only weak costs never changes the witness size."""
        rng = np.random.default_rng(7)
        specs = [DirectFunctionSpec.nand(), DirectFunctionSpec.majority(3), DirectFunctionSpec.threshold(4, 2)]
        for _ in range(300):
            spec = specs[int(rng.integers(len(specs)))]
            program = normalize_trivial(build_program(spec))
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

    def test_cost_monotonicity(self):
        """Test raising costs pointwise never lowers the witness size."""
        rng = np.random.default_rng(11)
        program = self.majority
        for bits in all_inputs(3):
            for _ in range(20):
                costs = rng.uniform(0.0, 3.0, size=3)
                raised = costs + rng.uniform(0.0, 2.0, size=3)
                self.assertLessEqual(
                    witness_size(program, bits, costs).value,
                    witness_size(program, bits, raised).value + 1e-9,
                )

    def test_grid_minimizer(self):
        """Test the optimum against a dense scan of the one-dimensional feasible line."""
        program = self.majority
        costs = np.array([1.0, 2.5, 0.7])
        report = witness_size(program, (1, 1, 1), costs)

        particular = np.linalg.lstsq(program.matrix, program.target, rcond=None)[0]
        direction = linalg.null_space(program.matrix)[:, 0]
        steps = np.linspace(-10, 10, 400001)
        candidates = particular[None, :] + steps[:, None] * direction[None, :]
        best = float((candidates ** 2 @ costs).min())
        self.assertAlmostEqual(report.value, best, delta=1e-6)

    def test_bad_costs(self):
        """Test negative costs and wrong lengths are rejected."""
        with self.assertRaises(InvalidFunctionSpecError):
            witness_size(self.nand, (0, 1), costs=(1, -1))
        with self.assertRaises(InvalidFunctionSpecError):
            witness_size(self.nand, (0, 1, 1))


class AnalyzeTests(SimpleTestCase):
    """Test function analysis."""

    def test_nand_analysis(self):
        """Test NAND has omega 2, faults on mixed inputs and a strong 0-valued child."""
        analysis = analyze_function(DirectFunctionSpec.nand())
        self.assertAlmostEqual(analysis.omega, 2.0, delta=1e-9)
        self.assertTrue(analysis.profile((0, 0)).trivial)
        self.assertTrue(analysis.profile((1, 1)).trivial)
        self.assertFalse(analysis.profile((0, 1)).trivial)
        self.assertFalse(analysis.profile((1, 0)).trivial)
        self.assertEqual(analysis.profile((0, 1)).strong, (True, False))
        self.assertEqual(analysis.profile((1, 0)).strong, (False, True))
        self.assertEqual(analysis.profile((1, 1)).strong, (True, True))

    def test_majority_analysis(self):
        """Test 3-MAJ classification is consistent with its witness sizes."""
        analysis = analyze_function(DirectFunctionSpec.majority(3))
        self.assertGreaterEqual(analysis.omega, 1.0)
        self.assertTrue(analysis.profile((0, 0, 0)).trivial)
        self.assertTrue(analysis.profile((1, 1, 1)).trivial)
        for bits in all_inputs(3):
            profile = analysis.profile(bits)
            self.assertEqual(profile.value, int(sum(bits) >= 2))
            self.assertEqual(profile.trivial, abs(profile.wsize - 1) <= 1e-6)
            self.assertGreaterEqual(sum(profile.strong), 1)

    def test_witness_size_at_least_one(self):
        """Test no input of a normalized threshold program has witness size below 1."""
        for spec in threshold_specs():
            analysis = analyze_function(spec)
            self.assertTrue(np.all(analysis.wsize >= 1 - 1e-6), spec)

    def test_lookup_arrays(self):
        """Test the lookup arrays follow truth-table order."""
        analysis = analyze_function(DirectFunctionSpec.nand())
        np.testing.assert_array_equal(analysis.values, [1, 1, 1, 0])
        np.testing.assert_array_equal(analysis.trivial, [True, False, False, True])
        self.assertEqual(analysis.strong.shape, (4, 2))

    def test_analyze_without_spec(self):
        """Test a bare program gets its function from sp_evaluate."""
        program = normalize_trivial(build_program(DirectFunctionSpec.nand()))
        program.spec = None
        analysis = analyze(program)
        self.assertEqual(analysis.spec.truth_table, (1, 1, 1, 0))
        self.assertAlmostEqual(analysis.omega, 2.0, delta=1e-9)

    def test_to_dict(self):
        """Test the analysis export lists every input."""
        data = analyze_function(DirectFunctionSpec.majority(3)).to_dict()
        self.assertEqual(len(data['inputs']), 8)
        self.assertEqual(data['function']['kind'], 'threshold')
        self.assertEqual(
            [entry['input'] for entry in data['inputs']],
            [list(bits) for bits in itertools.product((0, 1), repeat=3)],
        )


if __name__ == '__main__':
    unittest.main()
