"""
Tests for validators, serializers and the service layer.
"""
import tempfile
import unittest
from pathlib import Path

from django.conf import settings
from django.core.cache import cache
from django.core.exceptions import ValidationError
from django.test import SimpleTestCase, override_settings

from .exceptions import (
    InvalidFunctionSpecError,
    InvalidParametersError,
    InvalidTreeError,
    NonDirectFunctionError,
)
from .serializers import (
    BenchmarkGridSerializer,
    ComplexityParamsSerializer,
    FunctionSpecSerializer,
    HardDistSpecSerializer,
    TreeSerializer,
)
from .services import (
    FunctionAnalysisService,
    complexity_params,
    load_benchmark_grid,
    load_tree,
    manifest_path,
    write_manifest,
)
from .span_program import DirectFunctionSpec
from .utils import PerformanceTimer, format_duration, read_json, stable_hash, stable_uniform
from .validators import ParameterValidator, PathValidator, TreeValidator

NAND_DISTRIBUTION = {'function': {'kind': 'nand'}, 'n': 6, 'strict': False}


class ParameterValidatorTests(SimpleTestCase):
    """Test numeric parameter validation."""

    def test_seed(self):
        """Test seed range."""
        self.assertEqual(ParameterValidator.validate_seed(0), 0)
        self.assertEqual(ParameterValidator.validate_seed(2 ** 64 - 1), 2 ** 64 - 1)
        for seed in (-1, 2 ** 64, True, 1.5):
            with self.assertRaises(ValidationError):
                ParameterValidator.validate_seed(seed)

    def test_energy(self):
        """Test energies must lie in (0, limit]."""
        self.assertEqual(ParameterValidator.validate_energy(0.1, 0.1), 0.1)
        with self.assertRaises(ValidationError):
            ParameterValidator.validate_energy(0.0, 0.1)
        with self.assertRaises(ValidationError):
            ParameterValidator.validate_energy(0.2, 0.1)

    def test_jobs_and_budget(self):
        """Test jobs and budgets."""
        self.assertEqual(ParameterValidator.validate_jobs(1), 1)
        self.assertEqual(ParameterValidator.validate_budget(0), 0)
        with self.assertRaises(ValidationError):
            ParameterValidator.validate_jobs(0)
        with self.assertRaises(ValidationError):
            ParameterValidator.validate_budget(-1)

    def test_complexity_constants_collects_errors(self):
        """Test every violated constant is reported."""
        with self.assertRaises(ValidationError) as ctx:
            ParameterValidator.validate_complexity_constants(-1.0, -1.0, 0.0, 0.5)
        message = ctx.exception.messages[0]
        for name in ('c1', 'c2', 'c_energy', 'c_prime'):
            self.assertIn(name, message)


class TreeValidatorTests(SimpleTestCase):
    """Test tree shape validation."""

    def test_leaves(self):
        """Test leaf counts and bit values."""
        TreeValidator.validate_leaves(2, 2, [0, 1, 1, 0])
        with self.assertRaises(ValidationError):
            TreeValidator.validate_leaves(2, 2, [0, 1, 1])
        with self.assertRaises(ValidationError):
            TreeValidator.validate_leaves(2, 1, [0, 2])

    def test_leaf_path(self):
        """Test path length and digit range."""
        self.assertEqual(TreeValidator.validate_leaf_path([0, 2], 3, 2), (0, 2))
        with self.assertRaises(ValidationError):
            TreeValidator.validate_leaf_path([0], 3, 2)
        with self.assertRaises(ValidationError):
            TreeValidator.validate_leaf_path([0, 3], 3, 2)


class PathValidatorTests(SimpleTestCase):
    """Test file path validation."""

    def test_output_path(self):
        """Test empty paths and directories are rejected."""
        with tempfile.TemporaryDirectory() as tmp:
            self.assertEqual(PathValidator.validate_output_path(f'{tmp}/out.json'), Path(tmp) / 'out.json')
            with self.assertRaises(ValidationError):
                PathValidator.validate_output_path(tmp)
        with self.assertRaises(ValidationError):
            PathValidator.validate_output_path('  ')

    def test_input_file(self):
        """Test missing inputs are rejected."""
        with self.assertRaises(ValidationError):
            PathValidator.validate_input_file('/nonexistent/tree.json')


class SerializerTests(SimpleTestCase):
    """Test input serializers."""

    def test_function_shorthands(self):
        """Test nand and majority expand to threshold kinds."""
        serializer = FunctionSpecSerializer(data={'kind': 'nand'})
        self.assertTrue(serializer.is_valid())
        self.assertEqual(serializer.validated_data, {'arity': 2, 'kind': 'negated_threshold', 'h': 2})

        serializer = FunctionSpecSerializer(data={'kind': 'majority', 'arity': 5})
        self.assertTrue(serializer.is_valid())
        self.assertEqual(serializer.validated_data['h'], 3)

        self.assertFalse(FunctionSpecSerializer(data={'kind': 'majority', 'arity': 4}).is_valid())

    def test_function_errors(self):
        """Test missing arity, bad thresholds and short truth tables."""
        self.assertFalse(FunctionSpecSerializer(data={'kind': 'threshold', 'h': 1}).is_valid())
        self.assertFalse(FunctionSpecSerializer(data={'kind': 'threshold', 'arity': 3, 'h': 4}).is_valid())
        self.assertFalse(FunctionSpecSerializer(data={'kind': 'custom', 'truth_table': [0, 1, 1]}).is_valid())
        self.assertFalse(FunctionSpecSerializer(data={'kind': 'parity'}).is_valid())

    def test_custom_arity_inferred(self):
        """Test custom tables set their arity."""
        serializer = FunctionSpecSerializer(data={'kind': 'custom', 'truth_table': [0, 0, 0, 1]})
        self.assertTrue(serializer.is_valid())
        self.assertEqual(serializer.validated_data['arity'], 2)

    def test_tree(self):
        """Test tree shapes."""
        self.assertTrue(TreeSerializer(data={'arity': 2, 'depth': 1, 'leaves': [0, 1]}).is_valid())
        serializer = TreeSerializer(data={'arity': 2, 'depth': 2, 'leaves': [0, 1]})
        self.assertFalse(serializer.is_valid())
        self.assertIn('non_field_errors', serializer.errors)

    def test_hard_distribution_defaults(self):
        """Test k and strict defaults."""
        serializer = HardDistSpecSerializer(data={'function': {'kind': 'nand'}, 'n': 10})
        self.assertTrue(serializer.is_valid())
        self.assertEqual(serializer.validated_data['k'], 1)
        self.assertTrue(serializer.validated_data['strict'])
        self.assertFalse(HardDistSpecSerializer(data={'function': {'kind': 'nand'}, 'n': 2}).is_valid())

    def test_complexity_params(self):
        """Test constants are validated together."""
        self.assertTrue(ComplexityParamsSerializer(data={'c1': 1, 'c2': 1, 'c_prime': 2}).is_valid())
        self.assertFalse(ComplexityParamsSerializer(data={'c1': 1, 'c2': 1, 'c_prime': 0.5}).is_valid())

    def test_benchmark_grid(self):
        """Test split-search cells need a budget."""
        cell = {'distribution': NAND_DISTRIBUTION, 'algorithm': 'splitsearch', 'budget': 4}
        self.assertTrue(BenchmarkGridSerializer(data={'trials': 2, 'cells': [cell]}).is_valid())
        del cell['budget']
        self.assertFalse(BenchmarkGridSerializer(data={'trials': 2, 'cells': [cell]}).is_valid())
        self.assertFalse(BenchmarkGridSerializer(data={'trials': 2, 'cells': []}).is_valid())

    def test_benchmark_grid_negative_budget(self):
        """Test negative budgets are rejected with the budget validator message."""
        cell = {'distribution': NAND_DISTRIBUTION, 'algorithm': 'shortcircuit', 'budget': -3}
        serializer = BenchmarkGridSerializer(data={'trials': 2, 'cells': [cell]})
        self.assertFalse(serializer.is_valid())
        self.assertIn('nonnegative', str(serializer.errors))


class FunctionAnalysisServiceTests(SimpleTestCase):
    """Test the analysis service."""

    def setUp(self):
        cache.clear()
        self.service = FunctionAnalysisService()

    def test_parse_spec(self):
        """Test a valid description becomes a function spec."""
        spec = self.service.parse_spec({'kind': 'majority'})
        self.assertEqual(spec, DirectFunctionSpec.majority(3))

    def test_parse_errors(self):
        """Test invalid and non-direct descriptions raise configuration errors."""
        with self.assertRaises(InvalidFunctionSpecError):
            self.service.parse_spec({'kind': 'threshold'})
        with self.assertRaises(NonDirectFunctionError):
            self.service.parse_spec({'kind': 'custom', 'truth_table': [0, 1, 1, 0]})

    def test_analysis_cached(self):
        """Test analyses are stored under the canonical key."""
        spec = DirectFunctionSpec.nand()
        analysis = self.service.get_analysis(spec)
        self.assertAlmostEqual(analysis.omega, 2.0, places=6)
        self.assertIsNotNone(cache.get(f'analysis:{spec.cache_key()}'))
        self.assertAlmostEqual(self.service.get_analysis(spec).omega, analysis.omega)

    @override_settings(HARD_DIST_HEIGHT_RATIO=2)
    def test_height_ratio_from_settings(self):
        """Test the strict height ratio follows settings."""
        hard = self.service.build_hard_spec({'function': {'kind': 'nand'}, 'n': 6})
        self.assertEqual(hard.n, 6)
        self.assertTrue(hard.strict)

    def test_strict_rejects_short_blocks(self):
        """Test strict mode needs n >= 4 n0."""
        with self.assertRaises(InvalidParametersError):
            self.service.build_hard_spec({'function': {'kind': 'nand'}, 'n': 5})


class ServiceFunctionTests(SimpleTestCase):
    """Test the service helpers."""

    def setUp(self):
        cache.clear()
        self.service = FunctionAnalysisService()

    def test_complexity_params_defaults(self):
        """Test c_energy defaults to 0.005 with c2 = 1 and c' = 2."""
        params = complexity_params()
        self.assertEqual((params.c1, params.c2, params.c_prime), (1.0, 1.0, 2.0))
        self.assertAlmostEqual(params.c_energy, 0.005)

    def test_complexity_params_overrides(self):
        """Test None overrides keep the settings value."""
        params = complexity_params({'c_energy': 1.0, 'c1': None})
        self.assertEqual(params.c_energy, 1.0)
        self.assertEqual(params.c1, 1.0)

    def test_complexity_params_rejects_out_of_range(self):
        """Test overrides outside their ranges raise a parameter error."""
        with self.assertRaises(InvalidParametersError):
            complexity_params({'c_energy': 0.0})
        with self.assertRaises(InvalidParametersError):
            complexity_params({'c_prime': 0.5})

    def test_load_explicit_tree(self):
        """Test explicit trees load without an oracle."""
        tree, oracle = load_tree({'arity': 2, 'depth': 1, 'leaves': [1, 0]}, self.service)
        self.assertIsNone(oracle)
        self.assertEqual(tree.depth, 1)
        with self.assertRaises(InvalidTreeError):
            load_tree({'arity': 2, 'depth': 2, 'leaves': [1, 0]}, self.service)

    def test_load_drawn_tree(self):
        """Test a distribution reference materializes with its oracle."""
        tree, oracle = load_tree({'distribution': NAND_DISTRIBUTION, 'seed': 4}, self.service)
        self.assertEqual(tree.depth, oracle.height)
        self.assertEqual(oracle.queries, 0)
        with self.assertRaises(InvalidTreeError):
            load_tree({'distribution': NAND_DISTRIBUTION, 'seed': -1}, self.service)

    def test_load_benchmark_grid(self):
        """Test grid cells resolve to hard distributions."""
        cells, trials = load_benchmark_grid({
            'trials': 7,
            'cells': [{'distribution': NAND_DISTRIBUTION, 'algorithm': 'shortcircuit'}],
        }, self.service)
        self.assertEqual(trials, 7)
        self.assertEqual(cells[0].hard.n, 6)
        self.assertIsNone(cells[0].budget)

    def test_manifest(self):
        """Test the manifest sits next to the output."""
        with tempfile.TemporaryDirectory() as tmp:
            out = Path(tmp) / 'run.csv'
            write_manifest(out, 'bench_classical', {'trials': 3}, 11)
            manifest = read_json(manifest_path(out))
        self.assertEqual(manifest['command'], 'bench_classical')
        self.assertEqual(manifest['config'], {'trials': 3})
        self.assertEqual(manifest['seed'], 11)


class UtilsTests(SimpleTestCase):
    """Test hashing, timing and formatting helpers."""

    def test_deterministic(self):
        """Test equal arguments hash equally and tags separate streams."""
        self.assertEqual(stable_hash(1, 'leaf', (0, 1)), stable_hash(1, 'leaf', (0, 1)))
        self.assertNotEqual(stable_hash(1, 'leaf', (0, 1)), stable_hash(1, 'root', (0, 1)))
        value = stable_uniform(3, 'x')
        self.assertGreaterEqual(value, 0.0)
        self.assertLess(value, 1.0)

    def test_format_duration(self):
        """Test seconds and minutes formats."""
        self.assertEqual(format_duration(3.214), '3.21s')
        self.assertEqual(format_duration(125), '2m 05s')

    def test_timer(self):
        """Test the timer records a duration and re-raises failures."""
        with self.assertLogs('faulttrees.utils', level='INFO') as logs:
            with PerformanceTimer('step') as timer:
                pass
        self.assertIsNotNone(timer.duration)
        self.assertRegex(logs.output[-1], r'step completed in \d+\.\d{3}s')

        with self.assertLogs('faulttrees.utils', level='ERROR') as logs:
            with self.assertRaises(ValueError):
                with PerformanceTimer('failing'):
                    raise ValueError('boom')
        self.assertRegex(logs.output[-1], r'failing failed after \d+\.\d{3}s: boom')



class LoggingConfigTests(SimpleTestCase):
    """Test the logging layout."""

    def test_handlers(self):
        """Test the WARNING+ run log and the ERROR+ error log both rotate under logs/."""
        handlers = settings.LOGGING['handlers']
        self.assertEqual(handlers['file']['level'], 'WARNING')
        self.assertEqual(Path(handlers['file']['filename']).name, 'kfault.log')
        self.assertEqual(handlers['error_file']['level'], 'ERROR')
        self.assertEqual(Path(handlers['error_file']['filename']).name, 'errors.log')
        self.assertEqual(set(settings.LOGGING['formatters']), {'verbose', 'simple'})

    def test_app_logger(self):
        """Test the app logger writes to every handler at the configured level."""
        app = settings.LOGGING['loggers']['faulttrees']
        self.assertEqual(app['handlers'], ['console', 'file', 'error_file'])
        self.assertEqual(app['level'], settings.LOG_LEVEL)

if __name__ == '__main__':
    unittest.main()
