"""
Tests for the experiment management commands.
"""
import json
import tempfile
import unittest
from io import StringIO
from pathlib import Path

from django.core.cache import cache
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

MIXED_TREE = {'arity': 2, 'depth': 4, 'leaves': [1] * 8 + [0] * 8}

SMALL_GRID = {
    'trials': 10,
    'cells': [
        {
            'distribution': {'function': {'kind': 'nand'}, 'n': 6, 'strict': False},
            'algorithm': 'shortcircuit',
        },
        {
            'distribution': {'function': {'kind': 'nand'}, 'n': 6, 'strict': False},
            'algorithm': 'splitsearch',
            'budget': 6,
        },
    ],
}


class CommandTestCase(SimpleTestCase):
    """Shared temp directory and command runner."""

    def setUp(self):
        cache.clear()
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def run_command(self, name, *args):
        stdout = StringIO()
        call_command(name, *args, stdout=stdout)
        return stdout.getvalue()

    def write_input(self, name, payload):
        path = self.tmp / name
        path.write_text(json.dumps(payload), encoding='utf-8')
        return str(path)

    def read_json(self, path):
        return json.loads(Path(path).read_text(encoding='utf-8'))

    def assertExitCode(self, code, name, *args):
        with self.assertRaises(CommandError) as ctx:
            self.run_command(name, *args)
        self.assertEqual(ctx.exception.returncode, code)


class AnalyzeCommandTests(CommandTestCase):
    """Test analyze_fn."""

    def test_nand(self):
        """Test NAND reports omega 2 and a manifest."""
        out = self.tmp / 'nand.json'
        output = self.run_command('analyze_fn', '--kind', 'nand', '--out', str(out))
        self.assertIn('omega = 2.000000', output)
        self.assertAlmostEqual(self.read_json(out)['omega'], 2.0, places=6)

        manifest = self.read_json(str(out) + '.manifest.json')
        self.assertEqual(manifest['command'], 'analyze_fn')
        self.assertEqual(manifest['seed'], 0)
        self.assertIn('numpy', manifest['library_versions'])

    def test_non_direct(self):
        """Test XOR exits with the configuration code."""
        self.assertExitCode(
            2, 'analyze_fn', '--kind', 'custom', '--truth-table', '0110', '--out', str(self.tmp / 'xor.json')
        )

    def test_invalid_seed(self):
        """Test a negative seed exits with the configuration code."""
        self.assertExitCode(2, 'analyze_fn', '--seed', '-1', '--out', str(self.tmp / 'x.json'))


class TreeCommandTests(CommandTestCase):
    """Test annotate and complexity."""

    def test_complexity_estimate(self):
        """Test the mixed depth-4 tree with c_energy = 1 estimates 32 queries."""
        tree = self.write_input('tree.json', MIXED_TREE)
        out = self.tmp / 'complexity.json'
        output = self.run_command(
            'complexity', '--tree', tree, '--k', '1', '--c-energy', '1',
            '--skip-smallness-check', '--out', str(out)
        )
        self.assertIn('query_estimate = 32', output)
        self.assertAlmostEqual(self.read_json(out)['query_estimate'], 32.0, places=6)

    def test_bad_constants_with_skipped_smallness(self):
        """Test zero or negative c_energy exits with the configuration code and an error report."""
        for value in ('0', '-1'):
            out = self.tmp / f'bad{value}.json'
            self.assertExitCode(
                2, 'complexity', '--depth', '3', '--k', '1', '--c-energy', value,
                '--skip-smallness-check', '--out', str(out)
            )
            report = self.read_json(str(out) + '.error.json')
            self.assertEqual(report['error'], 'InvalidParametersError')
            self.assertFalse(out.exists())

    def test_annotate(self):
        """Test the root fault is counted and k = 1 holds."""
        tree = self.write_input('tree.json', MIXED_TREE)
        out = self.tmp / 'annotation.json'
        self.run_command('annotate', '--tree', tree, '--k', '1', '--out', str(out))
        payload = self.read_json(out)
        self.assertTrue(payload['k_fault'])
        self.assertEqual(payload['k'], 1)

    def test_sampled_tree_function_must_match(self):
        """Test a drawn NAND tree is refused when another arity-2 function is requested."""
        tree = self.write_input('lazy.json', {'distribution': SMALL_GRID['cells'][0]['distribution'], 'seed': 4})
        self.run_command('annotate', '--tree', tree, '--out', str(self.tmp / 'nand.json'))
        for name in ('annotate', 'complexity'):
            out = self.tmp / f'{name}-or.json'
            self.assertExitCode(
                2, name, '--tree', tree, '--kind', 'threshold', '--arity', '2', '--h', '1', '--out', str(out)
            )
            report = self.read_json(str(out) + '.error.json')
            self.assertEqual(report['details']['parameter'], 'function')

    def test_missing_tree(self):
        """Test omitting both --tree and --depth exits with the configuration code."""
        self.assertExitCode(2, 'annotate', '--out', str(self.tmp / 'a.json'))


class SampleCommandTests(CommandTestCase):
    """Test sample."""

    def test_sample_with_transcript(self):
        """Test the summary, the materialized tree and the transcript."""
        out = self.tmp / 'sample.json'
        self.run_command(
            'sample', '--n', '6', '--no-strict', '--queries', '5', '--materialize',
            '--seed', '3', '--out', str(out)
        )
        payload = self.read_json(out)
        self.assertEqual(payload['distribution']['n'], 6)
        self.assertEqual(len(payload['tree']['leaves']), 2 ** 6)
        lines = Path(str(out) + '.transcript.jsonl').read_text().splitlines()
        self.assertGreaterEqual(len(lines), 1)
        self.assertLessEqual(len(lines), 5)
        self.assertEqual(payload['oracle']['queries'], len(lines))

    def test_same_seed_same_tree(self):
        """Test sampling is deterministic in the seed."""
        first, second = self.tmp / 'a.json', self.tmp / 'b.json'
        for out in (first, second):
            self.run_command('sample', '--n', '6', '--no-strict', '--materialize', '--seed', '9', '--out', str(out))
        self.assertEqual(self.read_json(first)['tree'], self.read_json(second)['tree'])

    def test_gadget_search_failure(self):
        """Test AND has no gadgets, exits with the search code and leaves an error report."""
        out = self.tmp / 'and.json'
        self.assertExitCode(
            3, 'sample', '--kind', 'threshold', '--arity', '2', '--h', '2', '--n', '10', '--out', str(out)
        )
        report = self.read_json(str(out) + '.error.json')
        self.assertEqual(report['error'], 'GadgetSearchError')
        self.assertEqual(report['exit_code'], 3)
        self.assertEqual(report['command'], 'sample')
        self.assertFalse(out.exists())

    def test_missing_distribution(self):
        """Test omitting --distribution and --n exits with the configuration code."""
        self.assertExitCode(2, 'sample', '--out', str(self.tmp / 's.json'))


class BenchmarkCommandTests(CommandTestCase):
    """Test bench_classical."""

    def test_reproducible_csv(self):
        """Test equal seeds write byte-identical CSV files."""
        grid = self.write_input('grid.json', SMALL_GRID)
        first, second = self.tmp / 'a.csv', self.tmp / 'b.csv'
        for out in (first, second):
            self.run_command('bench_classical', '--grid', grid, '--seed', '5', '--jobs', '1', '--out', str(out))
        self.assertEqual(first.read_bytes(), second.read_bytes())
        lines = first.read_text().splitlines()
        self.assertEqual(lines[0], 'algorithm,n,k,trials,budget,success,mean_queries,seed')
        self.assertEqual(len(lines), 3)

    def test_recovery_file(self):
        """Test --recovery writes one entry per split-search cell."""
        grid = self.write_input('grid.json', SMALL_GRID)
        out = self.tmp / 'bench.csv'
        self.run_command('bench_classical', '--grid', grid, '--jobs', '1', '--recovery', '--out', str(out))
        recovery = self.read_json(str(out) + '.recovery.json')
        self.assertEqual(len(recovery['cells']), 1)
        self.assertEqual(recovery['cells'][0]['budget'], 6)

    def test_invalid_grid(self):
        """Test a split-search cell without a budget is rejected."""
        grid = self.write_input('grid.json', {
            'trials': 3,
            'cells': [{'distribution': {'function': {'kind': 'nand'}, 'n': 6, 'strict': False},
                       'algorithm': 'splitsearch'}],
        })
        self.assertExitCode(2, 'bench_classical', '--grid', grid, '--out', str(self.tmp / 'b.csv'))


class WalkCommandTests(CommandTestCase):
    """Test walk_spectrum and propagate."""

    def test_spectrum_outputs(self):
        """Test the spectrum CSV and the edge list."""
        out = self.tmp / 'spectrum.csv'
        self.run_command('walk_spectrum', '--depth', '4', '--k', '1', '--seed', '2', '--out', str(out))
        lines = out.read_text().splitlines()
        self.assertEqual(lines[0], 'eigenvalue,root_support')
        edges = Path(str(out) + '.edges').read_text().splitlines()
        self.assertEqual(len(lines) - 1, len(edges) + 1)

    def test_propagate(self):
        """Test ratios and rules are written for a small energy."""
        tree = self.write_input('tree.json', MIXED_TREE)
        out = self.tmp / 'ratios.json'
        self.run_command('propagate', '--tree', tree, '--out', str(out))
        payload = self.read_json(out)
        self.assertTrue(payload['ratios']['sign_agreement'])
        self.assertAlmostEqual(payload['ratios']['root_complexity'], 4.0, delta=0.01)
        self.assertLessEqual(payload['rules']['c_fit'], 8.0)

    def test_energy_out_of_range(self):
        """Test a large energy on a trivial tree exits with the numeric code."""
        self.assertExitCode(
            4, 'propagate', '--depth', '6', '--k', '0', '--energy', '0.1', '--out', str(self.tmp / 'p.json')
        )

    def test_energy_above_limit(self):
        """Test energies above the validity limit are configuration errors."""
        self.assertExitCode(2, 'propagate', '--depth', '2', '--energy', '0.5', '--out', str(self.tmp / 'p.json'))


if __name__ == '__main__':
    unittest.main()
