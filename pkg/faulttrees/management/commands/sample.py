"""
Management command to draw a tree from the hard distribution T_k.

Writes the distribution summary, optionally the materialized tree, and a
JSON-lines transcript of random leaf queries for replay.
"""
import numpy as np
from django.core.management.base import CommandError

from faulttrees.exceptions import ConfigurationException
from faulttrees.hard_distribution import sample_hard_tree
from faulttrees.management.base import ExperimentCommand
from faulttrees.services import FunctionAnalysisService
from faulttrees.utils import read_json, write_json
from faulttrees.validators import PathValidator


class Command(ExperimentCommand):
    help = 'Sample a tree from the hard distribution'

    def add_experiment_arguments(self, parser):
        self.add_function_arguments(parser)
        parser.add_argument('--distribution', type=str, help='HardDistSpec JSON file (overrides the function flags)')
        parser.add_argument('--n', type=int, help='Per-level height')
        parser.add_argument('--k', type=int, default=1, help='Number of levels (default: 1)')
        parser.add_argument('--no-strict', action='store_true', help='Allow n below the height ratio')
        parser.add_argument('--forced-root', type=int, choices=[0, 1], help='Condition the root value')
        parser.add_argument('--queries', type=int, default=0, help='Random leaf queries to record')
        parser.add_argument('--materialize', action='store_true', help='Include the explicit tree')

    def run(self, options, out):
        analyses = FunctionAnalysisService()
        if options.get('distribution'):
            data = read_json(PathValidator.validate_input_file(options['distribution']))
        elif options.get('n') is not None:
            data = {
                'function': self.function_data(options),
                'n': options['n'],
                'k': options['k'],
                'strict': not options['no_strict'],
            }
        else:
            raise CommandError("Either --distribution or --n is required", returncode=ConfigurationException.exit_code)

        hard = analyses.build_hard_spec(data)
        oracle = sample_hard_tree(hard, options['seed'], options.get('forced_root'))

        rng = np.random.default_rng(options['seed'])
        for _ in range(options['queries']):
            oracle.query(tuple(int(d) for d in rng.integers(hard.arity, size=oracle.height)))

        payload = {'distribution': hard.to_dict(), 'oracle': oracle.summary()}
        if options['materialize']:
            payload['tree'] = oracle.materialize().to_dict()
        write_json(out, payload)

        if options['queries']:
            transcript = out.with_name(out.name + '.transcript.jsonl')
            transcript.write_text(''.join(line + '\n' for line in oracle.transcript_lines()), encoding='utf-8')
            self.stdout.write(f'Transcript: {transcript}')

        self.stdout.write(
            f'n0={hard.n0}, k0={hard.k0}, n_tilde={hard.n_tilde}, beta={hard.beta}, '
            f'root={oracle.root_value}, category={oracle.category(())}'
        )
        return {
            'distribution': {key: hard.to_dict()[key] for key in ('function', 'n', 'k', 'strict')},
            'forced_root': options.get('forced_root'),
            'queries': options['queries'],
            'materialize': options['materialize'],
        }
