"""
Shared plumbing for the experiment commands: common flags, input loading,
error translation and run manifests.
"""
import json
import logging
from pathlib import Path
from typing import Dict

import numpy as np
from django.conf import settings
from django.core.exceptions import ValidationError
from django.core.management.base import BaseCommand, CommandError

from faulttrees.boolean_tree import EvalTree, random_k_fault_tree
from faulttrees.exceptions import ConfigurationException, FaultTreeException, InvalidParametersError
from faulttrees.services import FunctionAnalysisService, load_tree, write_manifest
from faulttrees.span_program import DirectFunctionSpec
from faulttrees.utils import PerformanceTimer, format_duration, read_json, write_json
from faulttrees.validators import ParameterValidator, PathValidator

logger = logging.getLogger(__name__)

FUNCTION_KINDS = ['nand', 'majority', 'threshold', 'negated_threshold', 'custom']


class ExperimentCommand(BaseCommand):
    """
    Base class for reproducible experiment commands.

    Subclasses implement ``add_experiment_arguments`` and ``run``. ``run``
    writes the outputs and returns the resolved config, which ends up in
    ``<out>.manifest.json``.
    """

    def add_arguments(self, parser):
        parser.add_argument('--seed', type=int, default=0, help='Experiment seed (default: 0)')
        parser.add_argument('--out', type=str, required=True, help='Output file')
        parser.add_argument(
            '--jobs',
            type=int,
            default=getattr(settings, 'BENCHMARK_JOBS', 1),
            help='Worker processes for trial-parallel work'
        )
        self.add_experiment_arguments(parser)

    def add_experiment_arguments(self, parser):
        pass

    def run(self, options: Dict, out: Path) -> Dict:
        raise NotImplementedError

    def handle(self, *args, **options):
        try:
            seed = ParameterValidator.validate_seed(options['seed'])
            ParameterValidator.validate_jobs(options['jobs'])
            out = PathValidator.validate_output_path(options['out'])
        except ValidationError as e:
            raise CommandError("; ".join(e.messages), returncode=ConfigurationException.exit_code)

        try:
            with PerformanceTimer(self.command_name) as timer:
                config = self.run(options, out)
        except FaultTreeException as e:
            logger.error(f"{self.command_name} failed: {e.message}")
            self.write_error_report(out, e, seed)
            raise CommandError(e.message, returncode=e.exit_code)
        except ValidationError as e:
            raise CommandError("; ".join(e.messages), returncode=ConfigurationException.exit_code)

        write_manifest(out, self.command_name, config, seed)
        self.stdout.write(self.style.SUCCESS(f"Wrote {out} in {format_duration(timer.duration)}"))

    def write_error_report(self, out: Path, error: FaultTreeException, seed: int) -> Path:
        """Record a failed run as <out>.error.json; details that are not JSON types are stringified."""
        report = json.loads(json.dumps(error.to_dict(), default=str))
        report.update({'command': self.command_name, 'seed': seed})
        return write_json(out.with_name(out.name + '.error.json'), report)

    @property
    def command_name(self) -> str:
        return self.__module__.rsplit('.', 1)[-1]

    # Shared option groups

    @staticmethod
    def add_function_arguments(parser):
        parser.add_argument('--kind', choices=FUNCTION_KINDS, default='nand', help='Function kind (default: nand)')
        parser.add_argument('--arity', type=int, help='Number of inputs')
        parser.add_argument('--h', type=int, help='Threshold for threshold kinds')
        parser.add_argument('--truth-table', type=str, help="Custom truth table as a bit string, e.g. '0001'")
        parser.add_argument('--polarity', type=str, help="Custom polarity as a bit string, 1 for x_j and 0 for not x_j")

    @staticmethod
    def function_data(options: Dict) -> Dict:
        data = {'kind': options['kind']}
        if options.get('arity') is not None:
            data['arity'] = options['arity']
        if options.get('h') is not None:
            data['h'] = options['h']
        if options.get('truth_table'):
            data['truth_table'] = [int(ch) for ch in options['truth_table'] if ch in '01']
        if options.get('polarity'):
            data['polarity'] = [ch == '1' for ch in options['polarity'] if ch in '01']
        return data

    @staticmethod
    def add_tree_arguments(parser):
        parser.add_argument('--tree', type=str, help='Tree JSON file (explicit or drawn from a distribution)')
        parser.add_argument('--depth', type=int, help='Depth of a random k-fault tree when --tree is omitted')
        parser.add_argument('--k', type=int, default=1, help='Fault bound (default: 1)')
        parser.add_argument('--fault-rate', type=float, default=0.5, help='Fault probability in random trees')

    @staticmethod
    def check_sampled_function(stored: DirectFunctionSpec, requested: DirectFunctionSpec) -> None:
        """A drawn tree is only read as the function it was sampled for."""
        if (stored.truth_table, stored.polarity) != (requested.truth_table, requested.polarity):
            raise InvalidParametersError(
                'function', requested.to_dict(), f"tree was sampled for {stored.to_dict()}"
            )

    def resolve_tree(self, options: Dict, analyses: FunctionAnalysisService, analysis) -> EvalTree:
        if options.get('tree'):
            source = PathValidator.validate_input_file(options['tree'])
            tree, oracle = load_tree(read_json(source), analyses)
            if oracle is not None:
                self.check_sampled_function(oracle.hard.spec, analysis.spec)
            return tree
        if options.get('depth') is None:
            raise CommandError("Either --tree or --depth is required", returncode=ConfigurationException.exit_code)
        rng = np.random.default_rng(options['seed'])
        return random_k_fault_tree(analysis, options['depth'], options['k'], rng, options['fault_rate'])
