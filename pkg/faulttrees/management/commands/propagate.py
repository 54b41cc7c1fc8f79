"""
Management command to propagate eigenvalue ratios through a NAND tree.
"""
from django.conf import settings

from faulttrees.management.base import ExperimentCommand
from faulttrees.nand_walk import nand_analysis, propagate_ratios, verify_complexity_rules
from faulttrees.services import FunctionAnalysisService
from faulttrees.utils import write_json
from faulttrees.validators import ParameterValidator


class Command(ExperimentCommand):
    help = 'Propagate walk ratios and check the complexity rules'

    def add_experiment_arguments(self, parser):
        self.add_tree_arguments(parser)
        parser.add_argument(
            '--energy',
            type=float,
            default=getattr(settings, 'WALK_DEFAULT_ENERGY', 1e-6),
            help='Energy E'
        )
        parser.add_argument('--a-leaf', type=float, default=1.0, help='Complexity of value-1 leaves')
        parser.add_argument('--b-leaf', type=float, default=1.0, help='Complexity of value-0 leaves')

    def run(self, options, out):
        limit = getattr(settings, 'WALK_ENERGY_LIMIT', 0.1)
        energy = ParameterValidator.validate_energy(options['energy'], limit)
        tree = self.resolve_tree(options, FunctionAnalysisService(), nand_analysis())

        state = propagate_ratios(tree, energy, options['a_leaf'], options['b_leaf'], limit)
        rules = verify_complexity_rules(tree, energy, limit)
        write_json(out, {'ratios': state.to_dict(), 'rules': rules.to_dict()})

        self.stdout.write(
            f'root y = {state.y[0]:.6e}, root complexity = {state.complexity[0]:.4f}, '
            f'C_fit = {rules.c_fit:.4f}'
        )
        return {
            'tree': options.get('tree'),
            'depth': tree.depth,
            'k': options['k'],
            'fault_rate': options['fault_rate'],
            'energy': energy,
            'a_leaf': options['a_leaf'],
            'b_leaf': options['b_leaf'],
        }
