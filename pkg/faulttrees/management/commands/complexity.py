"""
Management command to run the subformula-complexity recursion on a tree
and report the quantum query estimate.
"""
from faulttrees.boolean_tree import PRIMARY, WEIGHTED, annotate, complexity_bound
from faulttrees.management.base import ExperimentCommand
from faulttrees.services import FunctionAnalysisService, complexity_params
from faulttrees.utils import write_json


class Command(ExperimentCommand):
    help = 'Compute subformula complexities and the query estimate'

    def add_experiment_arguments(self, parser):
        self.add_function_arguments(parser)
        self.add_tree_arguments(parser)
        parser.add_argument('--c1', type=float, help='Additive constant')
        parser.add_argument('--c2', type=float, help='Energy coupling constant')
        parser.add_argument('--c-energy', type=float, help='Energy scale c')
        parser.add_argument('--c-prime', type=float, help="Induction constant c'")
        parser.add_argument('--estimator', choices=[PRIMARY, WEIGHTED], default=PRIMARY)
        parser.add_argument(
            '--skip-smallness-check',
            action='store_true',
            help='Report with constants that violate the smallness conditions'
        )

    def run(self, options, out):
        analyses = FunctionAnalysisService()
        spec = analyses.parse_spec(self.function_data(options))
        analysis = analyses.get_analysis(spec)
        tree = self.resolve_tree(options, analyses, analysis)
        params = complexity_params({
            'c1': options.get('c1'),
            'c2': options.get('c2'),
            'c_energy': options.get('c_energy'),
            'c_prime': options.get('c_prime'),
        })

        report = complexity_bound(
            analysis,
            annotate(analysis, tree),
            params,
            options['k'],
            estimator=options['estimator'],
            enforce_smallness=not options['skip_smallness_check'],
        )
        write_json(out, report.to_dict())

        self.stdout.write(f'query_estimate = {report.query_estimate:g}')
        if report.violations:
            self.stdout.write(self.style.WARNING(f'{len(report.violations)} nodes exceed the induction bound'))
        return {
            'function': spec.to_dict(),
            'tree': options.get('tree'),
            'depth': tree.depth,
            'k': options['k'],
            'params': params.to_dict(),
            'estimator': options['estimator'],
            'enforce_smallness': not options['skip_smallness_check'],
        }
