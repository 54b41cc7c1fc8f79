"""
Management command to label a tree with fault flags and kappa.
"""
from faulttrees.boolean_tree import annotate, path_fault_count, validate_k_fault
from faulttrees.management.base import ExperimentCommand
from faulttrees.services import FunctionAnalysisService
from faulttrees.utils import write_json


class Command(ExperimentCommand):
    help = 'Annotate a tree with values, faults and kappa'

    def add_experiment_arguments(self, parser):
        self.add_function_arguments(parser)
        self.add_tree_arguments(parser)

    def run(self, options, out):
        analyses = FunctionAnalysisService()
        spec = analyses.parse_spec(self.function_data(options))
        analysis = analyses.get_analysis(spec)
        tree = self.resolve_tree(options, analyses, analysis)

        annotation = annotate(analysis, tree)
        payload = annotation.to_dict()
        payload['k'] = options['k']
        payload['k_fault'] = validate_k_fault(annotation, options['k'])
        payload['path_fault_count'] = path_fault_count(annotation)
        write_json(out, payload)

        self.stdout.write(
            f"max kappa = {annotation.max_kappa}, "
            f"{payload['fault_count']} faults, k-fault for k={options['k']}: {payload['k_fault']}"
        )
        return {
            'function': spec.to_dict(),
            'tree': options.get('tree'),
            'depth': tree.depth,
            'k': options['k'],
            'fault_rate': options['fault_rate'],
        }
