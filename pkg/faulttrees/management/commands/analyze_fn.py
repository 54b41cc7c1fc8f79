"""
Management command to build, normalize and analyze the span program of a
direct function.
"""
from faulttrees.management.base import ExperimentCommand
from faulttrees.services import FunctionAnalysisService
from faulttrees.utils import write_json


class Command(ExperimentCommand):
    help = 'Analyze the span program of a direct boolean function'

    def add_experiment_arguments(self, parser):
        self.add_function_arguments(parser)

    def run(self, options, out):
        analyses = FunctionAnalysisService()
        spec = analyses.parse_spec(self.function_data(options))
        analysis = analyses.get_analysis(spec)

        write_json(out, analysis.to_dict())

        faults = int((~analysis.trivial).sum())
        self.stdout.write(f'omega = {analysis.omega:.6f}')
        self.stdout.write(f'Fault inputs: {faults} of {len(analysis.trivial)}')
        return {'function': spec.to_dict()}
