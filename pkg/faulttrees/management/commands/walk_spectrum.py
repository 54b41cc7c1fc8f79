"""
Management command to build the NAND walk graph of a tree and diagonalize
its Hamiltonian.

Writes the spectrum CSV to --out and the graph as an edge list next to it.
"""
from faulttrees.boolean_tree import annotate
from faulttrees.management.base import ExperimentCommand
from faulttrees.nand_walk import build_walk_graph, hamiltonian_spectrum, nand_analysis
from faulttrees.services import FunctionAnalysisService
from faulttrees.utils import PerformanceTimer


class Command(ExperimentCommand):
    help = 'Spectrum of the NAND walk Hamiltonian'

    def add_experiment_arguments(self, parser):
        self.add_tree_arguments(parser)

    def run(self, options, out):
        analysis = nand_analysis()
        tree = self.resolve_tree(options, FunctionAnalysisService(), analysis)
        walk = build_walk_graph(tree)

        with PerformanceTimer(f'Diagonalizing {walk.graph.number_of_nodes()} nodes'):
            spectrum = hamiltonian_spectrum(walk)

        out.parent.mkdir(parents=True, exist_ok=True)
        spectrum.to_frame().to_csv(out, index=False)
        walk.write_edgelist(out.with_name(out.name + '.edges'))

        kappa = annotate(analysis, tree).max_kappa
        self.stdout.write(
            f'{len(spectrum.eigenvalues)} eigenvalues, gap = {spectrum.gap}, '
            f'max residual {spectrum.max_residual:.2e}'
        )
        return {
            'tree': options.get('tree'),
            'depth': tree.depth,
            'k': options['k'],
            'fault_rate': options['fault_rate'],
            'max_kappa': kappa,
            'spectrum': spectrum.to_dict(),
        }
