"""
Management command to benchmark classical solvers on hard distributions.

The grid file holds {"trials": T, "cells": [{"distribution": ..., "algorithm":
"shortcircuit" | "splitsearch", "budget": B}, ...]}.
"""
from faulttrees.classical_solver import (
    SPLITSEARCH,
    SUCCESS_LINE,
    fault_level_recovery,
    run_benchmark,
    write_benchmark_csv,
)
from faulttrees.management.base import ExperimentCommand
from faulttrees.services import FunctionAnalysisService, load_benchmark_grid
from faulttrees.utils import read_json, write_json
from faulttrees.validators import PathValidator


class Command(ExperimentCommand):
    help = 'Benchmark classical solvers and write query-vs-success CSV'

    def add_experiment_arguments(self, parser):
        parser.add_argument('--grid', type=str, required=True, help='Benchmark grid JSON file')
        parser.add_argument('--trials', type=int, help='Override the grid trial count')
        parser.add_argument(
            '--recovery',
            action='store_true',
            help='Also measure split-depth recovery for single-level split-search cells'
        )

    def run(self, options, out):
        analyses = FunctionAnalysisService()
        grid_data = read_json(PathValidator.validate_input_file(options['grid']))
        cells, trials = load_benchmark_grid(grid_data, analyses)
        trials = options.get('trials') or trials

        rows = run_benchmark(cells, trials, options['seed'], options['jobs'])
        write_benchmark_csv(rows, out)

        self.stdout.write(self.style.SUCCESS('=' * 60))
        for row in rows:
            line = (
                f'{row.algorithm:<13} n={row.n:<5} k={row.k} budget={row.budget}: '
                f'success {row.success:.3f}, mean queries {row.mean_queries:.1f}'
            )
            if row.success >= SUCCESS_LINE:
                self.stdout.write(self.style.SUCCESS(line + '  [above 2/3]'))
            else:
                self.stdout.write(line)
        self.stdout.write(self.style.SUCCESS('=' * 60))

        if options['recovery']:
            recovery = [
                {'n': cell.hard.n, 'budget': cell.budget,
                 'recovery': fault_level_recovery(cell.hard, cell.budget, trials, options['seed'])}
                for cell in cells
                if cell.algorithm == SPLITSEARCH and cell.hard.k == 1
            ]
            write_json(out.with_name(out.name + '.recovery.json'), {'cells': recovery})

        return {'grid': grid_data, 'trials': trials, 'recovery': options['recovery']}
