"""
Service layer between the management commands and the numerical modules.

Services resolve Django settings into explicit parameters, validate JSON
inputs through the serializers and cache function analyses.
"""
import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from django.conf import settings
from django.core.cache import cache

from .boolean_tree import ComplexityParams, EvalTree
from .classical_solver import BenchmarkCell
from .exceptions import InvalidFunctionSpecError, InvalidParametersError, InvalidTreeError
from .hard_distribution import HardDistSpec, LazyTreeOracle, default_gadgets, sample_hard_tree
from .serializers import (
    BenchmarkGridSerializer,
    ComplexityParamsSerializer,
    FunctionSpecSerializer,
    HardDistSpecSerializer,
    LazyTreeSerializer,
    TreeSerializer,
)
from .span_program import (
    DirectFunctionSpec,
    FunctionAnalysis,
    analyze,
    build_program,
    normalize_trivial,
)
from .utils import PerformanceTimer, library_versions, write_json

logger = logging.getLogger(__name__)


def _errors_to_text(errors) -> str:
    if isinstance(errors, dict):
        return "; ".join(f"{key}: {_errors_to_text(value)}" for key, value in errors.items())
    if isinstance(errors, list):
        return "; ".join(_errors_to_text(e) for e in errors)
    return str(errors)


class FunctionAnalysisService:
    """Builds and caches span-program analyses keyed by the function's canonical form."""

    def __init__(self):
        self.tolerance = getattr(settings, 'WITNESS_TOLERANCE', 1e-9)
        self.trivial_tolerance = getattr(settings, 'TRIVIAL_TOLERANCE', 1e-6)
        self.max_leaf_slots = getattr(settings, 'GADGET_MAX_LEAF_SLOTS', 20)

    def parse_spec(self, data: Dict) -> DirectFunctionSpec:
        """
        Validate a function description.

        Raises:
            InvalidFunctionSpecError: If the description does not validate
        """
        serializer = FunctionSpecSerializer(data=data)
        if not serializer.is_valid():
            raise InvalidFunctionSpecError(_errors_to_text(serializer.errors), data)
        return DirectFunctionSpec.from_dict(dict(serializer.validated_data))

    def get_analysis(self, spec: DirectFunctionSpec) -> FunctionAnalysis:
        cache_key = f"analysis:{spec.cache_key()}"
        cached = cache.get(cache_key)
        if cached is not None:
            logger.debug(f"Cache hit for {cache_key}")
            return cached

        with PerformanceTimer(f"Analysis of {spec.cache_key()}"):
            program = normalize_trivial(build_program(spec, self.tolerance), self.tolerance)
            analysis = analyze(program, self.trivial_tolerance, self.tolerance)
        cache.set(cache_key, analysis, timeout=None)
        return analysis

    def build_hard_spec(self, data: Dict) -> HardDistSpec:
        serializer = HardDistSpecSerializer(data=data)
        if not serializer.is_valid():
            raise InvalidFunctionSpecError(_errors_to_text(serializer.errors), data)
        validated = serializer.validated_data
        spec = DirectFunctionSpec.from_dict(dict(validated['function']))
        analysis = self.get_analysis(spec)

        cache_key = f"gadgets:{spec.cache_key()}:{self.max_leaf_slots}"
        gadgets = cache.get(cache_key)
        if gadgets is None:
            with PerformanceTimer(f"Gadget search for {spec.cache_key()}"):
                gadgets = default_gadgets(analysis, self.max_leaf_slots)
            cache.set(cache_key, gadgets, timeout=None)

        return HardDistSpec(
            analysis=analysis,
            gadgets=gadgets,
            n=validated['n'],
            k=validated['k'],
            strict=validated['strict'],
            height_ratio=getattr(settings, 'HARD_DIST_HEIGHT_RATIO', 4),
        )


def complexity_params(overrides: Optional[Dict] = None) -> ComplexityParams:
    """
    Complexity constants from settings, with command-line overrides.

    Raises:
        InvalidParametersError: If a constant lies outside its range
    """
    values = {
        'c1': getattr(settings, 'COMPLEXITY_C1', 1.0),
        'c2': getattr(settings, 'COMPLEXITY_C2', 1.0),
        'c_prime': getattr(settings, 'COMPLEXITY_C_PRIME', 2.0),
        'c_energy': getattr(settings, 'COMPLEXITY_C_ENERGY', None),
    }
    values.update({key: value for key, value in (overrides or {}).items() if value is not None})

    serializer = ComplexityParamsSerializer(data=values)
    if not serializer.is_valid():
        raise InvalidParametersError('complexity constants', values, _errors_to_text(serializer.errors))
    return ComplexityParams.defaults(**serializer.validated_data)


def load_tree(
    data: Dict,
    analyses: FunctionAnalysisService
) -> Tuple[EvalTree, Optional[LazyTreeOracle]]:
    """
    Read an explicit tree or a tree drawn from a hard distribution.

    Drawn trees are materialized; the oracle is returned alongside.
    """
    if 'distribution' in data:
        serializer = LazyTreeSerializer(data=data)
        if not serializer.is_valid():
            raise InvalidTreeError(_errors_to_text(serializer.errors))
        hard = analyses.build_hard_spec(data['distribution'])
        oracle = sample_hard_tree(hard, serializer.validated_data['seed'],
                                  serializer.validated_data.get('forced_root'))
        return oracle.materialize(), oracle

    serializer = TreeSerializer(data=data)
    if not serializer.is_valid():
        raise InvalidTreeError(_errors_to_text(serializer.errors))
    return EvalTree.from_dict(serializer.validated_data), None


def load_benchmark_grid(data: Dict, analyses: FunctionAnalysisService) -> Tuple[List[BenchmarkCell], int]:
    serializer = BenchmarkGridSerializer(data=data)
    if not serializer.is_valid():
        raise InvalidFunctionSpecError(_errors_to_text(serializer.errors), data)
    cells = []
    for raw, cell in zip(data['cells'], serializer.validated_data['cells']):
        cells.append(BenchmarkCell(
            hard=analyses.build_hard_spec(raw['distribution']),
            algorithm=cell['algorithm'],
            budget=cell.get('budget'),
        ))
    return cells, serializer.validated_data['trials']


def manifest_path(out: Path) -> Path:
    out = Path(out)
    return out.with_name(out.name + '.manifest.json')


def write_manifest(out: Path, command: str, config: Dict, seed: Optional[int]) -> Path:
    """Record what produced ``out``: command, resolved config, seed and library versions."""
    return write_json(manifest_path(out), {
        'command': command,
        'config': config,
        'seed': seed,
        'library_versions': library_versions(),
    })
