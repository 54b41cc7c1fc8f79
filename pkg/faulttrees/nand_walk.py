"""
NAND trees as quantum-walk graphs.

Each NAND gate is a Y gadget: the node, its two children and its parent.
For an eigenvector of H = -adjacency with eigenvalue E, the ratio
y = psi(node) / psi(parent) obeys y = -1/(y_1 + y_2 + E), which is the
recursion :func:`propagate_ratios` runs. A pendant leaf has y = -1/E, so
value-0 leaves are present in the graph and value-1 leaves are absent
(y = 0).
"""
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Hashable, Iterable, List, Optional, Tuple

import networkx as nx
import numpy as np
import pandas as pd
from scipy import linalg

from .boolean_tree import EvalTree, annotate, level_bounds, node_values
from .exceptions import (
    ArityMismatchError,
    EnergyOutOfRangeError,
    InvalidParametersError,
    InvalidTreeError,
    ResonanceError,
)
from .span_program import DirectFunctionSpec, FunctionAnalysis, analyze_function

logger = logging.getLogger(__name__)

TAIL = 'z'
ENERGY_LIMIT = 0.1
RESONANCE_TOLERANCE = 1e-12
SUPPORT_TOLERANCE = 1e-9
CLUSTER_TOLERANCE = 1e-9


@lru_cache(maxsize=1)
def nand_analysis() -> FunctionAnalysis:
    return analyze_function(DirectFunctionSpec.nand())


def _check_binary(tree: EvalTree) -> None:
    if tree.arity != 2:
        raise ArityMismatchError(2, tree.arity, 'NAND walk')


@dataclass
class RatioState:
    energy: float
    y: np.ndarray
    complexity: np.ndarray
    sign_value: np.ndarray
    values: np.ndarray

    @property
    def max_complexity(self) -> float:
        return float(self.complexity.max())

    def to_dict(self) -> Dict:
        return {
            'energy': self.energy,
            'root_y': float(self.y[0]),
            'root_complexity': float(self.complexity[0]),
            'max_complexity': self.max_complexity,
            'sign_agreement': bool(np.array_equal(self.sign_value, self.values)),
            'y': self.y.tolist(),
            'complexity': self.complexity.tolist(),
        }


def _run_recursion(tree: EvalTree, energy: float, leaf_y: np.ndarray, checked: bool) -> np.ndarray:
    bounds = level_bounds(2, tree.depth)
    levels = [leaf_y]
    for level in range(tree.depth - 1, -1, -1):
        denominator = levels[-1].reshape(-1, 2).sum(axis=1) + energy
        if checked:
            close = np.abs(denominator) < RESONANCE_TOLERANCE
            if np.any(close):
                row = int(np.flatnonzero(close)[0])
                raise ResonanceError(bounds[level][0] + row, energy, float(denominator[row]))
        with np.errstate(divide='ignore'):
            levels.append(-1.0 / denominator)
    return np.concatenate(levels[::-1])


def ratio_recursion(tree: EvalTree, energy: float) -> np.ndarray:
    """
    Ratios of the graph realization at any energy, without validity checks.

    Present (value-0) leaves start at -1/E and absent (value-1) leaves at 0.
    """
    _check_binary(tree)
    leaves = node_values(DirectFunctionSpec.nand(), tree)[-2 ** tree.depth:]
    with np.errstate(divide='ignore'):
        leaf_y = np.where(leaves == 0, -1.0 / energy, 0.0)
    return _run_recursion(tree, energy, leaf_y, checked=False)


def propagate_ratios(
    tree: EvalTree,
    energy: float,
    a_leaf: float = 1.0,
    b_leaf: float = 1.0,
    limit: float = ENERGY_LIMIT
) -> RatioState:
    """
    Propagate y from the leaves to the root.

    Leaves start at a_leaf*E (value 1) or -1/(b_leaf*E) (value 0). A node
    with y >= 0 has complexity a = y/E, one with y < 0 has b = -1/(yE).

    Raises:
        InvalidParametersError: If E or a leaf coefficient is not positive
        ResonanceError: If a denominator is within 1e-12 of zero
        EnergyOutOfRangeError: If E times the largest complexity exceeds limit
    """
    _check_binary(tree)
    if energy <= 0:
        raise InvalidParametersError('energy', energy, "must be positive")
    if a_leaf < 0 or b_leaf <= 0:
        raise InvalidParametersError('leaf coefficients', (a_leaf, b_leaf), "need a >= 0 and b > 0")

    values = node_values(DirectFunctionSpec.nand(), tree)
    leaves = values[-2 ** tree.depth:]
    leaf_y = np.where(leaves == 1, a_leaf * energy, -1.0 / (b_leaf * energy))
    y = _run_recursion(tree, energy, leaf_y, checked=True)

    positive = y >= 0
    with np.errstate(divide='ignore'):
        complexity = np.where(positive, y / energy, -1.0 / (y * energy))
    max_complexity = float(complexity.max())
    if energy * max_complexity > limit:
        raise EnergyOutOfRangeError(energy, max_complexity, limit)

    return RatioState(
        energy=energy,
        y=y,
        complexity=complexity,
        sign_value=positive.astype(np.int8),
        values=values.astype(np.int8),
    )


@dataclass
class ComplexityRuleReport:
    c_fit: float
    sign_agreement: bool
    root_sign_ok: bool
    root_complexity: float
    max_complexity: float
    max_kappa: int

    def to_dict(self) -> Dict:
        return {
            'c_fit': self.c_fit,
            'sign_agreement': self.sign_agreement,
            'root_sign_ok': self.root_sign_ok,
            'root_complexity': self.root_complexity,
            'max_complexity': self.max_complexity,
            'max_kappa': self.max_kappa,
        }


def verify_complexity_rules(tree: EvalTree, energy: float, limit: float = ENERGY_LIMIT) -> ComplexityRuleReport:
    """
    Check propagated complexities against 2^kappa growth.

    C_fit is the smallest constant with complexity <= C_fit * 2^kappa *
    (height + 1) at every node.
    """
    state = propagate_ratios(tree, energy, limit=limit)
    annotation = annotate(nand_analysis(), tree)
    scale = 2.0 ** annotation.kappa * (annotation.heights() + 1)
    c_fit = float((state.complexity / scale).max())
    report = ComplexityRuleReport(
        c_fit=c_fit,
        sign_agreement=bool(np.array_equal(state.sign_value, state.values)),
        root_sign_ok=bool((state.y[0] < 0) == (state.values[0] == 0)),
        root_complexity=float(state.complexity[0]),
        max_complexity=state.max_complexity,
        max_kappa=annotation.max_kappa,
    )
    if not report.sign_agreement:
        logger.warning(f"Sign classes disagree with node values at E={energy:.3e}")
    return report


def first_order_complexity(tree: EvalTree, energy: float) -> np.ndarray:
    """Richardson extrapolation 2*C(E/2) - C(E) of the node complexities."""
    coarse = propagate_ratios(tree, energy).complexity
    fine = propagate_ratios(tree, energy / 2).complexity
    return 2.0 * fine - coarse


@dataclass
class WalkGraph:
    graph: nx.Graph
    tree: EvalTree
    positions: Dict[Hashable, Optional[int]]

    @property
    def nodes(self) -> List[Hashable]:
        return list(self.graph.nodes)

    def is_valid(self) -> bool:
        return nx.is_tree(self.graph) and nx.is_bipartite(self.graph)

    def write_edgelist(self, path) -> None:
        nx.write_edgelist(self.graph, path, data=False)


def build_walk_graph(tree: EvalTree) -> WalkGraph:
    """
    One node per internal node and per value-0 leaf, plus the tail z on the root.

    Tree nodes keep their breadth-first index as graph label.
    """
    _check_binary(tree)
    if tree.depth < 1:
        raise InvalidTreeError("walk graphs need depth at least 1")

    values = node_values(DirectFunctionSpec.nand(), tree)
    leaf_start = tree.internal_count
    graph = nx.Graph()
    graph.add_edge(TAIL, 0)
    positions: Dict[Hashable, Optional[int]] = {TAIL: None, 0: 0}
    for node in range(tree.internal_count):
        for child in tree.children(node):
            if child >= leaf_start and values[child] == 1:
                continue
            graph.add_edge(node, child)
            positions[child] = child

    logger.debug(f"Walk graph for depth {tree.depth}: {graph.number_of_nodes()} nodes")
    return WalkGraph(graph=graph, tree=tree, positions=positions)


@dataclass
class SpectrumReport:
    nodes: List[Hashable]
    eigenvalues: np.ndarray
    vectors: np.ndarray
    root_support: np.ndarray
    gap: Optional[float]
    max_residual: float

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'eigenvalue': self.eigenvalues, 'root_support': self.root_support})

    def to_dict(self) -> Dict:
        return {
            'nodes': len(self.nodes),
            'gap': self.gap,
            'max_residual': self.max_residual,
            'root_supported': int(self.root_support.sum()),
        }


def _rotate_clusters(eigenvalues: np.ndarray, vectors: np.ndarray, tail: int) -> np.ndarray:
    """Rotate each degenerate eigenspace so at most one vector touches the tail."""
    vectors = vectors.copy()
    start = 0
    count = len(eigenvalues)
    while start < count:
        stop = start + 1
        while stop < count and eigenvalues[stop] - eigenvalues[stop - 1] <= CLUSTER_TOLERANCE:
            stop += 1
        if stop - start > 1:
            block = vectors[:, start:stop]
            weights = block[tail]
            norm = np.linalg.norm(weights)
            if norm > SUPPORT_TOLERANCE:
                first = block @ (weights / norm)
                rest = block @ linalg.null_space(weights[None, :])
                vectors[:, start:stop] = np.column_stack([first, rest])
        start = stop
    return vectors


def hamiltonian_spectrum(walk: WalkGraph) -> SpectrumReport:
    """
    Spectrum of H = -adjacency with root-support flags.

    The gap is the smallest |lambda| above 1e-9 among eigenvectors with
    amplitude above 1e-9 on the tail.
    """
    nodes = walk.nodes
    hamiltonian = -nx.to_numpy_array(walk.graph, nodelist=nodes)
    eigenvalues, vectors = linalg.eigh(hamiltonian)

    tail = nodes.index(TAIL)
    vectors = _rotate_clusters(eigenvalues, vectors, tail)
    root_support = np.abs(vectors[tail]) > SUPPORT_TOLERANCE
    residual = float(np.abs(hamiltonian @ vectors - vectors * eigenvalues).max())

    candidates = np.abs(eigenvalues[root_support])
    candidates = candidates[candidates > SUPPORT_TOLERANCE]
    gap = float(candidates.min()) if candidates.size else None

    return SpectrumReport(
        nodes=nodes,
        eigenvalues=eigenvalues,
        vectors=vectors,
        root_support=root_support,
        gap=gap,
        max_residual=residual,
    )


def eigenvector_ratios(walk: WalkGraph, vector: np.ndarray) -> Dict[int, float]:
    """psi(node) / psi(parent) for every tree node whose parent amplitude is nonzero."""
    index = {node: i for i, node in enumerate(walk.nodes)}
    ratios = {}
    for node in walk.nodes:
        if node == TAIL:
            continue
        parent = TAIL if node == 0 else walk.tree.parent(node)
        denominator = vector[index[parent]]
        if abs(denominator) > SUPPORT_TOLERANCE:
            ratios[node] = float(vector[index[node]] / denominator)
    return ratios


def fit_gap_constant(records: Iterable[Tuple[int, int, Optional[float]]]) -> float:
    """Largest c with gap >= c / (n^2 2^kappa) over (n, kappa, gap) records."""
    scaled = [gap * n ** 2 * 2 ** kappa for n, kappa, gap in records if gap is not None]
    if not scaled:
        raise InvalidParametersError('records', [], "no record has a gap")
    return float(min(scaled))
