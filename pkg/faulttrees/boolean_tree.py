"""
Complete c-ary evaluation trees: evaluation, fault annotation and the
subformula-complexity recursion.

Nodes are indexed breadth-first. The children of node d are
d*c + 1 .. d*c + c, and depth level L occupies indices
(c^L - 1)/(c - 1) .. (c^(L+1) - 1)/(c - 1) - 1. Both passes run
level by level from the leaves up, so a node's height is depth - level.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from django.core.exceptions import ValidationError

from .exceptions import (
    ArityMismatchError,
    InvalidParametersError,
    InvalidTreeError,
    ZeroStrongChildrenError,
)
from .oracles import LeafOracle
from .span_program import DirectFunctionSpec, FunctionAnalysis, all_inputs, witness_size
from .validators import ParameterValidator

logger = logging.getLogger(__name__)

PRIMARY = 'primary'
WEIGHTED = 'weighted'
BOUND_SLACK = 1e-9


def level_bounds(arity: int, depth: int) -> List[Tuple[int, int]]:
    """(start, stop) index range of every depth level, root level first."""
    bounds = []
    start = 0
    for level in range(depth + 1):
        size = arity ** level
        bounds.append((start, start + size))
        start += size
    return bounds


def _input_weights(arity: int) -> np.ndarray:
    return 2 ** np.arange(arity - 1, -1, -1)


@dataclass
class EvalTree:
    """A complete tree given by explicit leaves or by a leaf oracle."""

    arity: int
    depth: int
    leaves: Optional[np.ndarray] = None
    oracle: Optional[LeafOracle] = None
    _value_cache: Dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.arity < 2 or self.depth < 0:
            raise InvalidTreeError(f"arity {self.arity} / depth {self.depth} out of range")
        if (self.leaves is None) == (self.oracle is None):
            raise InvalidTreeError("exactly one of leaves or oracle must be given")

        if self.leaves is not None:
            leaves = np.asarray(self.leaves, dtype=np.int8).ravel()
            if leaves.size != self.arity ** self.depth:
                raise InvalidTreeError(
                    f"depth {self.depth} needs {self.arity ** self.depth} leaves, got {leaves.size}"
                )
            if np.any((leaves != 0) & (leaves != 1)):
                raise InvalidTreeError("leaf values must be bits")
            self.leaves = leaves
        elif (self.oracle.arity, self.oracle.height) != (self.arity, self.depth):
            raise InvalidTreeError("oracle shape does not match the tree")

    @classmethod
    def explicit(cls, arity: int, leaves: Sequence[int]) -> 'EvalTree':
        count = len(leaves)
        depth = round(math.log(count, arity)) if count > 1 else 0
        return cls(arity=arity, depth=depth, leaves=np.asarray(leaves, dtype=np.int8))

    @classmethod
    def from_oracle(cls, oracle: LeafOracle) -> 'EvalTree':
        return cls(arity=oracle.arity, depth=oracle.height, oracle=oracle)

    @property
    def node_count(self) -> int:
        return (self.arity ** (self.depth + 1) - 1) // (self.arity - 1)

    @property
    def internal_count(self) -> int:
        return self.node_count - self.arity ** self.depth

    def leaf_values(self) -> np.ndarray:
        if self.leaves is None:
            self.leaves = self.oracle.leaf_values(counted=True)
        return self.leaves

    def children(self, node: int) -> range:
        return range(node * self.arity + 1, node * self.arity + self.arity + 1)

    def parent(self, node: int) -> Optional[int]:
        return None if node == 0 else (node - 1) // self.arity

    def to_dict(self) -> Dict:
        return {
            'arity': self.arity,
            'depth': self.depth,
            'leaves': [int(b) for b in self.leaf_values()],
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'EvalTree':
        return cls(arity=int(data['arity']), depth=int(data['depth']),
                   leaves=np.asarray(data['leaves'], dtype=np.int8))


def _check_arity(spec: DirectFunctionSpec, tree: EvalTree) -> None:
    if spec.arity != tree.arity:
        raise ArityMismatchError(spec.arity, tree.arity)


def node_values(spec: DirectFunctionSpec, tree: EvalTree) -> np.ndarray:
    """Value of every node in breadth-first order."""
    _check_arity(spec, tree)
    key = spec.cache_key()
    if key in tree._value_cache:
        return tree._value_cache[key]

    table = np.asarray(spec.truth_table, dtype=np.int8)
    weights = _input_weights(tree.arity)
    current = tree.leaf_values()
    levels = [current]
    for _ in range(tree.depth):
        current = table[current.reshape(-1, tree.arity) @ weights]
        levels.append(current)

    values = np.concatenate(levels[::-1])
    tree._value_cache[key] = values
    return values


def eval_tree(spec: DirectFunctionSpec, tree: EvalTree) -> int:
    """
    Root value by bottom-up application of the function.

    Raises:
        ArityMismatchError: If spec and tree have different arity
    """
    return int(node_values(spec, tree)[0])


@dataclass
class TreeAnnotation:
    """
    Per-node labels of one tree.

    ``values``, ``fault`` and ``kappa`` cover every node; ``strong``,
    ``input_index`` and ``wsize`` cover internal nodes only (leaves have no
    input). Leaves are never faults.
    """

    arity: int
    depth: int
    values: np.ndarray
    fault: np.ndarray
    kappa: np.ndarray
    strong: np.ndarray
    input_index: np.ndarray
    wsize: np.ndarray

    @property
    def internal_count(self) -> int:
        return self.strong.shape[0]

    @property
    def max_kappa(self) -> int:
        return int(self.kappa.max())

    def heights(self) -> np.ndarray:
        return np.concatenate([
            np.full(stop - start, self.depth - level, dtype=int)
            for level, (start, stop) in enumerate(level_bounds(self.arity, self.depth))
        ])

    def to_dict(self) -> Dict:
        return {
            'arity': self.arity,
            'depth': self.depth,
            'max_kappa': self.max_kappa,
            'fault_count': int(self.fault.sum()),
            'values': self.values.tolist(),
            'fault': self.fault.tolist(),
            'kappa': self.kappa.tolist(),
            'strong': self.strong.astype(int).tolist(),
        }


def annotate(analysis: FunctionAnalysis, tree: EvalTree) -> TreeAnnotation:
    """
    Label every node with value, fault flag, strong children and kappa.

    kappa is 0 at leaves, the maximum over strong children at trivial nodes,
    and one more than that at faults; weak children never contribute.

    Raises:
        ZeroStrongChildrenError: If some input has no strong child
    """
    c = tree.arity
    values = node_values(analysis.spec, tree)
    bounds = level_bounds(c, tree.depth)
    weights = _input_weights(c)

    kappa_levels = [np.zeros(c ** tree.depth, dtype=int)]
    fault_levels = [np.zeros(c ** tree.depth, dtype=bool)]
    strong_levels, index_levels = [], []

    for level in range(tree.depth - 1, -1, -1):
        start, stop = bounds[level + 1]
        child_values = values[start:stop].reshape(-1, c)
        idx = child_values @ weights
        strong = analysis.strong[idx]
        fault = ~analysis.trivial[idx]

        masked = np.where(strong, kappa_levels[-1].reshape(-1, c), -1).max(axis=1)
        if np.any(masked < 0):
            row = int(np.flatnonzero(masked < 0)[0])
            raise ZeroStrongChildrenError(bounds[level][0] + row, tuple(child_values[row].tolist()))

        kappa_levels.append(masked + fault.astype(int))
        fault_levels.append(fault)
        strong_levels.append(strong)
        index_levels.append(idx)

    internal_idx = (
        np.concatenate(index_levels[::-1]) if index_levels else np.zeros(0, dtype=int)
    )
    return TreeAnnotation(
        arity=c,
        depth=tree.depth,
        values=values,
        fault=np.concatenate(fault_levels[::-1]),
        kappa=np.concatenate(kappa_levels[::-1]),
        strong=np.concatenate(strong_levels[::-1]) if strong_levels else np.zeros((0, c), dtype=bool),
        input_index=internal_idx,
        wsize=analysis.wsize[internal_idx],
    )


def validate_k_fault(annotation: TreeAnnotation, k: int) -> bool:
    return annotation.max_kappa <= k


def path_fault_count(annotation: TreeAnnotation) -> int:
    """Largest number of faults on any root-to-leaf path."""
    c = annotation.arity
    bounds = level_bounds(c, annotation.depth)
    counts = np.zeros(c ** annotation.depth, dtype=int)
    for level in range(annotation.depth - 1, -1, -1):
        start, stop = bounds[level]
        counts = annotation.fault[start:stop].astype(int) + counts.reshape(-1, c).max(axis=1)
    return int(counts[0])


@dataclass(frozen=True)
class ComplexityParams:
    c1: float
    c2: float
    c_energy: float
    c_prime: float

    @classmethod
    def defaults(
        cls,
        c1: float = 1.0,
        c2: float = 1.0,
        c_prime: float = 2.0,
        c_energy: Optional[float] = None
    ) -> 'ComplexityParams':
        if c_energy is None:
            c_energy = 0.01 * min(1.0, 1.0 / (c2 * c_prime)) if c2 > 0 else 0.01
        return cls(c1=c1, c2=c2, c_energy=c_energy, c_prime=c_prime)

    def check_ranges(self) -> None:
        """
        Raises:
            InvalidParametersError: If a constant lies outside its range
        """
        try:
            ParameterValidator.validate_complexity_constants(self.c1, self.c2, self.c_energy, self.c_prime)
        except ValidationError as e:
            raise InvalidParametersError('complexity constants', self.to_dict(), "; ".join(e.messages))

    def check_smallness(self) -> None:
        """
        Raises:
            InvalidParametersError: If the products c2*c*c' and c'*c are not below 1
        """
        if self.c2 * self.c_energy * self.c_prime >= 1:
            raise InvalidParametersError(
                'c2*c_energy*c_prime', self.c2 * self.c_energy * self.c_prime, "must be below 1"
            )
        if self.c_prime * self.c_energy >= 1:
            raise InvalidParametersError(
                'c_prime*c_energy', self.c_prime * self.c_energy, "must be below 1"
            )

    def to_dict(self) -> Dict:
        return {'c1': self.c1, 'c2': self.c2, 'c_energy': self.c_energy, 'c_prime': self.c_prime}


@dataclass
class ComplexityReport:
    z: np.ndarray
    bound: np.ndarray
    violations: List[int]
    energy: float
    query_estimate: float
    estimator: str
    params: ComplexityParams
    depth: int
    k: int
    omega: float

    def to_dict(self) -> Dict:
        return {
            'estimator': self.estimator,
            'depth': self.depth,
            'k': self.k,
            'omega': self.omega,
            'params': self.params.to_dict(),
            'energy': self.energy,
            'query_estimate': self.query_estimate,
            'root_z': float(self.z[0]),
            'z': self.z.tolist(),
            'bound': self.bound.tolist(),
            'violations': self.violations,
        }


def query_estimate(n: int, k: int, omega: float, params: ComplexityParams) -> float:
    return n ** 2 * omega ** k / params.c_energy


def query_scaling_table(
    n_values: Sequence[int],
    omega: float,
    params: ComplexityParams,
    k_of_n: Callable[[int], int] = None
) -> pd.DataFrame:
    """
    Query estimates over a range of depths.

    With the default k = log2(n) and omega = 2 the estimate grows as n^3.
    """
    if k_of_n is None:
        k_of_n = lambda n: int(round(math.log2(n)))  # noqa: E731
    rows = []
    for n in n_values:
        k = k_of_n(n)
        rows.append({'n': n, 'k': k, 'query_estimate': query_estimate(n, k, omega, params)})
    return pd.DataFrame(rows, columns=['n', 'k', 'query_estimate'])


def complexity_bound(
    analysis: FunctionAnalysis,
    annotation: TreeAnnotation,
    params: ComplexityParams,
    k: int,
    estimator: str = PRIMARY,
    enforce_smallness: bool = True
) -> ComplexityReport:
    """
    Subformula complexity of every node and the matching query estimate.

    z(leaf) = 1 and z = c1 + wsize * max_strong z_j * (1 + c2*|E|*max_j z_j)
    with |E| = c_energy / (n^2 omega^k). The ``weighted`` estimator uses the
    witness size with children's z as costs instead of
    wsize * max_strong z_j. Each node is checked against
    c' * h * omega^kappa * (1 + c2*c_energy*c'/n)^h at height h >= 1 and
    against c' at the leaves.

    Args:
        analysis: Analysis of the tree's function
        annotation: Labels from :func:`annotate`
        params: Recursion constants
        k: Fault bound, at least the tree's largest kappa
        estimator: ``primary`` or ``weighted``
        enforce_smallness: Also require the smallness conditions; ranges
            are always checked

    Raises:
        InvalidParametersError: On bad params, k below max kappa, or depth 0
    """
    if estimator not in (PRIMARY, WEIGHTED):
        raise InvalidParametersError('estimator', estimator, f"must be {PRIMARY} or {WEIGHTED}")
    if annotation.depth < 1:
        raise InvalidParametersError('depth', annotation.depth, "tree needs at least one level")
    if k < annotation.max_kappa:
        raise InvalidParametersError('k', k, f"below the tree's max kappa {annotation.max_kappa}")
    params.check_ranges()
    if enforce_smallness:
        params.check_smallness()

    c = annotation.arity
    n = annotation.depth
    omega = analysis.omega
    energy = params.c_energy / (n ** 2 * omega ** k)
    bounds = level_bounds(c, n)

    z_levels = [np.ones(c ** n)]
    for level in range(n - 1, -1, -1):
        start, stop = bounds[level]
        child_z = z_levels[-1].reshape(-1, c)
        max_all = child_z.max(axis=1)
        growth = 1.0 + params.c2 * energy * max_all

        if estimator == PRIMARY:
            strong = annotation.strong[start:stop]
            max_strong = np.where(strong, child_z, -np.inf).max(axis=1)
            z = params.c1 + annotation.wsize[start:stop] * max_strong * growth
        else:
            inputs = all_inputs(c)
            weighted = np.array([
                witness_size(analysis.program, inputs[idx], costs=row).value
                for idx, row in zip(annotation.input_index[start:stop], child_z)
            ])
            z = params.c1 + weighted * growth
        z_levels.append(z)

    z = np.concatenate(z_levels[::-1])
    heights = annotation.heights()
    ramp = (1.0 + params.c2 * params.c_energy * params.c_prime / n) ** heights
    bound = np.where(
        heights > 0,
        params.c_prime * heights * omega ** annotation.kappa * ramp,
        params.c_prime,
    )
    violations = np.flatnonzero(z > bound * (1 + BOUND_SLACK)).tolist()
    if violations:
        logger.warning(f"{len(violations)} nodes exceed the induction bound")

    return ComplexityReport(
        z=z,
        bound=bound,
        violations=violations,
        energy=energy,
        query_estimate=1.0 / energy,
        estimator=estimator,
        params=params,
        depth=n,
        k=k,
        omega=omega,
    )


def random_k_fault_tree(
    analysis: FunctionAnalysis,
    depth: int,
    k: int,
    rng: np.random.Generator,
    fault_rate: float = 0.5,
    root_value: Optional[int] = None
) -> EvalTree:
    """
    Sample an explicit tree that satisfies the k-fault condition.

    Inputs are chosen top-down. Each node carries a budget q, the largest
    kappa it may reach: a fault spends one unit for its strong children,
    a trivial node passes q on, and weak children restart from k.
    """
    c = analysis.arity
    inputs = all_inputs(c)
    by_value = {
        v: {
            'trivial': [i for i in range(len(inputs)) if analysis.values[i] == v and analysis.trivial[i]],
            'fault': [i for i in range(len(inputs)) if analysis.values[i] == v and not analysis.trivial[i]],
        }
        for v in (0, 1)
    }

    root = int(rng.integers(2)) if root_value is None else int(root_value)
    values = [root]
    budgets = [k]
    for _ in range(depth):
        next_values, next_budgets = [], []
        for value, budget in zip(values, budgets):
            faults = by_value[value]['fault'] if budget >= 1 else []
            is_fault = bool(faults) and rng.random() < fault_rate
            pool = faults if is_fault else by_value[value]['trivial']
            idx = pool[int(rng.integers(len(pool)))]
            strong = analysis.strong[idx]
            for j, bit in enumerate(inputs[idx]):
                next_values.append(bit)
                if strong[j]:
                    next_budgets.append(budget - 1 if is_fault else budget)
                else:
                    next_budgets.append(k)
        values, budgets = next_values, next_budgets

    return EvalTree(arity=c, depth=depth, leaves=np.asarray(values, dtype=np.int8))
