"""
Hard input distributions for k-fault trees.

A T_1 block of height n with root value r and category i is the trivial
tree t_{r,i}, a gadget tree from G_v hung under every depth-i node of value
v, and trivial trees t_{v, n - n0 - i} under every gadget leaf. T_k stacks
k such blocks: the root value of a lower block is the value of the leaf it
replaces.

Trees are never built in full. :class:`LazyTreeOracle` resolves one leaf by
walking its path, and every random choice is a hash of (seed, tag, path), so
values do not depend on query order.
"""
import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from django.core.exceptions import ValidationError
from scipy.optimize import linprog

from .boolean_tree import EvalTree, annotate
from .exceptions import (
    EmptyPosteriorError,
    GadgetSearchError,
    InconsistentObservationError,
    InvalidParametersError,
    InvalidTreeError,
    MalformedPathError,
)
from .oracles import LeafOracle, Path
from .span_program import DirectFunctionSpec, FunctionAnalysis, analyze_function
from .utils import stable_hash, stable_uniform
from .validators import TreeValidator

logger = logging.getLogger(__name__)

HEIGHT_RATIO = 4
MAX_LEAF_SLOTS = 20
MAX_MATERIALIZED_LEAVES = 2 ** 20
RATIONAL_DENOMINATOR = 10 ** 6


def trivial_tree(spec: DirectFunctionSpec, r: int, height: int) -> EvalTree:
    """
    The all-trivial tree t_{r,height}.

    A node of value v has children x^v, and x1 is the complement of x0, so
    child j of v is v XOR x0_j and a leaf is r XOR the x0-parity of its path.
    """
    if height < 0:
        raise InvalidParametersError('height', height, "must be nonnegative")
    x0 = np.asarray(spec.x0, dtype=np.int8)
    values = np.array([int(r)], dtype=np.int8)
    for _ in range(height):
        values = (values[:, None] ^ x0[None, :]).ravel()
    return EvalTree(arity=spec.arity, depth=height, leaves=values)


@dataclass
class GadgetDistribution:
    """
    For each root value r, weighted depth-``height`` trees with root value r.

    ``trees[r]`` is a list of (leaves, weight) with exact Fraction weights.
    """

    arity: int
    height: int
    fault_bound: int
    trees: Dict[int, List[Tuple[Tuple[int, ...], Fraction]]]
    _cumulative: Dict[int, np.ndarray] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for r in (0, 1):
            weights = [float(w) for _, w in self.trees[r]]
            self._cumulative[r] = np.cumsum(weights)

    def choose(self, r: int, u: float) -> int:
        """Index of the tree drawn by a uniform u in [0, 1)."""
        cumulative = self._cumulative[r]
        return min(int(np.searchsorted(cumulative, u, side='right')), len(cumulative) - 1)

    def leaves(self, r: int, index: int) -> Tuple[int, ...]:
        return self.trees[r][index][0]

    def leaf_marginals(self, r: int) -> List[Fraction]:
        slots = self.arity ** self.height
        return [
            sum((w for leaves, w in self.trees[r] if leaves[s] == 1), Fraction(0))
            for s in range(slots)
        ]

    def verify(self, analysis: FunctionAnalysis) -> List[str]:
        """Problems with the distribution; empty when it is valid."""
        problems = []
        for r in (0, 1):
            total = sum((w for _, w in self.trees[r]), Fraction(0))
            if total != 1:
                problems.append(f"G_{r} weights sum to {total}")
            for s, marginal in enumerate(self.leaf_marginals(r)):
                if marginal != Fraction(1, 2):
                    problems.append(f"G_{r} leaf {s} has marginal {marginal}")
            for leaves, _ in self.trees[r]:
                tree = EvalTree(arity=self.arity, depth=self.height, leaves=np.asarray(leaves))
                annotation = annotate(analysis, tree)
                if int(annotation.values[0]) != r:
                    problems.append(f"G_{r} member {leaves} has root value {annotation.values[0]}")
                if annotation.max_kappa > self.fault_bound:
                    problems.append(f"G_{r} member {leaves} has kappa {annotation.max_kappa}")
        return problems

    def to_dict(self) -> Dict:
        return {
            'arity': self.arity,
            'height': self.height,
            'fault_bound': self.fault_bound,
            'trees': {
                str(r): [
                    {'leaves': list(leaves), 'weight': f"{w.numerator}/{w.denominator}"}
                    for leaves, w in self.trees[r]
                ]
                for r in (0, 1)
            },
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'GadgetDistribution':
        trees = {
            r: [
                (tuple(int(b) for b in entry['leaves']), Fraction(entry['weight']))
                for entry in data['trees'][str(r)]
            ]
            for r in (0, 1)
        }
        return cls(
            arity=int(data['arity']),
            height=int(data['height']),
            fault_bound=int(data['fault_bound']),
            trees=trees,
        )


def _nand_gadgets() -> GadgetDistribution:
    half = Fraction(1, 2)
    return GadgetDistribution(
        arity=2,
        height=2,
        fault_bound=1,
        trees={
            1: [((1, 1, 0, 0), half), ((0, 0, 1, 1), half)],
            0: [((0, 1, 1, 0), half), ((1, 0, 0, 1), half)],
        },
    )


def _batch_root_and_kappa(analysis: FunctionAnalysis, labelings: np.ndarray, height: int):
    """Root value and root kappa of many depth-``height`` trees at once."""
    c = analysis.arity
    weights = 2 ** np.arange(c - 1, -1, -1)
    table = analysis.values
    values = labelings
    kappa = np.zeros_like(labelings, dtype=np.int64)
    for _ in range(height):
        batch, width = values.shape
        grouped = values.reshape(batch, width // c, c)
        idx = grouped @ weights
        strong = analysis.strong[idx]
        fault = ~analysis.trivial[idx]
        child_kappa = kappa.reshape(batch, width // c, c)
        kappa = np.where(strong, child_kappa, -1).max(axis=2) + fault
        values = table[idx]
    return values[:, 0], kappa[:, 0]


def _complement_pair(candidates: np.ndarray) -> Optional[List[Tuple[Tuple[int, ...], Fraction]]]:
    members = {tuple(row.tolist()) for row in candidates}
    for leaves in sorted(members):
        complement = tuple(1 - b for b in leaves)
        if complement in members and complement != leaves:
            return [(leaves, Fraction(1, 2)), (complement, Fraction(1, 2))]
    return None


def _uniform_mixture(candidates: np.ndarray) -> Optional[List[Tuple[Tuple[int, ...], Fraction]]]:
    """Vertex of {x >= 0, sum x = 1, every leaf marginal = 1/2}, made exact."""
    count, slots = candidates.shape
    a_eq = np.vstack([candidates.T.astype(float), np.ones((1, count))])
    b_eq = np.concatenate([np.full(slots, 0.5), [1.0]])
    result = linprog(np.zeros(count), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method='highs-ds')
    if not result.success:
        return None

    mixture = []
    for row, x in zip(candidates, result.x):
        weight = Fraction(float(x)).limit_denominator(RATIONAL_DENOMINATOR)
        if weight > 0:
            mixture.append((tuple(int(b) for b in row), weight))

    if sum((w for _, w in mixture), Fraction(0)) != 1:
        return None
    for s in range(slots):
        if sum((w for leaves, w in mixture if leaves[s] == 1), Fraction(0)) != Fraction(1, 2):
            return None
    return mixture


def default_gadgets(
    analysis: FunctionAnalysis,
    max_leaf_slots: int = MAX_LEAF_SLOTS
) -> GadgetDistribution:
    """
    Gadget distributions G_0 and G_1 for the analyzed function.

    NAND uses the fixed depth-2 pairs. Any other function is searched
    exhaustively over all labelings of depth n0 trees with
    c^n0 <= max_leaf_slots, smallest (n0, k0) first. For each candidate pool
    an exact complement pair is tried before a linear program for uniform
    leaf marginals.

    Raises:
        GadgetSearchError: If no distribution exists within the bounds
    """
    spec = analysis.spec
    if spec.is_nand:
        return _nand_gadgets()

    c = spec.arity
    max_height = 0
    height = 1
    while c ** height <= max_leaf_slots:
        max_height = height
        slots = c ** height
        labelings = np.array(list(itertools.product((0, 1), repeat=slots)), dtype=np.int64)
        roots, kappas = _batch_root_and_kappa(analysis, labelings, height)

        for fault_bound in range(height + 1):
            trees = {}
            for r in (0, 1):
                pool = labelings[(roots == r) & (kappas <= fault_bound)]
                if len(pool) == 0:
                    break
                trees[r] = _complement_pair(pool) or _uniform_mixture(pool)
                if trees[r] is None:
                    break
            else:
                gadgets = GadgetDistribution(arity=c, height=height, fault_bound=fault_bound, trees=trees)
                logger.info(
                    f"Found gadgets for {spec.cache_key()}: n0={height}, k0={fault_bound}, "
                    f"{len(trees[0])}+{len(trees[1])} members"
                )
                return gadgets
        height += 1

    raise GadgetSearchError(c, max_height, max_leaf_slots)


@dataclass
class HardDistSpec:
    """
    Parameters of T_k: function, gadgets, per-level height n and level count k.

    With ``strict`` the per-level height must be at least
    ``height_ratio`` times the gadget height.
    """

    analysis: FunctionAnalysis
    gadgets: GadgetDistribution
    n: int
    k: int = 1
    strict: bool = True
    height_ratio: int = HEIGHT_RATIO

    def __post_init__(self):
        if self.gadgets.arity != self.analysis.arity:
            raise InvalidParametersError('gadgets.arity', self.gadgets.arity, "differs from the function arity")
        if self.k < 1:
            raise InvalidParametersError('k', self.k, "must be at least 1")
        if self.n - self.n0 <= 1:
            raise InvalidParametersError('n', self.n, f"n - n0 must exceed 1 (n0={self.n0})")
        if self.strict and self.n < self.height_ratio * self.n0:
            raise InvalidParametersError(
                'n', self.n, f"must be at least {self.height_ratio}*n0 = {self.height_ratio * self.n0}"
            )
        self.x0 = np.asarray(self.spec.x0, dtype=np.int64)

    @classmethod
    def build(
        cls,
        spec: DirectFunctionSpec,
        n: int,
        k: int = 1,
        strict: bool = True,
        max_leaf_slots: int = MAX_LEAF_SLOTS
    ) -> 'HardDistSpec':
        analysis = analyze_function(spec)
        return cls(analysis=analysis, gadgets=default_gadgets(analysis, max_leaf_slots), n=n, k=k, strict=strict)

    @property
    def spec(self) -> DirectFunctionSpec:
        return self.analysis.spec

    @property
    def arity(self) -> int:
        return self.analysis.arity

    @property
    def n0(self) -> int:
        return self.gadgets.height

    @property
    def k0(self) -> int:
        return self.gadgets.fault_bound

    @property
    def n_tilde(self) -> int:
        return self.n - self.n0

    @property
    def beta(self) -> int:
        return int(math.floor(math.log2(self.n_tilde) / 10))

    @property
    def total_height(self) -> int:
        return self.k * self.n

    def parity(self, digits: Sequence[int]) -> int:
        """x0-parity of a digit sequence: the XOR a trivial descent applies."""
        if len(digits) == 0:
            return 0
        return int(self.x0[np.asarray(digits, dtype=np.int64)].sum() % 2)

    def to_dict(self) -> Dict:
        return {
            'function': self.spec.to_dict(),
            'gadgets': self.gadgets.to_dict(),
            'n': self.n,
            'k': self.k,
            'strict': self.strict,
            'n0': self.n0,
            'k0': self.k0,
            'n_tilde': self.n_tilde,
            'beta': self.beta,
        }


def _slot_index(digits: Sequence[int], arity: int) -> int:
    index = 0
    for d in digits:
        index = index * arity + int(d)
    return index


class LazyTreeOracle(LeafOracle):
    """A T_k tree sampled on demand; see the module docstring."""

    def __init__(self, hard: HardDistSpec, seed: int, forced_root: Optional[int] = None):
        super().__init__(hard.arity, hard.total_height)
        if forced_root not in (None, 0, 1):
            raise InvalidParametersError('forced_root', forced_root, "must be 0, 1 or omitted")
        self.hard = hard
        self.seed = int(seed)
        self.forced_root = forced_root
        self._categories: Dict[Path, int] = {}
        self._gadget_draws: Dict[Path, int] = {}

    @property
    def root_value(self) -> int:
        if self.forced_root is not None:
            return int(self.forced_root)
        return stable_hash(self.seed, 'root') % 2

    def category(self, prefix: Sequence[int] = ()) -> int:
        """Category of the block whose root sits at ``prefix``."""
        prefix = tuple(int(d) for d in prefix)
        n = self.hard.n
        if len(prefix) % n or len(prefix) >= self.height:
            raise MalformedPathError(prefix, f"block prefixes have length 0, {n}, ..., {self.height - n}")
        if prefix not in self._categories:
            level = len(prefix) // n
            draw = stable_hash(self.seed, 'category', (level,) + prefix)
            self._categories[prefix] = 1 + draw % self.hard.n_tilde
        return self._categories[prefix]

    def gadget_choice(self, gadget_root: Path, value: int) -> int:
        if gadget_root not in self._gadget_draws:
            u = stable_uniform(self.seed, 'gadget', gadget_root)
            self._gadget_draws[gadget_root] = self.hard.gadgets.choose(value, u)
        return self._gadget_draws[gadget_root]

    def _descend_block(self, value: int, path: Path, base: int, category: int) -> int:
        hard = self.hard
        split = base + category
        value ^= hard.parity(path[base:split])
        choice = self.gadget_choice(path[:split], value)
        leaves = hard.gadgets.leaves(value, choice)
        value = leaves[_slot_index(path[split:split + hard.n0], hard.arity)]
        return value ^ hard.parity(path[split + hard.n0:base + hard.n])

    def _resolve(self, path: Path) -> int:
        value = self.root_value
        for level in range(self.hard.k):
            base = level * self.hard.n
            value = self._descend_block(value, path, base, self.category(path[:base]))
        return int(value)

    def materialize(self) -> EvalTree:
        """The explicit tree, without counting queries."""
        if self.leaf_count > MAX_MATERIALIZED_LEAVES:
            raise InvalidParametersError('leaf_count', self.leaf_count, f"exceeds {MAX_MATERIALIZED_LEAVES}")
        return EvalTree(arity=self.arity, depth=self.height, leaves=self.leaf_values(counted=False))

    def summary(self) -> Dict:
        return {
            'seed': self.seed,
            'root_value': self.root_value,
            'top_category': self.category(()),
            'height': self.height,
            'queries': self.queries,
        }


def sample_hard_tree(hard: HardDistSpec, seed: int, forced_root: Optional[int] = None) -> LazyTreeOracle:
    return LazyTreeOracle(hard, seed, forced_root)


class PosteriorTracker:
    """
    Exact category posterior of one T_1 block.

    ``p[i - 1, r]`` is the probability that a tree of category i and root
    value r agrees with every observation so far. Observations in different
    gadgets are independent, so a new leaf b with longest common prefix h
    against the history multiplies p(i, r) by:

    - 1/2 when i > h (b sits in a gadget no earlier leaf touched);
    - 1 or 0 when i + n0 <= h (b shares a gadget leaf with the history);
    - an exact sum over gadget draws when i <= h < i + n0.
    """

    def __init__(self, hard: HardDistSpec):
        self.hard = hard
        self.n = hard.n
        self.p = np.ones((hard.n_tilde, 2))
        self.history: List[Tuple[Path, int]] = []
        self._observed: Dict[Path, int] = {}
        self._rows: List[np.ndarray] = []
        self._tail_parity: List[np.ndarray] = []
        self._categories = np.arange(1, hard.n_tilde + 1)

    def _validate(self, path: Sequence[int]) -> Path:
        path = tuple(int(d) for d in path)
        try:
            return TreeValidator.validate_leaf_path(path, self.hard.arity, self.n)
        except ValidationError as e:
            raise MalformedPathError(path, "; ".join(e.messages))

    def _suffix_parities(self, path: Path) -> np.ndarray:
        """parities[a] is the x0-parity of path[a:]."""
        bits = self.hard.x0[np.asarray(path, dtype=np.int64)]
        tail = np.concatenate([np.cumsum(bits[::-1])[::-1], [0]])
        return tail % 2

    def _prefix_lengths(self, path: Path) -> np.ndarray:
        rows = np.asarray(self._rows)
        agree = rows == np.asarray(path)
        return np.cumprod(agree, axis=1).sum(axis=1)

    def _gadget_predictive(self, category: int, r: int, path: Path, parities: np.ndarray, lcp: np.ndarray) -> float:
        hard = self.hard
        split = category + hard.n0
        value = r ^ hard.parity(path[:category])
        slot = _slot_index(path[category:split], hard.arity)
        group = np.flatnonzero(lcp >= category)

        total = 0.0
        ones = 0.0
        for leaves, weight in hard.gadgets.trees[value]:
            consistent = all(
                (leaves[_slot_index(self._rows[g][category:split], hard.arity)]
                 ^ int(self._tail_parity[g][split])) == self.history[g][1]
                for g in group
            )
            if consistent:
                total += float(weight)
                if leaves[slot] ^ int(parities[split]) == 1:
                    ones += float(weight)
        return ones / total if total > 0 else 0.5

    def observation_model(self, path: Sequence[int]) -> np.ndarray:
        """P(leaf = 1 | category, root, history) as an (n_tilde, 2) array."""
        path = self._validate(path)
        if path in self._observed:
            return np.full(self.p.shape, float(self._observed[path]))

        model = np.full(self.p.shape, 0.5)
        if not self.history:
            return model

        parities = self._suffix_parities(path)
        lcp = self._prefix_lengths(path)
        nearest = int(np.argmax(lcp))
        h = int(lcp[nearest])

        predicted = self.history[nearest][1] ^ int(self._tail_parity[nearest][h]) ^ int(parities[h])
        model[self._categories + self.hard.n0 <= h] = predicted

        for category in range(max(1, h - self.hard.n0 + 1), min(h, self.hard.n_tilde) + 1):
            for r in (0, 1):
                model[category - 1, r] = self._gadget_predictive(category, r, path, parities, lcp)
        return model

    def update(self, path: Sequence[int], observed: int) -> 'PosteriorTracker':
        """
        Condition on one more observed leaf.

        Raises:
            InconsistentObservationError: If no (category, root) survives;
                the tracker is left unchanged
        """
        path = self._validate(path)
        observed = int(observed)
        if path in self._observed:
            if self._observed[path] != observed:
                raise InconsistentObservationError(path, observed)
            return self

        model = self.observation_model(path)
        updated = self.p * (model if observed else 1.0 - model)
        if updated.sum() <= 0:
            raise InconsistentObservationError(path, observed)

        self.p = updated
        self.history.append((path, observed))
        self._observed[path] = observed
        self._rows.append(np.asarray(path, dtype=np.int64))
        self._tail_parity.append(self._suffix_parities(path))
        return self

    @property
    def total(self) -> float:
        return float(self.p.sum())

    @property
    def spread(self) -> float:
        """D: the summed gap between the two root values per category."""
        return float(np.abs(self.p[:, 0] - self.p[:, 1]).sum())

    def confidence(self) -> float:
        total = self.total
        if total <= 0:
            raise EmptyPosteriorError()
        return abs(float(self.p[:, 0].sum() - self.p[:, 1].sum())) / total

    def confidence_bound(self) -> float:
        total = self.total
        if total <= 0:
            raise EmptyPosteriorError()
        return self.spread / total

    def predictive(self, path: Sequence[int]) -> float:
        return float((self.p * self.observation_model(path)).sum() / self.total)

    def root_posterior(self) -> np.ndarray:
        return self.p.sum(axis=0) / self.total

    def category_posterior(self) -> np.ndarray:
        return self.p.sum(axis=1) / self.total

    def best_guess(self, rng: Optional[np.random.Generator] = None) -> int:
        posterior = self.root_posterior()
        if np.isclose(posterior[0], posterior[1], rtol=0, atol=1e-12):
            return int(rng.integers(2)) if rng is not None else 0
        return int(np.argmax(posterior))

    def to_dict(self) -> Dict:
        return {
            'observations': len(self.history),
            'S': self.total,
            'D': self.spread,
            'confidence': self.confidence(),
            'root_posterior': self.root_posterior().tolist(),
        }


def posterior_update(
    tracker: PosteriorTracker,
    leaf_path: Sequence[int],
    observed: int
) -> PosteriorTracker:
    return tracker.update(leaf_path, observed)


def confidence(tracker: PosteriorTracker) -> float:
    return tracker.confidence()


def tree_likelihood(p_root: np.ndarray, leaf_values: Sequence[int]) -> float:
    """
    Product over leaves a of p_root[a, v(a)].

    This composes per-block posteriors across levels: ``p_root[a]`` holds
    the block probabilities for root values 0 and 1 of the block at leaf a.
    """
    p_root = np.asarray(p_root, dtype=float)
    values = np.asarray(leaf_values, dtype=np.int64)
    if p_root.shape != (len(values), 2):
        raise InvalidTreeError(f"p_root must have shape ({len(values)}, 2)")
    return float(np.prod(p_root[np.arange(len(values)), values]))
