"""
Classical baselines with exact query accounting.

Both solvers read leaves only through a :class:`LeafOracle`, so the query
count of a run is the oracle counter delta.
"""
import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path as FilePath
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from django.core.exceptions import ValidationError

from .exceptions import InconsistentObservationError, InvalidParametersError
from .hard_distribution import HardDistSpec, PosteriorTracker, sample_hard_tree
from .oracles import LeafOracle, Path
from .span_program import DirectFunctionSpec
from .validators import ParameterValidator

logger = logging.getLogger(__name__)

SHORTCIRCUIT = 'shortcircuit'
SPLITSEARCH = 'splitsearch'
SUCCESS_LINE = 2 / 3
CONCENTRATED = 1 - 1e-12
BENCHMARK_COLUMNS = ['algorithm', 'n', 'k', 'trials', 'budget', 'success', 'mean_queries', 'seed']


@dataclass
class SolveResult:
    answer: int
    queries: int
    confidence_trace: List[Tuple[int, float, float]] = field(default_factory=list)
    exhausted: bool = False
    category: Optional[int] = None

    def to_dict(self) -> Dict:
        return {
            'answer': self.answer,
            'queries': self.queries,
            'exhausted': self.exhausted,
            'category': self.category,
            'confidence_trace': [list(step) for step in self.confidence_trace],
        }


class _BudgetExhausted(Exception):
    pass


def _forced_output(spec: DirectFunctionSpec, known: Dict[int, int], cache: Dict) -> Optional[int]:
    """The function value if the known children already fix it, else None."""
    key = tuple(sorted(known.items()))
    if key not in cache:
        free = [j for j in range(spec.arity) if j not in known]
        outputs = set()
        for fill in itertools.product((0, 1), repeat=len(free)):
            bits = dict(known)
            bits.update(zip(free, fill))
            outputs.add(spec.value([bits[j] for j in range(spec.arity)]))
            if len(outputs) > 1:
                break
        cache[key] = outputs.pop() if len(outputs) == 1 else None
    return cache[key]


def solve_shortcircuit(
    spec: DirectFunctionSpec,
    oracle: LeafOracle,
    rng: Optional[np.random.Generator] = None,
    budget: Optional[int] = None
) -> SolveResult:
    """
    Randomized short-circuit evaluation.

    Children are evaluated in a random order (left to right when ``rng`` is
    None) and a node stops as soon as its known children force its value.
    Without a budget the answer is always the true root value. When a budget
    runs out the answer is a coin flip and the result is flagged exhausted.
    """
    if spec.arity != oracle.arity:
        raise InvalidParametersError('arity', oracle.arity, f"oracle arity differs from {spec.arity}")
    start = oracle.queries
    cache: Dict = {}

    def evaluate(prefix: Path) -> int:
        if len(prefix) == oracle.height:
            if budget is not None and not oracle.known(prefix) and oracle.queries - start >= budget:
                raise _BudgetExhausted()
            return oracle.query(prefix)

        order = range(spec.arity) if rng is None else rng.permutation(spec.arity)
        known: Dict[int, int] = {}
        for j in order:
            known[int(j)] = evaluate(prefix + (int(j),))
            forced = _forced_output(spec, known, cache)
            if forced is not None:
                return forced
        return spec.value([known[j] for j in range(spec.arity)])

    try:
        answer = evaluate(())
        exhausted = False
    except _BudgetExhausted:
        answer = int(rng.integers(2)) if rng is not None else 0
        exhausted = True
        logger.debug(f"Short-circuit budget {budget} exhausted")

    return SolveResult(answer=int(answer), queries=oracle.queries - start, exhausted=exhausted)


def _binary_entropy(p: np.ndarray) -> np.ndarray:
    p = np.clip(p, 1e-15, 1 - 1e-15)
    return -(p * np.log2(p) + (1 - p) * np.log2(1 - p))


def _information_gain(tracker: PosteriorTracker, path: Path) -> float:
    """Mutual information between the next observation and (category, root)."""
    weights = tracker.p / tracker.total
    model = tracker.observation_model(path)
    predictive = float((weights * model).sum())
    return float(_binary_entropy(np.array(predictive)) - (weights * _binary_entropy(model)).sum())


def _fresh_leaf(
    tracker: PosteriorTracker,
    depth: int,
    rng: np.random.Generator
) -> Optional[Path]:
    """
    A leaf whose longest common prefix with the history is exactly ``depth``.

    The leaf branches off an observed leaf at ``depth`` into the leftmost
    sibling subtree that holds no observation; the remaining digits are
    random.
    """
    n = tracker.n
    c = tracker.hard.arity
    occupied = {path[:depth + 1] for path, _ in tracker.history}
    for path, _ in tracker.history:
        for digit in range(c):
            if digit == path[depth]:
                continue
            branch = path[:depth] + (digit,)
            if branch not in occupied:
                suffix = tuple(int(d) for d in rng.integers(c, size=n - depth - 1))
                return branch + suffix
    return None


def _median_category(tracker: PosteriorTracker) -> int:
    cumulative = np.cumsum(tracker.category_posterior())
    return int(np.searchsorted(cumulative, 0.5 - 1e-12)) + 1


class SplitSearch:
    """
    Noisy bisection on the split depth of T_1 blocks.

    Each probe branches off an observed leaf at a chosen depth h. Categories
    i <= h - n0 predict the probe deterministically and categories i > h
    see a fair coin, so the posterior median of the category marginal sets
    the bisection depth h = n0 + median. Probes at h in [i, i + n0) land in
    the gadget of category i and separate the two root values. Each step
    takes whichever of these candidates carries more information.
    """

    def __init__(self, hard: HardDistSpec, rng: np.random.Generator, gadget_candidates: int = 2):
        self.hard = hard
        self.rng = rng
        self.gadget_candidates = gadget_candidates

    def _candidate_depths(self, tracker: PosteriorTracker) -> List[int]:
        n, n0 = self.hard.n, self.hard.n0
        depths = [min(n - 1, n0 + _median_category(tracker))]
        posterior = tracker.category_posterior()
        for index in np.argsort(-posterior, kind='stable')[:self.gadget_candidates]:
            if posterior[index] <= 0:
                continue
            category = int(index) + 1
            for offset in range(n0 - 1, -1, -1):
                depth = category + offset
                if depth <= n - 1 and depth not in depths:
                    depths.append(depth)
        return depths

    def next_probe(self, tracker: PosteriorTracker) -> Optional[Path]:
        best, best_gain = None, -1.0
        for depth in self._candidate_depths(tracker):
            path = _fresh_leaf(tracker, depth, self.rng)
            if path is None:
                continue
            gain = _information_gain(tracker, path)
            if gain > best_gain + 1e-12:
                best, best_gain = path, gain
        return best

    def search_block(
        self,
        leaf: Callable[[Path], int],
        budget: int
    ) -> Tuple[PosteriorTracker, List[Tuple[int, float, float]]]:
        """Run at most ``budget`` probes against one block's leaves."""
        tracker = PosteriorTracker(self.hard)
        trace: List[Tuple[int, float, float]] = []
        probes = 0
        path: Optional[Path] = (0,) * self.hard.n

        while probes < budget and path is not None:
            bit = leaf(path)
            probes += 1
            try:
                tracker.update(path, bit)
            except InconsistentObservationError as e:
                logger.debug(f"Skipping observation: {e.message}")
            trace.append((probes, tracker.confidence(), tracker.confidence_bound()))
            if tracker.confidence() >= CONCENTRATED:
                break
            path = self.next_probe(tracker)
        return tracker, trace

    def solve(self, oracle: LeafOracle, budget: int) -> SolveResult:
        start = oracle.queries
        tracker, trace = self._solve_level(oracle, (), self.hard.k, budget)
        category = int(np.argmax(tracker.category_posterior())) + 1
        return SolveResult(
            answer=tracker.best_guess(self.rng),
            queries=oracle.queries - start,
            confidence_trace=trace,
            category=category,
        )

    def _solve_level(self, oracle: LeafOracle, prefix: Path, levels: int, budget: int):
        if levels == 1:
            return self.search_block(lambda path: oracle.query(prefix + path), budget)

        probes = math.ceil(budget ** (1.0 / levels)) if budget > 0 else 0
        child_budget = budget // probes if probes else 0

        def virtual_leaf(path: Path) -> int:
            child, _ = self._solve_level(oracle, prefix + path, levels - 1, child_budget)
            return child.best_guess(self.rng)

        return self.search_block(virtual_leaf, probes)


def solve_splitsearch(
    hard: HardDistSpec,
    oracle: LeafOracle,
    budget: int,
    rng: np.random.Generator
) -> SolveResult:
    """
    Split search on a T_k oracle.

    For k = 1 every probe is one leaf query. For k > 1 the top block is
    searched with m = ceil(B^(1/k)) virtual probes, each the answer of a
    recursive search on the T_(k-1) subtree below it with budget B // m.
    Observations no category explains are skipped. The search never aborts;
    it answers with the maximum-posterior root value.
    """
    try:
        ParameterValidator.validate_budget(budget)
    except ValidationError as e:
        raise InvalidParametersError('budget', budget, "; ".join(e.messages))
    if oracle.height != hard.total_height:
        raise InvalidParametersError('oracle.height', oracle.height, f"expected {hard.total_height}")
    return SplitSearch(hard, rng).solve(oracle, budget)


def fault_level_recovery(hard: HardDistSpec, budget: int, trials: int, seed: int) -> float:
    """Fraction of k = 1 split searches whose maximum-posterior category is the true one."""
    sequence = np.random.SeedSequence(seed)
    hits = 0
    for child in sequence.spawn(trials):
        oracle = sample_hard_tree(hard, int(child.generate_state(1)[0]))
        result = solve_splitsearch(hard, oracle, budget, np.random.default_rng(child))
        hits += int(result.category == oracle.category(()))
    return hits / trials if trials else 0.0


@dataclass
class BenchmarkCell:
    hard: HardDistSpec
    algorithm: str
    budget: Optional[int] = None


@dataclass
class BenchmarkRow:
    algorithm: str
    n: int
    k: int
    trials: int
    budget: Optional[int]
    success: float
    mean_queries: float
    seed: int

    def to_dict(self) -> Dict:
        return asdict(self)


def _run_trial(args) -> Tuple[int, int]:
    cell, child = args
    oracle = sample_hard_tree(cell.hard, int(child.generate_state(1)[0]))
    rng = np.random.default_rng(child)
    if cell.algorithm == SHORTCIRCUIT:
        result = solve_shortcircuit(cell.hard.spec, oracle, rng, cell.budget)
    elif cell.algorithm == SPLITSEARCH:
        result = solve_splitsearch(cell.hard, oracle, cell.budget or 0, rng)
    else:
        raise InvalidParametersError('algorithm', cell.algorithm, f"must be {SHORTCIRCUIT} or {SPLITSEARCH}")
    return int(result.answer == oracle.root_value), result.queries


def run_benchmark(
    grid: Sequence[BenchmarkCell],
    trials: int,
    seed: int,
    jobs: int = 1
) -> List[BenchmarkRow]:
    """
    Success fraction and mean queries of every grid cell.

    Trial seeds are spawned from one SeedSequence per cell, so results do
    not depend on ``jobs``.
    """
    if not grid:
        raise InvalidParametersError('grid', [], "must contain at least one cell")
    if trials < 1:
        raise InvalidParametersError('trials', trials, "must be positive")

    cell_sequences = np.random.SeedSequence(seed).spawn(len(grid))
    tasks = [
        (cell, child)
        for cell, sequence in zip(grid, cell_sequences)
        for child in sequence.spawn(trials)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            outcomes = list(executor.map(_run_trial, tasks, chunksize=max(1, trials // jobs)))
    else:
        outcomes = [_run_trial(task) for task in tasks]

    rows = []
    for index, cell in enumerate(grid):
        chunk = outcomes[index * trials:(index + 1) * trials]
        successes = [s for s, _ in chunk]
        queries = [q for _, q in chunk]
        rows.append(BenchmarkRow(
            algorithm=cell.algorithm,
            n=cell.hard.n,
            k=cell.hard.k,
            trials=trials,
            budget=cell.budget,
            success=float(np.mean(successes)),
            mean_queries=float(np.mean(queries)),
            seed=int(seed),
        ))
        logger.info(
            f"{cell.algorithm} n={cell.hard.n} k={cell.hard.k} budget={cell.budget}: "
            f"success {rows[-1].success:.3f}, {rows[-1].mean_queries:.1f} queries"
        )
    return rows


def benchmark_frame(rows: Iterable[BenchmarkRow]) -> pd.DataFrame:
    frame = pd.DataFrame([row.to_dict() for row in rows], columns=BENCHMARK_COLUMNS)
    frame['budget'] = frame['budget'].astype('Int64')
    return frame


def write_benchmark_csv(rows: Iterable[BenchmarkRow], path) -> FilePath:
    path = FilePath(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    benchmark_frame(rows).to_csv(path, index=False)
    return path


# Division process strategies: strategy(step, amounts, outcomes) -> p per trial.
DivisionStrategy = Callable[[int, np.ndarray, np.ndarray], np.ndarray]


def constant_strategy(p: float = 0.5) -> DivisionStrategy:
    return lambda step, amounts, outcomes: np.full(amounts.shape, p)


def alternating_strategy(high: float = 0.9, low: float = 0.1) -> DivisionStrategy:
    return lambda step, amounts, outcomes: np.full(amounts.shape, high if step % 2 == 0 else low)


def greedy_extreme_strategy() -> DivisionStrategy:
    """Splits grow more lopsided every step."""
    return lambda step, amounts, outcomes: np.full(amounts.shape, 1 - 2.0 ** -(step + 2))


def history_adaptive_strategy(a0: float = 1.0) -> DivisionStrategy:
    """Lopsided splits while ahead of the halving path, even splits once behind."""
    def strategy(step, amounts, outcomes):
        ahead = amounts >= a0 * 2.0 ** -step
        return np.where(ahead, 0.95, 0.5)
    return strategy


DIVISION_STRATEGIES: Dict[str, Callable[..., DivisionStrategy]] = {
    'constant': constant_strategy,
    'alternating': alternating_strategy,
    'greedy-extreme': greedy_extreme_strategy,
    'history-adaptive': history_adaptive_strategy,
}


def simulate_division_process(
    a0: float,
    m: int,
    strategy: DivisionStrategy,
    trials: int,
    rng: np.random.Generator,
    f_values: Sequence[float]
) -> pd.DataFrame:
    """
    Empirical Pr[A_m < F * A_0] for the process A_{t+1} = p_t A_t with
    probability p_t and (1 - p_t) A_t otherwise.

    The columns are F, the bound 2^m F, the probability, its binomial
    standard error and the trial count.
    """
    if a0 <= 0:
        raise InvalidParametersError('a0', a0, "must be positive")
    if m < 0 or trials < 1:
        raise InvalidParametersError('m/trials', (m, trials), "need m >= 0 and trials >= 1")

    amounts = np.full(trials, float(a0))
    outcomes = np.zeros((trials, m), dtype=bool)
    for step in range(m):
        p = np.clip(np.broadcast_to(strategy(step, amounts, outcomes[:, :step]), (trials,)), 0.0, 1.0)
        took = rng.random(trials) < p
        amounts = np.where(took, p * amounts, (1 - p) * amounts)
        outcomes[:, step] = took

    rows = []
    for f in f_values:
        probability = float(np.mean(amounts < f * a0))
        rows.append({
            'F': float(f),
            'bound': float(2 ** m * f),
            'probability': probability,
            'stderr': math.sqrt(probability * (1 - probability) / trials),
            'trials': trials,
        })
    return pd.DataFrame(rows, columns=['F', 'bound', 'probability', 'stderr', 'trials'])
