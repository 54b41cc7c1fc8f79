"""
Span programs for direct boolean functions.

A direct function has one input vector per input bit. Input j is available
when its label chi_j is 1, where chi_j is either x_j or its negation. The
function is 1 exactly when the target t = e_1 lies in the span of the
available columns.
"""
import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from .exceptions import (
    DegenerateProgramError,
    GenericPositionError,
    InfeasibleWitnessError,
    InvalidFunctionSpecError,
    NonDirectFunctionError,
    ThresholdRangeError,
)

logger = logging.getLogger(__name__)

WITNESS_TOLERANCE = 1e-9
TRIVIAL_TOLERANCE = 1e-6
MAX_ARITY = 12

KINDS = ('threshold', 'negated_threshold', 'custom')
TRUE_CASE = 'true_case'
FALSE_CASE = 'false_case'


def all_inputs(arity: int) -> List[Tuple[int, ...]]:
    """All 2^arity inputs in truth-table order (first bit most significant)."""
    return list(itertools.product((0, 1), repeat=arity))


def input_index(bits: Sequence[int]) -> int:
    """Truth-table index of an input."""
    index = 0
    for bit in bits:
        index = 2 * index + int(bit)
    return index


def _labels(bits: Sequence[int], polarity: Sequence[bool]) -> Tuple[int, ...]:
    return tuple(int(b) if pol else 1 - int(b) for b, pol in zip(bits, polarity))


def _is_direct(table: Sequence[int], polarity: Sequence[bool]) -> bool:
    """x0 maps to 0, x1 maps to 1 and f grows along every chi-path between them."""
    arity = len(polarity)
    by_labels = {}
    for bits in all_inputs(arity):
        by_labels[_labels(bits, polarity)] = table[input_index(bits)]

    if by_labels[(0,) * arity] != 0 or by_labels[(1,) * arity] != 1:
        return False

    for labels, value in by_labels.items():
        for j in range(arity):
            if labels[j] == 0:
                raised = labels[:j] + (1,) + labels[j + 1:]
                if value > by_labels[raised]:
                    return False
    return True


def _label_threshold(table: Sequence[int], polarity: Sequence[bool]) -> Optional[int]:
    """The h for which f(x) = [#available >= h], or None when f is no label threshold."""
    arity = len(polarity)
    for h in range(1, arity + 1):
        if all(
            table[input_index(bits)] == int(sum(_labels(bits, polarity)) >= h)
            for bits in all_inputs(arity)
        ):
            return h
    return None


@dataclass(frozen=True)
class DirectFunctionSpec:
    """
    A direct boolean function.

    ``polarity[j]`` true means chi_j = x_j, false means chi_j = not x_j.
    The truth table is indexed by :func:`input_index`.
    """

    arity: int
    kind: str
    h: Optional[int] = None
    truth_table: Tuple[int, ...] = ()
    polarity: Tuple[bool, ...] = ()

    def __post_init__(self):
        if not isinstance(self.arity, int) or not 2 <= self.arity <= MAX_ARITY:
            raise InvalidFunctionSpecError(f"arity must be an integer in 2..{MAX_ARITY}", self.to_dict())
        if self.kind not in KINDS:
            raise InvalidFunctionSpecError(f"kind must be one of {KINDS}", self.to_dict())

        arity = self.arity
        if self.kind in ('threshold', 'negated_threshold'):
            if self.h is None or not 1 <= self.h <= arity:
                raise ThresholdRangeError(self.h, arity)
            negated = self.kind == 'negated_threshold'
            table = tuple(
                int((sum(bits) >= self.h) != negated) for bits in all_inputs(arity)
            )
            expected = (not negated,) * arity
            if self.polarity and tuple(self.polarity) != expected:
                raise InvalidFunctionSpecError(
                    f"{self.kind} fixes polarity to {expected}", self.to_dict()
                )
            object.__setattr__(self, 'truth_table', table)
            object.__setattr__(self, 'polarity', expected)
            return

        table = tuple(int(b) for b in self.truth_table)
        if len(table) != 2 ** arity or any(b not in (0, 1) for b in table):
            raise InvalidFunctionSpecError(
                f"custom truth table must hold {2 ** arity} bits", self.to_dict()
            )
        object.__setattr__(self, 'truth_table', table)

        if self.polarity:
            polarity = tuple(bool(p) for p in self.polarity)
            if len(polarity) != arity:
                raise InvalidFunctionSpecError("polarity length differs from arity", self.to_dict())
            if not _is_direct(table, polarity):
                raise NonDirectFunctionError(list(table), f"not direct under polarity {polarity}")
        else:
            polarity = next(
                (pol for pol in itertools.product((True, False), repeat=arity)
                 if _is_direct(table, pol)),
                None
            )
            if polarity is None:
                raise NonDirectFunctionError(list(table), "no polarity assignment makes it direct")
        object.__setattr__(self, 'polarity', polarity)

    @classmethod
    def threshold(cls, arity: int, h: int) -> 'DirectFunctionSpec':
        return cls(arity=arity, kind='threshold', h=h)

    @classmethod
    def negated_threshold(cls, arity: int, h: int) -> 'DirectFunctionSpec':
        return cls(arity=arity, kind='negated_threshold', h=h)

    @classmethod
    def nand(cls) -> 'DirectFunctionSpec':
        return cls(arity=2, kind='negated_threshold', h=2)

    @classmethod
    def majority(cls, arity: int = 3) -> 'DirectFunctionSpec':
        if arity % 2 == 0:
            raise InvalidFunctionSpecError("majority needs an odd arity", {'arity': arity})
        return cls(arity=arity, kind='threshold', h=(arity + 1) // 2)

    @classmethod
    def custom(cls, truth_table: Sequence[int], polarity: Sequence[bool] = ()) -> 'DirectFunctionSpec':
        arity = max(1, len(truth_table)).bit_length() - 1
        return cls(arity=arity, kind='custom', truth_table=tuple(truth_table), polarity=tuple(polarity))

    @classmethod
    def from_dict(cls, data: Dict) -> 'DirectFunctionSpec':
        return cls(
            arity=int(data['arity']),
            kind=data['kind'],
            h=data.get('h'),
            truth_table=tuple(data.get('truth_table') or ()),
            polarity=tuple(data.get('polarity') or ()),
        )

    def to_dict(self) -> Dict:
        return {
            'arity': self.arity,
            'kind': self.kind,
            'h': self.h,
            'truth_table': list(self.truth_table),
            'polarity': list(self.polarity),
        }

    @property
    def is_nand(self) -> bool:
        return self.arity == 2 and self.truth_table == (1, 1, 1, 0)

    @property
    def x0(self) -> Tuple[int, ...]:
        """Input with every label 0 (f = 0)."""
        return tuple(0 if pol else 1 for pol in self.polarity)

    @property
    def x1(self) -> Tuple[int, ...]:
        """Input with every label 1 (f = 1)."""
        return tuple(1 if pol else 0 for pol in self.polarity)

    def labels(self, bits: Sequence[int]) -> Tuple[int, ...]:
        return _labels(bits, self.polarity)

    def value(self, bits: Sequence[int]) -> int:
        return self.truth_table[input_index(bits)]

    def label_threshold(self) -> Optional[int]:
        return _label_threshold(self.truth_table, self.polarity)

    def cache_key(self) -> str:
        table = ''.join(str(b) for b in self.truth_table)
        pol = ''.join('1' if p else '0' for p in self.polarity)
        return f"fn:{self.arity}:{table}:{pol}"


@dataclass
class SpanProgram:
    """Rows r_0..r_{C-1} of ``matrix``; column j is the input vector v_j."""

    matrix: np.ndarray
    polarity: Tuple[bool, ...]
    normalized: bool = False
    spec: Optional[DirectFunctionSpec] = None

    @property
    def arity(self) -> int:
        return self.matrix.shape[1]

    @property
    def target(self) -> np.ndarray:
        t = np.zeros(self.matrix.shape[0])
        t[0] = 1.0
        return t

    def available(self, bits: Sequence[int]) -> np.ndarray:
        return np.array(_labels(bits, self.polarity), dtype=bool)

    def to_dict(self) -> Dict:
        return {
            'matrix': self.matrix.tolist(),
            'polarity': list(self.polarity),
            'normalized': self.normalized,
        }


@dataclass
class WitnessReport:
    value: float
    witness: np.ndarray
    branch: str
    costs: np.ndarray

    @property
    def contributions(self) -> np.ndarray:
        """Per-coordinate terms s_j * w_j^2 of the witness size."""
        return self.costs * self.witness ** 2


@dataclass
class InputProfile:
    bits: Tuple[int, ...]
    wsize: float
    value: int
    trivial: bool
    strong: Tuple[bool, ...]

    def to_dict(self) -> Dict:
        return {
            'input': list(self.bits),
            'wsize': self.wsize,
            'value': self.value,
            'trivial': self.trivial,
            'strong': list(self.strong),
        }


@dataclass
class FunctionAnalysis:
    """
    Witness sizes of every input plus the lookup tables the tree passes use.

    Arrays are indexed by truth-table index: ``values[i]``, ``trivial[i]``,
    ``wsize[i]`` and ``strong[i, j]``.
    """

    spec: DirectFunctionSpec
    program: SpanProgram
    omega: float
    per_input: Dict[Tuple[int, ...], InputProfile] = field(default_factory=dict)

    def __post_init__(self):
        profiles = [self.per_input[bits] for bits in all_inputs(self.spec.arity)]
        self.values = np.array([p.value for p in profiles], dtype=np.int8)
        self.trivial = np.array([p.trivial for p in profiles], dtype=bool)
        self.wsize = np.array([p.wsize for p in profiles], dtype=float)
        self.strong = np.array([p.strong for p in profiles], dtype=bool)

    @property
    def arity(self) -> int:
        return self.spec.arity

    def profile(self, bits: Sequence[int]) -> InputProfile:
        return self.per_input[tuple(int(b) for b in bits)]

    def to_dict(self) -> Dict:
        return {
            'function': self.spec.to_dict(),
            'program': self.program.to_dict(),
            'omega': self.omega,
            'inputs': [self.per_input[bits].to_dict() for bits in all_inputs(self.arity)],
        }


def _in_span(columns: np.ndarray, target: np.ndarray, tol: float) -> bool:
    """
    Span membership with tolerances relative to the data.

    Rows are equilibrated first (a row scaling maps the span test to an
    equivalent one), columns are normalized, and the rank cut-off follows
    the usual max(shape) * eps * sigma_max rule.
    """
    target_norm = float(np.linalg.norm(target))
    norms = np.linalg.norm(columns, axis=0)
    columns = columns[:, norms > 0]
    if columns.shape[1] == 0:
        return bool(target_norm <= tol)
    if target_norm == 0.0:
        return True

    row_scale = np.max(np.abs(columns), axis=1)
    row_scale[row_scale == 0] = 1.0
    scaled = columns / row_scale[:, None]
    scaled = scaled / np.linalg.norm(scaled, axis=0)
    goal = target / row_scale
    goal = goal / np.linalg.norm(goal)

    u, sigma, _ = np.linalg.svd(scaled, full_matrices=False)
    cutoff = max(scaled.shape) * np.finfo(float).eps * sigma[0]
    basis = u[:, sigma > cutoff]
    residual = goal - basis @ (basis.T @ goal)
    return bool(np.linalg.norm(residual) <= tol)


def _integer_rank(vectors: Sequence[Sequence[int]]) -> int:
    """Exact rank by fraction-free (Bareiss) elimination."""
    rows = [list(v) for v in vectors]
    if not rows:
        return 0
    n_rows, n_cols = len(rows), len(rows[0])
    rank, previous = 0, 1
    for col in range(n_cols):
        pivot = next((r for r in range(rank, n_rows) if rows[r][col] != 0), None)
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        head = rows[rank]
        for r in range(rank + 1, n_rows):
            row = rows[r]
            for c in range(col + 1, n_cols):
                row[c] = (row[c] * head[col] - row[col] * head[c]) // previous
            row[col] = 0
        previous = head[col]
        rank += 1
        if rank == n_rows:
            break
    return rank


def _exact_in_span(vectors: List[List[int]], target: List[int]) -> bool:
    return _integer_rank(vectors + [target]) == _integer_rank(vectors)


def _check_generic_position(matrix: np.ndarray, tol: float) -> None:
    rows, arity = matrix.shape
    integral = bool(np.all(matrix == np.round(matrix))) and float(np.max(np.abs(matrix))) < 2.0 ** 52
    if integral:
        vectors = [[int(round(x)) for x in matrix[:, j]] for j in range(arity)]
        target = [1] + [0] * (rows - 1)

        def reaches(cols):
            return _exact_in_span([vectors[j] for j in cols], target)
    else:
        target_vec = np.eye(rows)[0]

        def reaches(cols):
            return _in_span(matrix[:, cols], target_vec, tol)

    for cols in itertools.combinations(range(arity), rows):
        if not reaches(cols):
            raise GenericPositionError(cols, f"{rows} columns do not reach the target")
    if rows > 1:
        for cols in itertools.combinations(range(arity), rows - 1):
            if reaches(cols):
                raise GenericPositionError(cols, f"{rows - 1} columns already reach the target")


def build_program(spec: DirectFunctionSpec, tol: float = WITNESS_TOLERANCE) -> SpanProgram:
    """
    Build a span program for a direct function.

    Threshold functions of the labels are realized by the h x c Vandermonde
    matrix with nodes 1..c: any h columns span R^h, while h-1 columns miss
    e_1 because the polynomial prod (x - a_k) does not vanish at 0.

    Args:
        spec: Direct function to realize

    Returns:
        Unnormalized span program

    Raises:
        NonDirectFunctionError: If a custom function is not a label threshold
        GenericPositionError: If the column-span check fails
    """
    h = spec.label_threshold()
    if h is None:
        raise NonDirectFunctionError(
            list(spec.truth_table),
            "direct, but no realization is known beyond label thresholds"
        )

    nodes = np.arange(1, spec.arity + 1, dtype=float)
    matrix = np.vander(nodes, h, increasing=True).T
    _check_generic_position(matrix, tol)

    logger.debug(f"Built {h}x{spec.arity} span program for {spec.kind} function")
    return SpanProgram(matrix=matrix, polarity=spec.polarity, normalized=False, spec=spec)


def normalize_trivial(program: SpanProgram, tol: float = WITNESS_TOLERANCE) -> SpanProgram:
    """
    Orthogonalize r_0 against the other rows and scale it to unit length.

    Both are invertible row operations fixing the target direction, so the
    represented function is unchanged, and afterwards x0 and x1 have
    witness size 1.

    Raises:
        DegenerateProgramError: If r_0 lies in the span of the other rows
    """
    matrix = np.array(program.matrix, dtype=float, copy=True)
    r0 = matrix[0]
    rest = matrix[1:]
    if rest.shape[0] > 0:
        basis = linalg.orth(rest.T)
        r0 = r0 - basis @ (basis.T @ r0)

    norm = float(np.linalg.norm(r0))
    if norm <= tol:
        raise DegenerateProgramError(norm)

    matrix[0] = r0 / norm
    return SpanProgram(matrix=matrix, polarity=program.polarity, normalized=True, spec=program.spec)


def sp_evaluate(program: SpanProgram, bits: Sequence[int], tol: float = WITNESS_TOLERANCE) -> int:
    """1 iff the target lies in the span of the available columns."""
    available = program.available(bits)
    return int(_in_span(program.matrix[:, available], program.target, tol))


def _least_norm(
    constraints: np.ndarray,
    rhs: np.ndarray,
    design: np.ndarray,
    offset: np.ndarray,
    weights: np.ndarray
) -> Tuple[np.ndarray, float]:
    """
    Minimize sum weights * (offset + design @ theta)^2 subject to
    constraints @ theta = rhs.

    The feasible set is parameterized as particular + null_space @ phi and
    the remaining unconstrained problem is an ordinary least-squares solve.
    Returns theta and the constraint residual.
    """
    n_vars = design.shape[1]
    if n_vars == 0:
        return np.zeros(0), float(np.linalg.norm(rhs))

    if constraints.shape[0] == 0:
        particular = np.zeros(n_vars)
        null = np.eye(n_vars)
        residual = 0.0
    else:
        particular = np.linalg.lstsq(constraints, rhs, rcond=None)[0]
        residual = float(np.linalg.norm(constraints @ particular - rhs))
        null = linalg.null_space(constraints)

    root_w = np.sqrt(weights)
    base = root_w * (offset + design @ particular)
    if null.shape[1] == 0:
        return particular, residual

    reduced = root_w[:, None] * (design @ null)
    phi = np.linalg.lstsq(reduced, -base, rcond=None)[0]
    return particular + null @ phi, residual


def witness_size(
    program: SpanProgram,
    bits: Sequence[int],
    costs: Optional[Sequence[float]] = None,
    tol: float = WITNESS_TOLERANCE
) -> WitnessReport:
    """
    Cost-weighted witness size of one input.

    True case: minimize sum s_j w_j^2 over w with w.r_0 = 1, w.r_i = 0 and
    w_j = 0 wherever chi_j = 0. False case: w = A^T (1, mu) with w_j = 0
    wherever chi_j = 1.

    Args:
        program: Span program (normalized or not)
        bits: Input bits
        costs: Nonnegative per-input costs (unit costs when omitted)

    Returns:
        WitnessReport with the optimal value and one minimizer

    Raises:
        InfeasibleWitnessError: If the selected branch has no solution
    """
    bits = tuple(int(b) for b in bits)
    arity = program.arity
    if len(bits) != arity:
        raise InvalidFunctionSpecError(f"input {bits} has length {len(bits)}, expected {arity}")

    s = np.ones(arity) if costs is None else np.asarray(costs, dtype=float)
    if s.shape != (arity,) or np.any(s < 0):
        raise InvalidFunctionSpecError(f"costs must be {arity} nonnegative reals")

    available = program.available(bits)
    matrix = program.matrix
    r0, rest = matrix[0], matrix[1:]

    if sp_evaluate(program, bits, tol):
        branch = TRUE_CASE
        cols = np.flatnonzero(available)
        sub = matrix[:, cols]
        z, residual = _least_norm(sub, program.target, np.eye(len(cols)), np.zeros(len(cols)), s[cols])
        witness = np.zeros(arity)
        witness[cols] = z
        scale = max(1.0, float(np.linalg.norm(sub)) * float(np.linalg.norm(z)))
    else:
        branch = FALSE_CASE
        cols = np.flatnonzero(available)
        mu, residual = _least_norm(rest[:, cols].T, -r0[cols], rest.T, r0, s)
        witness = r0 + rest.T @ mu
        scale = max(1.0, float(np.linalg.norm(rest)) * float(np.linalg.norm(mu)))

    if residual > tol * scale:
        raise InfeasibleWitnessError(bits, branch, residual)

    value = float(np.sum(s * witness ** 2))
    return WitnessReport(value=value, witness=witness, branch=branch, costs=s)


def feasible_branches(program: SpanProgram, bits: Sequence[int], tol: float = WITNESS_TOLERANCE) -> Dict[str, bool]:
    """Feasibility of each witness branch, decided independently of sp_evaluate."""
    available = program.available(bits)
    cols = np.flatnonzero(available)
    matrix = program.matrix
    r0, rest = matrix[0], matrix[1:]

    true_ok = _in_span(matrix[:, cols], program.target, tol)

    if len(cols) == 0:
        false_ok = True
    elif rest.shape[0] == 0:
        false_ok = bool(np.linalg.norm(r0[cols]) <= tol)
    else:
        false_ok = _in_span(rest[:, cols].T, -r0[cols], tol)
    return {TRUE_CASE: bool(true_ok), FALSE_CASE: bool(false_ok)}


def analyze(
    program: SpanProgram,
    trivial_tol: float = TRIVIAL_TOLERANCE,
    tol: float = WITNESS_TOLERANCE
) -> FunctionAnalysis:
    """
    Classify every input of the program's function.

    omega is the largest unit-cost witness size. An input is trivial when its
    witness size is 1 within ``trivial_tol``; child j is strong when
    chi_j equals the output.
    """
    spec = program.spec
    if spec is None:
        table = tuple(sp_evaluate(program, bits, tol) for bits in all_inputs(program.arity))
        spec = DirectFunctionSpec.custom(table, program.polarity)

    per_input = {}
    for bits in all_inputs(program.arity):
        report = witness_size(program, bits, tol=tol)
        value = int(report.branch == TRUE_CASE)
        labels = spec.labels(bits)
        if report.value < 1 - trivial_tol:
            logger.warning(f"Input {bits} has witness size {report.value:.6f} below 1")
        per_input[bits] = InputProfile(
            bits=bits,
            wsize=report.value,
            value=value,
            trivial=bool(report.value <= 1 + trivial_tol),
            strong=tuple(bool(label == value) for label in labels),
        )

    omega = max(profile.wsize for profile in per_input.values())
    faults = sum(1 for profile in per_input.values() if not profile.trivial)
    logger.info(f"Analyzed {spec.kind} function of arity {spec.arity}: omega={omega:.6f}, {faults} fault inputs")
    return FunctionAnalysis(spec=spec, program=program, omega=omega, per_input=per_input)


def analyze_function(spec: DirectFunctionSpec) -> FunctionAnalysis:
    """Build, normalize and analyze in one step."""
    return analyze(normalize_trivial(build_program(spec)))
