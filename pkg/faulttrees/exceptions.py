"""
Custom exceptions for the fault-tree toolkit.

Every exception belongs to one of three categories. The category decides the
exit code a management command returns when the error escapes it.
"""


class FaultTreeException(Exception):
    """Base exception for all fault-tree errors."""

    exit_code = 1

    def __init__(self, message: str, details: dict = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_dict(self) -> dict:
        """Error report written next to the output of a failed command."""
        return {
            'error': self.__class__.__name__,
            'exit_code': self.exit_code,
            'message': self.message,
            'details': self.details,
        }


class ConfigurationException(FaultTreeException):
    """Raised when an input, parameter or file does not describe a valid run."""

    exit_code = 2


class InvalidFunctionSpecError(ConfigurationException):
    """Raised when a function spec is malformed."""

    def __init__(self, reason: str, spec: dict = None):
        super().__init__(
            f"Invalid function spec: {reason}",
            {'reason': reason, 'spec': spec}
        )


class NonDirectFunctionError(ConfigurationException):
    """Raised when a truth table admits no direct span program realization."""

    def __init__(self, truth_table: list, reason: str):
        super().__init__(
            f"Function is not realizable as a direct span program: {reason}",
            {'truth_table': truth_table, 'reason': reason}
        )
        self.truth_table = truth_table


class ThresholdRangeError(ConfigurationException):
    """Raised when a threshold lies outside 1..arity."""

    def __init__(self, h: int, arity: int):
        super().__init__(
            f"Threshold h={h} must lie in 1..{arity}",
            {'h': h, 'arity': arity}
        )


class ArityMismatchError(ConfigurationException):
    """Raised when a tree and a function disagree on the number of children."""

    def __init__(self, expected: int, actual: int, context: str = 'tree'):
        super().__init__(
            f"Arity mismatch for {context}: expected {expected}, got {actual}",
            {'expected': expected, 'actual': actual, 'context': context}
        )


class InvalidParametersError(ConfigurationException):
    """Raised when numeric parameters violate their constraints."""

    def __init__(self, parameter: str, value, reason: str):
        super().__init__(
            f"Invalid parameter {parameter}={value}: {reason}",
            {'parameter': parameter, 'value': value, 'reason': reason}
        )


class MalformedPathError(ConfigurationException):
    """Raised when a leaf path has the wrong length or digits."""

    def __init__(self, path, reason: str):
        super().__init__(
            f"Malformed leaf path {list(path)}: {reason}",
            {'path': list(path), 'reason': reason}
        )


class InvalidTreeError(ConfigurationException):
    """Raised when a tree description is inconsistent."""

    def __init__(self, reason: str):
        super().__init__(f"Invalid tree: {reason}", {'reason': reason})


class SearchException(FaultTreeException):
    """Raised when a search or inference step has no feasible outcome."""

    exit_code = 3


class GadgetSearchError(SearchException):
    """Raised when no gadget distribution exists within the search bounds."""

    def __init__(self, arity: int, max_height: int, max_leaf_slots: int):
        super().__init__(
            f"No gadget distribution found for arity {arity} "
            f"up to height {max_height} ({max_leaf_slots} leaf slots)",
            {'arity': arity, 'max_height': max_height, 'max_leaf_slots': max_leaf_slots}
        )


class InconsistentObservationError(SearchException):
    """Raised when an observed leaf excludes every category and root value."""

    def __init__(self, path, observed: int):
        super().__init__(
            f"Observation {observed} at leaf {list(path)} is inconsistent with every category",
            {'path': list(path), 'observed': observed}
        )


class EmptyPosteriorError(SearchException):
    """Raised when the posterior mass is zero."""

    def __init__(self):
        super().__init__("All trees are excluded by the observations", {})


class ZeroStrongChildrenError(SearchException):
    """Raised when a classification table leaves a node without strong children."""

    def __init__(self, node: int, input_bits: tuple):
        super().__init__(
            f"Node {node} with input {input_bits} has no strong child",
            {'node': node, 'input': list(input_bits)}
        )


class NumericException(FaultTreeException):
    """Raised when a numerical routine cannot produce a trustworthy result."""

    exit_code = 4


class DegenerateProgramError(NumericException):
    """Raised when r0 lies in the span of the other rows."""

    def __init__(self, residual_norm: float):
        super().__init__(
            f"Span program is degenerate: projected r0 has norm {residual_norm:.3e}",
            {'residual_norm': residual_norm}
        )


class InfeasibleWitnessError(NumericException):
    """Raised when the witness constraints have no solution."""

    def __init__(self, input_bits: tuple, branch: str, residual: float):
        super().__init__(
            f"Witness constraints infeasible for input {input_bits} "
            f"({branch}, residual {residual:.3e})",
            {'input': list(input_bits), 'branch': branch, 'residual': residual}
        )


class GenericPositionError(NumericException):
    """Raised when a threshold program fails its column-span check."""

    def __init__(self, columns: tuple, reason: str):
        super().__init__(
            f"Columns {columns} violate generic position: {reason}",
            {'columns': list(columns), 'reason': reason}
        )


class EnergyOutOfRangeError(NumericException):
    """Raised when E is too large for the first-order ratio analysis."""

    def __init__(self, energy: float, max_complexity: float, limit: float):
        super().__init__(
            f"Energy {energy:.3e} times complexity {max_complexity:.3e} "
            f"exceeds the validity limit {limit}",
            {'energy': energy, 'max_complexity': max_complexity, 'limit': limit}
        )


class ResonanceError(NumericException):
    """Raised when the ratio recursion divides by (nearly) zero."""

    def __init__(self, node: int, energy: float, denominator: float):
        super().__init__(
            f"Ratio recursion resonates at node {node} for E={energy:.3e} "
            f"(denominator {denominator:.3e})",
            {'node': node, 'energy': energy, 'denominator': denominator}
        )
