"""
Validators for experiment inputs.

They raise django ValidationError so serializers and management commands
report problems the same way.
"""
from pathlib import Path
from typing import List, Sequence

from django.core.exceptions import ValidationError


class ParameterValidator:
    """Validates numeric experiment parameters."""

    @staticmethod
    def validate_seed(seed: int) -> int:
        """
        Validate a seed is an unsigned 64-bit integer.

        Raises:
            ValidationError: If the seed is negative or too large
        """
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise ValidationError(f"Seed must be an integer, got {type(seed).__name__}")
        if not 0 <= seed < 2 ** 64:
            raise ValidationError(f"Seed must lie in [0, 2^64), got {seed}")
        return seed

    @staticmethod
    def validate_jobs(jobs: int) -> int:
        if jobs < 1:
            raise ValidationError(f"Jobs must be at least 1, got {jobs}")
        return jobs

    @staticmethod
    def validate_energy(energy: float, limit: float) -> float:
        """
        Validate a walk energy lies in (0, limit].

        Raises:
            ValidationError: If the energy is not positive or above the limit
        """
        if energy <= 0:
            raise ValidationError(f"Energy must be positive, got {energy}")
        if energy > limit:
            raise ValidationError(f"Energy {energy} exceeds the validity limit {limit}")
        return float(energy)

    @staticmethod
    def validate_budget(budget: int) -> int:
        if budget < 0:
            raise ValidationError(f"Query budget must be nonnegative, got {budget}")
        return budget

    @staticmethod
    def validate_complexity_constants(c1: float, c2: float, c_energy: float, c_prime: float) -> None:
        """
        Validate complexity constants, collecting every problem.

        Raises:
            ValidationError: With all violations joined by "; "
        """
        errors: List[str] = []
        if c1 < 0:
            errors.append(f"c1 must be nonnegative, got {c1}")
        if c2 < 0:
            errors.append(f"c2 must be nonnegative, got {c2}")
        if c_energy is not None and c_energy <= 0:
            errors.append(f"c_energy must be positive, got {c_energy}")
        if c_prime < 1:
            errors.append(f"c_prime must be at least 1, got {c_prime}")

        if errors:
            raise ValidationError("; ".join(errors))


class TreeValidator:
    """Validates explicit tree descriptions."""

    @staticmethod
    def validate_leaves(arity: int, depth: int, leaves: Sequence[int]) -> None:
        """
        Validate a leaf list matches its declared shape.

        Raises:
            ValidationError: With all violations joined by "; "
        """
        errors: List[str] = []
        if arity < 2:
            errors.append(f"Arity must be at least 2, got {arity}")
        if depth < 0:
            errors.append(f"Depth must be nonnegative, got {depth}")
        if not errors and len(leaves) != arity ** depth:
            errors.append(f"Depth {depth} needs {arity ** depth} leaves, got {len(leaves)}")
        if any(b not in (0, 1) for b in leaves):
            errors.append("Leaves must be 0 or 1")

        if errors:
            raise ValidationError("; ".join(errors))

    @staticmethod
    def validate_leaf_path(path: Sequence[int], arity: int, height: int) -> tuple:
        if len(path) != height:
            raise ValidationError(f"Leaf path needs {height} digits, got {len(path)}")
        if any(not 0 <= d < arity for d in path):
            raise ValidationError(f"Leaf path digits must lie in 0..{arity - 1}")
        return tuple(path)


class PathValidator:
    """Validates output locations."""

    @staticmethod
    def validate_output_path(path: str) -> Path:
        """
        Validate an output path is usable.

        Raises:
            ValidationError: If the path is empty or names a directory
        """
        if not path or not str(path).strip():
            raise ValidationError("Output path cannot be empty")
        out = Path(path)
        if out.exists() and out.is_dir():
            raise ValidationError(f"Output path {out} is a directory")
        return out

    @staticmethod
    def validate_input_file(path: str) -> Path:
        source = Path(path)
        if not source.is_file():
            raise ValidationError(f"Input file not found: {source}")
        return source
