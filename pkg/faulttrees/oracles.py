"""
Leaf oracles: the only way solvers read leaf values.

Every oracle memoizes and counts distinct leaf queries, so query totals are
exact whichever algorithm drives it.
"""
import json
import logging
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np
from django.core.exceptions import ValidationError

from .exceptions import InvalidTreeError, MalformedPathError
from .validators import TreeValidator

logger = logging.getLogger(__name__)

Path = Tuple[int, ...]


class LeafOracle:
    """Counted, memoized leaf access for a complete tree of given arity and height."""

    def __init__(self, arity: int, height: int):
        self.arity = arity
        self.height = height
        self.queries = 0
        self.transcript: List[Tuple[Path, int, int]] = []
        self._memo: Dict[Path, int] = {}

    @property
    def leaf_count(self) -> int:
        return self.arity ** self.height

    def validate_path(self, path: Sequence[int]) -> Path:
        """
        Check a leaf path and return it as a tuple.

        Raises:
            MalformedPathError: If the length or any digit is out of range
        """
        try:
            path = tuple(int(d) for d in path)
        except (TypeError, ValueError):
            raise MalformedPathError(tuple(path), "digits must be integers")
        try:
            return TreeValidator.validate_leaf_path(path, self.arity, self.height)
        except ValidationError as e:
            raise MalformedPathError(path, "; ".join(e.messages))

    def query(self, path: Sequence[int]) -> int:
        """Leaf value; the counter moves only on the first query of a path."""
        path = self.validate_path(path)
        if path in self._memo:
            return self._memo[path]

        bit = int(self._resolve(path))
        self._memo[path] = bit
        self.queries += 1
        self.transcript.append((path, bit, self.queries))
        return bit

    def known(self, path: Sequence[int]) -> bool:
        return tuple(int(d) for d in path) in self._memo

    def peek(self, path: Sequence[int]) -> int:
        """Ground-truth leaf value without touching the counter."""
        return int(self._resolve(self.validate_path(path)))

    def _resolve(self, path: Path) -> int:
        raise NotImplementedError

    def leaf_path(self, index: int) -> Path:
        digits = []
        for _ in range(self.height):
            index, digit = divmod(index, self.arity)
            digits.append(digit)
        return tuple(reversed(digits))

    def leaf_values(self, counted: bool = True) -> np.ndarray:
        read = self.query if counted else self.peek
        return np.array(
            [read(self.leaf_path(i)) for i in range(self.leaf_count)], dtype=np.int8
        )

    def transcript_lines(self) -> List[str]:
        """The transcript as JSON lines of path, bit and counter."""
        return [
            json.dumps({'path': list(path), 'bit': bit, 'counter': counter}, sort_keys=True)
            for path, bit, counter in self.transcript
        ]

    def replay(self, lines: Iterable[str]) -> bool:
        """True when every recorded bit matches this oracle's leaf values."""
        for line in lines:
            record = json.loads(line)
            if self.peek(record['path']) != int(record['bit']):
                logger.warning(f"Replay mismatch at leaf {record['path']}")
                return False
        return True


class ExplicitLeafOracle(LeafOracle):
    """Oracle over an explicit leaf array in left-to-right order."""

    def __init__(self, arity: int, height: int, leaves: Sequence[int]):
        super().__init__(arity, height)
        self._leaves = np.asarray(leaves, dtype=np.int8)
        if self._leaves.shape != (arity ** height,):
            raise InvalidTreeError(
                f"expected {arity ** height} leaves, got {self._leaves.size}"
            )

    def _resolve(self, path: Path) -> int:
        index = 0
        for digit in path:
            index = index * self.arity + digit
        return int(self._leaves[index])


def oracle_query(oracle: LeafOracle, leaf_path: Sequence[int]) -> int:
    return oracle.query(leaf_path)
