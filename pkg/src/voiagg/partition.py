"""Hard and soft partitions of the state index set.

Group labels are 0-based throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain import ALGEBRAIC_TOL, _as_gamma, _frozen
from .errors import InvalidPartition

#: default sup-norm distance under which two partition columns count as coincident
COINCIDENCE_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class BinaryPartition:
    """Surjective assignment of ``n`` states onto ``m`` nonempty groups."""

    assignment: np.ndarray
    m: int
    #: for partitions produced by :func:`harden`, the source column of each group
    source_columns: tuple | None = None

    def __post_init__(self):
        a = np.asarray(self.assignment)
        if a.ndim != 1 or a.size == 0 or not np.issubdtype(a.dtype, np.integer):
            raise InvalidPartition("assignment must be a nonempty integer vector")
        if a.min() < 0 or a.max() >= self.m:
            raise InvalidPartition(f"group labels must lie in 0..{self.m - 1}")
        if len(np.unique(a)) != self.m:
            raise InvalidPartition("every group must contain at least one state")
        a = a.astype(np.int64)
        a.setflags(write=False)
        object.__setattr__(self, "assignment", a)

    @classmethod
    def from_labels(cls, labels) -> "BinaryPartition":
        """Relabel arbitrary labels to 0..m-1 in order of first appearance."""
        labels = np.asarray(labels)
        _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
        order = np.argsort(np.argsort(first))
        return cls(order[inverse].astype(np.int64), len(first))

    @property
    def n(self) -> int:
        return self.assignment.shape[0]

    def matrix(self) -> np.ndarray:
        psi = np.zeros((self.n, self.m))
        psi[np.arange(self.n), self.assignment] = 1.0
        return psi

    def lift(self) -> "ProbabilisticPartition":
        return ProbabilisticPartition(self.matrix())

    def co_membership(self) -> np.ndarray:
        return self.assignment[:, None] == self.assignment[None, :]

    def canonical(self) -> tuple:
        """Restricted growth string of the partition."""
        return tuple(BinaryPartition.from_labels(self.assignment).assignment.tolist())


@dataclass(frozen=True, eq=False)
class ProbabilisticPartition:
    """``n x m`` matrix of soft state-to-group assignment probabilities."""

    psi: np.ndarray

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=float)
        if psi.ndim != 2 or 0 in psi.shape:
            raise InvalidPartition(f"partition matrix must be 2-d and nonempty, got {psi.shape}")
        if np.any(psi < 0) or np.any(psi > 1 + ALGEBRAIC_TOL):
            raise InvalidPartition("partition entries must lie in [0, 1]")
        dev = np.abs(psi.sum(axis=1) - 1.0)
        if np.any(dev > ALGEBRAIC_TOL):
            raise InvalidPartition(f"row {int(np.argmax(dev))} does not sum to one")
        object.__setattr__(self, "psi", _frozen(psi))

    @classmethod
    def ones(cls, n: int) -> "ProbabilisticPartition":
        """Single group holding every state."""
        return cls(np.ones((n, 1)))

    @classmethod
    def random(cls, n: int, m: int, rng: np.random.Generator) -> "ProbabilisticPartition":
        return cls(rng.dirichlet(np.ones(m), size=n))

    @property
    def n(self) -> int:
        return self.psi.shape[0]

    @property
    def m(self) -> int:
        return self.psi.shape[1]

    def empty_columns(self, tol: float = 0.0) -> np.ndarray:
        return np.flatnonzero(self.psi.max(axis=0) <= tol)


@dataclass(frozen=True, eq=False)
class ClusterMarginals:
    alpha: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alpha", _frozen(self.alpha))


def marginals(gamma, part: ProbabilisticPartition) -> ClusterMarginals:
    """Group probabilities ``alpha_j = sum_i gamma_i psi_ij``."""
    return ClusterMarginals(_as_gamma(gamma) @ part.psi)


def harden(part: ProbabilisticPartition) -> BinaryPartition:
    """Assign each state to its most probable group.

    Ties go to the lowest column index.  Columns that win no state are
    dropped and the survivors relabelled in column order;
    ``source_columns`` records which column each group came from.
    """
    winner = np.argmax(part.psi, axis=1)
    kept = np.unique(winner)
    relabel = np.full(part.m, -1)
    relabel[kept] = np.arange(len(kept))
    return BinaryPartition(relabel[winner], len(kept), tuple(int(k) for k in kept))


def permutation_equivalent(a: BinaryPartition, b: BinaryPartition) -> bool:
    """True when some relabelling of groups maps ``a`` onto ``b``."""
    if a.n != b.n:
        raise InvalidPartition("partitions must cover the same number of states")
    if a.m != b.m:
        return False
    return bool(np.array_equal(a.co_membership(), b.co_membership()))


def coincident_columns(part: ProbabilisticPartition, tol: float = COINCIDENCE_TOL) -> list:
    """Unordered column pairs ``(j, k)``, ``j < k``, within ``tol`` in sup norm."""
    psi = part.psi
    gaps = np.max(np.abs(psi[:, :, None] - psi[:, None, :]), axis=0)
    j, k = np.nonzero(np.triu(gaps <= tol, 1))
    return [(int(x), int(y)) for x, y in zip(j, k)]
