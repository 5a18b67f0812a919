"""Finite Markov chains: representation, validation, stationary laws, synthesis."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import reduce

import numpy as np
from scipy.sparse.csgraph import breadth_first_order, connected_components

from .errors import (
    DegenerateGamma,
    NegativeEntry,
    NegativeEntryAfterPerturbation,
    NoConvergence,
    NonSquare,
    Periodic,
    Reducible,
    RowSumViolation,
    ValidationError,
)

#: tolerance for algebraic identities (row sums, normalisation)
ALGEBRAIC_TOL = 1e-12
#: tolerance for iterative solves (stationarity residual)
ITERATIVE_TOL = 1e-10
#: above this size the stationary law is found by power iteration
DIRECT_SOLVE_LIMIT = 2000


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TransitionModel:
    """Row-stochastic transition matrix of a first-order homogeneous chain.

    Construction checks shape, sign and row sums; irreducibility and
    aperiodicity are checked by :func:`validate`.  Edges are the nonzero
    pattern of ``pi``.
    """

    pi: np.ndarray

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=float)
        if pi.ndim != 2 or pi.shape[0] != pi.shape[1] or pi.shape[0] == 0:
            raise NonSquare(f"transition matrix must be square, got shape {pi.shape}")
        object.__setattr__(self, "pi", _frozen(pi))
        _check_stochastic(self.pi)

    @property
    def n(self) -> int:
        return self.pi.shape[0]

    @property
    def edges(self) -> np.ndarray:
        return self.pi > 0

    def __eq__(self, other):
        return isinstance(other, TransitionModel) and np.array_equal(self.pi, other.pi)

    def __hash__(self):
        return hash(self.pi.tobytes())


def _check_stochastic(pi: np.ndarray) -> None:
    neg = np.argwhere(pi < 0)
    if len(neg):
        i, j = map(int, neg[0])
        raise NegativeEntry(i, j, pi[i, j])
    if np.any(pi > 1):
        i, j = map(int, np.argwhere(pi > 1)[0])
        raise RowSumViolation(i, float(pi[i].sum() - 1))
    dev = pi.sum(axis=1) - 1.0
    bad = np.flatnonzero(np.abs(dev) > ALGEBRAIC_TOL)
    if len(bad):
        raise RowSumViolation(int(bad[0]), float(dev[bad[0]]))


@dataclass(frozen=True)
class ValidationReport:
    n: int
    max_row_deviation: float
    negative_entries: list
    n_classes: int
    period: int
    errors: list = field(default_factory=list)

    @property
    def irreducible(self) -> bool:
        return self.n_classes == 1

    @property
    def aperiodic(self) -> bool:
        return self.period == 1

    @property
    def accepted(self) -> bool:
        return not self.errors


def period(adjacency: np.ndarray) -> int:
    """Period of an irreducible digraph: gcd of ``level(u) + 1 - level(v)`` over edges."""
    order, pred = breadth_first_order(adjacency.astype(float), 0, directed=True)
    level = np.full(adjacency.shape[0], -1)
    level[0] = 0
    for v in order[1:]:
        level[v] = level[pred[v]] + 1
    u, v = np.nonzero(adjacency)
    keep = (level[u] >= 0) & (level[v] >= 0)
    diffs = np.abs(level[u[keep]] + 1 - level[v[keep]])
    return int(reduce(math.gcd, diffs.tolist(), 0)) or 0


def validate(model, raise_on_error: bool = True) -> ValidationReport:
    """Check that a matrix is an irreducible, aperiodic stochastic matrix.

    Parameters
    ----------
    model : TransitionModel or array-like
        The chain to check.  Raw arrays are inspected without the
        construction-time checks so that every violation is reported.
    raise_on_error : bool
        Raise the first violation instead of only recording it.
    """
    pi = model.pi if isinstance(model, TransitionModel) else np.asarray(model, dtype=float)
    if pi.ndim != 2 or pi.shape[0] != pi.shape[1]:
        err = NonSquare(f"transition matrix must be square, got shape {pi.shape}")
        if raise_on_error:
            raise err
        return ValidationReport(0, float("nan"), [], 0, 0, [err])
    n = pi.shape[0]
    errors: list[ValidationError] = []
    dev = pi.sum(axis=1) - 1.0
    for r in np.flatnonzero(np.abs(dev) > ALGEBRAIC_TOL):
        errors.append(RowSumViolation(int(r), float(dev[r])))
    negatives = [tuple(map(int, ij)) for ij in np.argwhere(pi < 0)]
    errors.extend(NegativeEntry(i, j, pi[i, j]) for i, j in negatives)
    adj = pi > 0
    n_classes, _ = connected_components(adj.astype(float), directed=True, connection="strong")
    if n_classes > 1:
        errors.append(Reducible(f"chain has {n_classes} communicating classes"))
        per = 0
    else:
        per = period(adj)
        if per != 1:
            errors.append(Periodic(per))
    report = ValidationReport(
        n=n,
        max_row_deviation=float(np.max(np.abs(dev))) if n else 0.0,
        negative_entries=negatives,
        n_classes=int(n_classes),
        period=per,
        errors=errors,
    )
    if raise_on_error and errors:
        raise errors[0]
    return report


@dataclass(frozen=True, eq=False)
class StationaryDistribution:
    gamma: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=float)
        if g.ndim != 1 or np.any(g < 0) or abs(g.sum() - 1.0) > ALGEBRAIC_TOL:
            raise ValidationError("gamma must be a probability vector")
        object.__setattr__(self, "gamma", _frozen(g))

    @property
    def n(self) -> int:
        return self.gamma.shape[0]


def _as_gamma(gamma) -> np.ndarray:
    return gamma.gamma if isinstance(gamma, StationaryDistribution) else np.asarray(gamma, float)


def _normalise(v: np.ndarray) -> np.ndarray:
    v = np.where(np.abs(v) < 1e-300, 0.0, v)
    v = np.abs(v)
    return v / math.fsum(v)


def stationary(model: TransitionModel, max_iter: int = 100_000) -> StationaryDistribution:
    """Invariant distribution ``gamma`` with ``gamma @ pi == gamma``.

    A direct solve of ``(pi.T - I) gamma = 0`` with the last equation
    replaced by the normalisation is used up to ``DIRECT_SOLVE_LIMIT``
    states, power iteration above that.
    """
    pi = model.pi
    n = pi.shape[0]
    if n <= DIRECT_SOLVE_LIMIT:
        a = pi.T - np.eye(n)
        a[-1, :] = 1.0
        b = np.zeros(n)
        b[-1] = 1.0
        g = _normalise(np.linalg.solve(a, b))
        # iterative refinement against the residual
        for _ in range(2):
            r = g @ pi - g
            if np.max(np.abs(r)) <= ITERATIVE_TOL * 1e-3:
                break
            rhs = -r
            rhs[-1] = 0.0
            g = _normalise(g + np.linalg.solve(a, rhs))
        residual = float(np.max(np.abs(g @ pi - g)))
        if residual > ITERATIVE_TOL:
            raise NoConvergence(1, residual)
        return StationaryDistribution(g)
    g = np.full(n, 1.0 / n)
    # lazy chain shares the stationary law and is never periodic
    for it in range(1, max_iter + 1):
        new = 0.5 * (g + g @ pi)
        new /= new.sum()
        if np.max(np.abs(new - g)) < ITERATIVE_TOL * 1e-2:
            g = new
            break
        g = new
    residual = float(np.max(np.abs(g @ pi - g)))
    if residual > ITERATIVE_TOL:
        raise NoConvergence(max_iter, residual)
    return StationaryDistribution(_normalise(g))


@dataclass(frozen=True, eq=False)
class NcdSpec:
    """Block structure of a nearly-completely-decomposable chain ``pi_star + epsilon * coupling``.

    ``pi_star`` and ``coupling`` may be left as ``None``; :func:`realize_ncd`
    draws them from a seed.  ``concentration`` is the Dirichlet parameter of
    the within-block rows when ``pi_star`` is drawn.
    """

    block_sizes: tuple
    epsilon: float
    pi_star: np.ndarray | None = None
    coupling: np.ndarray | None = None
    concentration: float = 5.0

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.block_sizes)
        if not sizes or min(sizes) < 1:
            raise ValidationError("block sizes must be positive")
        if self.epsilon < 0:
            raise ValidationError("epsilon must be non-negative")
        object.__setattr__(self, "block_sizes", sizes)
        n = sum(sizes)
        for name in ("pi_star", "coupling"):
            v = getattr(self, name)
            if v is not None:
                v = np.asarray(v, float)
                if v.shape != (n, n):
                    raise ValidationError(f"{name} must be {n}x{n}")
                object.__setattr__(self, name, _frozen(v))

    @property
    def n(self) -> int:
        return sum(self.block_sizes)

    @property
    def m(self) -> int:
        return len(self.block_sizes)

    @property
    def labels(self) -> np.ndarray:
        """Block index of every state."""
        return np.repeat(np.arange(self.m), self.block_sizes)

    @property
    def same_block(self) -> np.ndarray:
        lab = self.labels
        return lab[:, None] == lab[None, :]


def draw_block_diagonal(block_sizes, rng: np.random.Generator, concentration: float = 5.0) -> np.ndarray:
    n = sum(block_sizes)
    pi_star = np.zeros((n, n))
    start = 0
    for b in block_sizes:
        pi_star[start : start + b, start : start + b] = rng.dirichlet(np.full(b, concentration), size=b)
        start += b
    return pi_star


def draw_coupling(pi_star: np.ndarray, labels: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Zero-row-sum coupling: uniform off-block mass, taken back in proportion to the block row.

    The result is scaled so that the largest within-block absolute row sum
    (equal to the largest off-block row sum) is one.
    """
    same = labels[:, None] == labels[None, :]
    off = np.where(same, 0.0, rng.uniform(size=pi_star.shape))
    out = off.sum(axis=1)
    c = off - out[:, None] * pi_star
    scale = np.max(np.abs(np.where(same, c, 0.0)).sum(axis=1))
    return c / scale if scale > 0 else c


def realize_ncd(spec: NcdSpec, seed: int) -> NcdSpec:
    """Fill in any missing ``pi_star`` / ``coupling`` from ``seed``."""
    rng = np.random.default_rng(seed)
    pi_star = spec.pi_star
    if pi_star is None:
        pi_star = draw_block_diagonal(spec.block_sizes, rng, spec.concentration)
    coupling = spec.coupling
    if coupling is None:
        coupling = draw_coupling(np.asarray(pi_star), spec.labels, rng)
    return replace(spec, pi_star=pi_star, coupling=coupling)


def generate_ncd(spec: NcdSpec, seed: int) -> TransitionModel:
    """Draw ``pi_star + epsilon * coupling`` with the planted block structure.

    With ``epsilon == 0`` the (reducible) block-diagonal matrix is returned
    unvalidated; it is only meant for analysis.
    """
    spec = realize_ncd(spec, seed)
    pi = spec.pi_star + spec.epsilon * spec.coupling
    if np.any(pi < 0):
        i, j = map(int, np.argwhere(pi < 0)[0])
        raise NegativeEntryAfterPerturbation(
            f"epsilon={spec.epsilon} drives entry ({i}, {j}) negative", i=i, j=j
        )
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum(axis=1, keepdims=True)
    model = TransitionModel(pi)
    if spec.epsilon > 0:
        validate(model)
    return model


def random_chain_from_limit(gamma, sparsity: float, seed: int) -> TransitionModel:
    """Reversible chain with a prescribed stationary law.

    A random symmetric stochastic proposal is reweighted Metropolis-style by
    ``gamma``; ``sparsity`` is the fraction of off-diagonal proposal pairs
    removed (a ring of edges is always kept so the chain stays irreducible).
    """
    g = _as_gamma(gamma)
    if np.any(g <= 0):
        raise DegenerateGamma("every stationary probability must be positive")
    if not 0.0 <= sparsity <= 1.0:
        raise ValidationError("sparsity must lie in [0, 1]")
    n = g.shape[0]
    rng = np.random.default_rng(seed)
    s = rng.uniform(size=(n, n))
    drop = rng.uniform(size=(n, n)) < sparsity
    s = np.where(drop, 0.0, s)
    s = np.triu(s, 1)
    s = s + s.T
    ring = np.arange(n)
    s[ring, (ring + 1) % n] = np.maximum(s[ring, (ring + 1) % n], 0.5)
    s[(ring + 1) % n, ring] = s[ring, (ring + 1) % n]
    q = s / s.sum(axis=1).max()
    ratio = g[None, :] / g[:, None]
    pi = q * np.minimum(1.0, ratio)
    np.fill_diagonal(pi, 0.0)
    np.fill_diagonal(pi, np.maximum(1.0 - pi.sum(axis=1), 0.0))
    if n > 1 and np.all(np.diag(pi) <= 0):
        pi = 0.5 * (pi + np.eye(n))
    model = TransitionModel(pi)
    validate(model)
    return model
