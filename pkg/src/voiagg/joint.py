"""Joint model linking an ``n``-state chain to an ``m``-state reduction.

``U`` lifts groups back onto original states, ``Theta = U.T @ Pi`` holds
each group's conditional next-state distribution over the original states,
and ``Phi = Theta @ Psi`` is the reduced transition matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chain import TransitionModel, _as_gamma, _frozen
from .errors import DimensionMismatch, EmptyGroup
from .partition import ProbabilisticPartition

EMPTY_MASS = 1e-300


@dataclass(frozen=True, eq=False)
class LiftingMatrix:
    u: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u", _frozen(self.u))


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    theta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "theta", _frozen(self.theta))

    @property
    def m(self) -> int:
        return self.theta.shape[0]


@dataclass(frozen=True, eq=False)
class AggregatedModel:
    phi: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "phi", _frozen(self.phi))


def lifting(gamma, part: ProbabilisticPartition) -> LiftingMatrix:
    g = _as_gamma(gamma)
    if g.shape[0] != part.n:
        raise DimensionMismatch(f"gamma has {g.shape[0]} states, partition {part.n}")
    w = g[:, None] * part.psi
    mass = w.sum(axis=0)
    empty = np.flatnonzero(mass < EMPTY_MASS)
    if len(empty):
        raise EmptyGroup(int(empty[0]))
    return LiftingMatrix(w / mass)


def weight_matrix(model: TransitionModel, lift: LiftingMatrix) -> WeightMatrix:
    if lift.u.shape[0] != model.n:
        raise DimensionMismatch(f"lifting has {lift.u.shape[0]} rows, chain has {model.n} states")
    return WeightMatrix(lift.u.T @ model.pi)


def aggregate(theta: WeightMatrix, part: ProbabilisticPartition, **provenance) -> AggregatedModel:
    if theta.theta.shape != (part.m, part.n):
        raise DimensionMismatch(f"theta {theta.theta.shape} does not match partition {part.psi.shape}")
    return AggregatedModel(theta.theta @ part.psi, dict(provenance))


def group_sums(theta: WeightMatrix, assignment) -> np.ndarray:
    """``phi[j, k] = sum of theta[j, i] over states i in group k`` for a hard assignment."""
    assignment = np.asarray(assignment)
    m = int(assignment.max()) + 1
    out = np.zeros((theta.m, m))
    for k in range(m):
        out[:, k] = theta.theta[:, assignment == k].sum(axis=1)
    return out


def reduce_chain(model: TransitionModel, gamma, part: ProbabilisticPartition, **provenance):
    """Lifting, weight matrix and reduced chain for one partition."""
    lift = lifting(gamma, part)
    theta = weight_matrix(model, lift)
    return lift, theta, aggregate(theta, part, **provenance)
