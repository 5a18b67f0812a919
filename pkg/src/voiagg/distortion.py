"""Scalar functionals of a (chain, partition, weight matrix) triple.

Natural logarithms throughout; ``0 log 0 = 0``.  Reductions use
``math.fsum`` so results do not depend on summation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chain import TransitionModel, _as_gamma
from .errors import AbsoluteContinuityViolation
from .joint import WeightMatrix
from .partition import BinaryPartition, ClusterMarginals, ProbabilisticPartition

LN2 = math.log(2.0)

MUTUAL_INFORMATION = "mutual_information"
ENTROPY = "entropy"


def to_bits(nats: float) -> float:
    return nats / LN2


def _xlogy_ratio(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Elementwise ``p log(p / q)`` with zero where ``p == 0`` and ``inf`` where only ``q == 0``."""
    if p.min() > 0 and q.min() > 0:
        return p * np.log(p / q)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = p * (np.log(p) - np.log(q))
    out = np.where(p > 0, out, 0.0)
    return np.where((p > 0) & (q <= 0), np.inf, out)


def kl_row(p, q) -> float:
    """Kullback-Leibler divergence ``sum_j p_j log(p_j / q_j)``."""
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    bad = np.flatnonzero((p > 0) & (q <= 0))
    if len(bad):
        raise AbsoluteContinuityViolation(int(bad[0]))
    return max(math.fsum(_xlogy_ratio(p, q)), 0.0)


def divergence_matrix(pi: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """``g[i, j] = KL(pi[i] || theta[j])``; ``inf`` where absolute continuity fails."""
    if theta.min() > 0:
        # negative entropy minus cross term; no zero entries of theta to mask
        neg_h = _xlogy_ratio(pi, np.ones_like(pi)).sum(axis=1)
        return np.maximum(neg_h[:, None] - pi @ np.log(theta).T, 0.0)
    terms = _xlogy_ratio(pi[:, None, :], theta[None, :, :])
    return np.maximum(terms.sum(axis=2), 0.0)


def expected_distortion(model: TransitionModel, theta: WeightMatrix, part: ProbabilisticPartition, gamma) -> float:
    """``sum_ij gamma_i psi_ij KL(pi_i || theta_j)`` skipping ``psi_ij == 0``."""
    g = _as_gamma(gamma)
    psi = part.psi
    div = divergence_matrix(model.pi, theta.theta)
    active = psi > 0
    bad = np.argwhere(active & ~np.isfinite(div))
    if len(bad):
        i, j = map(int, bad[0])
        raise AbsoluteContinuityViolation((i, j), f"row {i} is not absolutely continuous w.r.t. theta row {j}")
    with np.errstate(invalid="ignore"):
        return math.fsum(np.where(active, g[:, None] * psi * div, 0.0).ravel())


def total_distortion_binary(model: TransitionModel, theta: WeightMatrix, bpart: BinaryPartition, gamma) -> float:
    """``sum_i gamma_i KL(pi_i || theta_{group(i)})``."""
    g = _as_gamma(gamma)
    rows = theta.theta[bpart.assignment]
    terms = []
    for i in range(bpart.n):
        try:
            terms.append(g[i] * kl_row(model.pi[i], rows[i]))
        except AbsoluteContinuityViolation as exc:
            raise AbsoluteContinuityViolation((i, int(bpart.assignment[i]))) from exc
    return math.fsum(terms)


def mutual_information(part: ProbabilisticPartition, gamma, alpha=None) -> float:
    """``sum_ij gamma_i psi_ij log(psi_ij / alpha_j)`` in nats."""
    g = _as_gamma(gamma)
    if alpha is None:
        a = g @ part.psi
    else:
        a = alpha.alpha if isinstance(alpha, ClusterMarginals) else np.asarray(alpha, float)
    terms = g[:, None] * _xlogy_ratio(part.psi, np.broadcast_to(a, part.psi.shape))
    return math.fsum(terms.ravel())


def conditional_neg_entropy(part: ProbabilisticPartition, gamma) -> float:
    """``sum_ij gamma_i psi_ij log psi_ij``: the penalty of the entropy variant."""
    g = _as_gamma(gamma)
    return math.fsum((g[:, None] * _xlogy_ratio(part.psi, np.ones_like(part.psi))).ravel())


def partition_entropy(part: ProbabilisticPartition) -> float:
    return max(-math.fsum(_xlogy_ratio(part.psi, np.ones_like(part.psi)).ravel()), 0.0)


def partition_cross_entropy(prev: ProbabilisticPartition, cur: ProbabilisticPartition) -> float:
    """``-sum_ij cur_ij log prev_ij``; ``inf`` when ``cur`` puts mass where ``prev`` has none."""
    c, p = cur.psi, prev.psi
    if c.shape != p.shape:
        return math.inf
    if np.any((c > 0) & (p <= 0)):
        return math.inf
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(c > 0, -c * np.log(p), 0.0)
    return math.fsum(terms.ravel())


def printed_information_term(part: ProbabilisticPartition, gamma, alpha) -> float:
    """``sum_j alpha_j sum_i psi_ij log(psi_ij / gamma_i)``, kept for audit only."""
    a = alpha.alpha if isinstance(alpha, ClusterMarginals) else np.asarray(alpha, float)
    return _printed_term(part.psi, _as_gamma(gamma), a)


def _printed_term(psi: np.ndarray, g: np.ndarray, a: np.ndarray) -> float:
    inner = _xlogy_ratio(psi, np.broadcast_to(g[:, None], psi.shape)).sum(axis=0)
    return math.fsum(a * inner)


@dataclass(frozen=True)
class EnergyBreakdown:
    """Components of the free energy ``D + penalty / beta``.

    For the mutual-information variant ``penalty == mutual_information``;
    for the entropy variant it is the gamma-weighted negative conditional
    entropy of the partition.  ``printed_free_energy`` evaluates the
    minus-sign form with the alternative information expression.
    """

    expected_distortion: float
    mutual_information: float
    free_energy: float
    beta: float
    penalty: float
    printed_free_energy: float
    variant: str = MUTUAL_INFORMATION


def free_energy(
    model: TransitionModel,
    theta: WeightMatrix,
    part: ProbabilisticPartition,
    gamma,
    alpha,
    beta: float,
    variant: str = MUTUAL_INFORMATION,
) -> EnergyBreakdown:
    if beta <= 0:
        raise ValueError("beta must be positive")
    d = expected_distortion(model, theta, part, gamma)
    mi = mutual_information(part, gamma, alpha)
    penalty = mi if variant == MUTUAL_INFORMATION else conditional_neg_entropy(part, gamma)
    printed = d - printed_information_term(part, gamma, alpha) / beta
    return EnergyBreakdown(
        expected_distortion=d,
        mutual_information=mi,
        free_energy=d + penalty / beta,
        beta=float(beta),
        penalty=penalty,
        printed_free_energy=printed,
        variant=variant,
    )
