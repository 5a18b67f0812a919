"""Block aggregates of nearly-completely-decomposable chains and their stationary error."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .chain import NcdSpec, TransitionModel, _as_gamma, generate_ncd, realize_ncd, stationary
from .joint import reduce_chain
from .partition import BinaryPartition


def _block_sums(mat: np.ndarray, weights: np.ndarray, labels: np.ndarray, m: int) -> np.ndarray:
    # phi[I, J] = sum_{p in I} weights_p sum_{q in J} mat[p, q]
    onehot = (labels[:, None] == np.arange(m)[None, :]).astype(float)
    return onehot.T @ (weights[:, None] * mat) @ onehot


def block_aggregate(model: TransitionModel, gamma, spec: NcdSpec) -> np.ndarray:
    """``phi[I, J] = sum_{p in I} (gamma_p / gamma_I) sum_{q in J} pi[p, q]``."""
    g = _as_gamma(gamma)
    labels = spec.labels
    mass = np.bincount(labels, weights=g, minlength=spec.m)
    return _block_sums(model.pi, g / mass[labels], labels, spec.m)


def block_stationary_vectors(spec: NcdSpec) -> np.ndarray:
    """Concatenated stationary vectors of the diagonal blocks of ``pi_star``.

    Entry ``p`` is the within-block equilibrium probability of state ``p``
    when the coupling is switched off.
    """
    if spec.pi_star is None:
        raise ValueError("NcdSpec has no pi_star; realise it first")
    pi_star = np.asarray(spec.pi_star)
    labels = spec.labels
    v = np.empty(spec.n)
    for block in range(spec.m):
        idx = np.flatnonzero(labels == block)
        v[idx] = stationary(TransitionModel(pi_star[np.ix_(idx, idx)])).gamma
    return v


def approx_aggregate(model: TransitionModel, spec: NcdSpec) -> np.ndarray:
    """``block_aggregate`` with ``gamma_p / gamma_I`` replaced by the decoupled block equilibria."""
    return _block_sums(model.pi, block_stationary_vectors(spec), spec.labels, spec.m)


@dataclass(frozen=True)
class NcdAnalysisResult:
    #: exact block aggregate (stationary weights of the full chain)
    phi_formula: np.ndarray
    #: aggregate produced by the joint-model pipeline at the planted partition
    phi_solver: np.ndarray
    #: aggregate with the decoupled block equilibria as weights
    phi_approx: np.ndarray
    #: l1 distance between the stationary law of phi_approx and the block masses
    l1_error: float
    epsilon: float
    seed: int | None = None
    #: largest entrywise gap between phi_approx and phi_formula
    phi_error: float = 0.0


def analyse(spec: NcdSpec, seed: int) -> NcdAnalysisResult:
    """Generate one chain and compare its exact and approximate block aggregates."""
    spec = realize_ncd(spec, seed)
    model = generate_ncd(spec, seed)
    labels = spec.labels
    if spec.epsilon == 0:
        # the blocks decouple: every aggregate is the identity and both
        # stationary quantities reduce to the same block-exact masses
        eye = np.eye(spec.m)
        return NcdAnalysisResult(eye, eye, eye, 0.0, 0.0, seed)
    gamma = stationary(model)
    phi_formula = block_aggregate(model, gamma, spec)
    _, _, agg = reduce_chain(model, gamma, BinaryPartition(labels, spec.m).lift())
    phi_approx = approx_aggregate(model, spec)
    masses = np.bincount(labels, weights=gamma.gamma, minlength=spec.m)
    approx_gamma = stationary(TransitionModel(phi_approx)).gamma
    err = math.fsum(np.abs(approx_gamma - masses))
    phi_error = float(np.max(np.abs(phi_approx - phi_formula)))
    return NcdAnalysisResult(phi_formula, agg.phi, phi_approx, err, float(spec.epsilon), seed, phi_error)


@dataclass(frozen=True)
class ScalingReport:
    #: (epsilon, seed, l1_error) per cell
    points: list
    slope: float
    intercept: float
    r2: float
    #: log-log slope of the entrywise aggregate error, for comparison
    phi_slope: float = math.nan

    def mean_error(self, epsilon: float) -> float:
        vals = [e for eps, _, e in self.points if eps == epsilon]
        return float(np.mean(vals))


def fit_loglog(eps, err):
    """Least-squares line through ``(log eps, log err)``; returns ``(slope, intercept, r2)``."""
    x = np.log(np.asarray(eps, float))
    y = np.log(np.asarray(err, float))
    if len(x) < 2 or np.ptp(x) == 0:
        return math.nan, math.nan, math.nan
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss if ss > 0 else 1.0
    return float(slope), float(intercept), float(r2)


def stationary_error_experiment(spec: NcdSpec, epsilons, seeds) -> ScalingReport:
    """Approximate-aggregate stationary error over an (epsilon, seed) grid.

    For a fixed seed the block matrix and coupling are the same at every
    epsilon, so only the coupling strength varies along a row of the grid.
    Cells with zero error are reported but left out of the log-log fit.
    """
    points = []
    phi_points = []
    for eps in epsilons:
        for seed in seeds:
            res = analyse(replace(spec, epsilon=float(eps)), int(seed))
            points.append((float(eps), int(seed), res.l1_error))
            phi_points.append((float(eps), res.phi_error))
    fit = [(e, v) for e, _, v in points if e > 0 and v > 0]
    slope, intercept, r2 = fit_loglog([e for e, _ in fit], [v for _, v in fit])
    phi_fit = [(e, v) for e, v in phi_points if e > 0 and v > 0]
    phi_slope = fit_loglog([e for e, _ in phi_fit], [v for _, v in phi_fit])[0]
    return ScalingReport(points, slope, intercept, r2, phi_slope)


__all__ = [
    "NcdAnalysisResult",
    "ScalingReport",
    "analyse",
    "approx_aggregate",
    "block_aggregate",
    "block_stationary_vectors",
    "fit_loglog",
    "stationary_error_experiment",
]
