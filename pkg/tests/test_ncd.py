from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from voiagg.chain import NcdSpec, TransitionModel, generate_ncd, realize_ncd, stationary
from voiagg.joint import reduce_chain
from voiagg.ncd import (
    analyse,
    approx_aggregate,
    block_aggregate,
    block_stationary_vectors,
    fit_loglog,
    stationary_error_experiment,
)
from voiagg.partition import BinaryPartition


def loop_block_aggregate(pi, gamma, labels, m):
    phi = np.zeros((m, m))
    for a in range(m):
        members = [p for p in range(len(labels)) if labels[p] == a]
        mass = sum(gamma[p] for p in members)
        for b in range(m):
            phi[a, b] = sum(gamma[p] / mass * sum(pi[p, q] for q in range(len(labels)) if labels[q] == b) for p in members)
    return phi


def test_zero_coupling_identity():
    res = analyse(NcdSpec((3, 2), 0.0), 0)
    assert np.array_equal(res.phi_formula, np.eye(2)) and res.l1_error == 0.0
    spec = realize_ncd(NcdSpec((3, 2), 0.0), 0)
    model = generate_ncd(spec, 0)
    gamma = np.full(5, 0.2)
    assert np.allclose(block_aggregate(model, gamma, spec), np.eye(2), atol=1e-15)


def test_single_block():
    spec = realize_ncd(NcdSpec((4,), 0.0), 1)
    model = generate_ncd(spec, 1)
    assert np.allclose(block_aggregate(model, stationary(model), spec), [[1.0]])


@pytest.mark.parametrize("sizes,eps,seed", [((3, 3), 0.02, 0), ((2, 4), 0.05, 1), ((3, 2, 2, 2), 0.03, 2)])
def test_formula_matches_pipeline_and_loop(sizes, eps, seed):
    spec = realize_ncd(NcdSpec(sizes, eps), seed)
    model = generate_ncd(spec, seed)
    gamma = stationary(model)
    phi = block_aggregate(model, gamma, spec)
    _, _, agg = reduce_chain(model, gamma, BinaryPartition(spec.labels, spec.m).lift())
    assert np.max(np.abs(phi - agg.phi)) <= 1e-10
    assert np.max(np.abs(phi - loop_block_aggregate(model.pi, gamma.gamma, spec.labels, spec.m))) <= 1e-14
    assert np.max(np.abs(phi.sum(axis=1) - 1)) <= 1e-10


def test_block_vectors_are_block_equilibria():
    spec = realize_ncd(NcdSpec((3, 2), 0.02), 3)
    v = block_stationary_vectors(spec)
    pi_star = spec.pi_star
    assert np.allclose(v @ pi_star, v, atol=1e-12)
    assert np.allclose(np.bincount(spec.labels, weights=v), 1.0)
    phi = approx_aggregate(generate_ncd(spec, 3), spec)
    assert np.allclose(phi.sum(axis=1), 1.0, atol=1e-12)


def test_error_shrinks_with_coupling():
    spec = NcdSpec((3, 3, 3), 0.0)
    rep = stationary_error_experiment(spec, [0.08, 0.04, 0.02, 0.01], range(3))
    means = [rep.mean_error(e) for e in (0.08, 0.04, 0.02, 0.01)]
    assert all(e >= 0 for _, _, e in rep.points)
    assert all(b < a for a, b in zip(means, means[1:]))
    # entrywise the approximate aggregate is second order in epsilon; the
    # stationary law of the reduced chain amplifies that by 1/epsilon
    assert 1.8 <= rep.phi_slope <= 2.2
    assert 0.8 <= rep.slope <= 1.2


def test_same_seed_shares_structure():
    a = analyse(NcdSpec((3, 3), 0.02), 5)
    b = analyse(NcdSpec((3, 3), 0.01), 5)
    assert a.l1_error > b.l1_error > 0


def test_fit_loglog_exact_power():
    eps = np.array([0.1, 0.05, 0.02])
    slope, intercept, r2 = fit_loglog(eps, 3 * eps**2)
    assert slope == pytest.approx(2.0) and intercept == pytest.approx(np.log(3)) and r2 == pytest.approx(1.0)
