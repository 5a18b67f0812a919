from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_chain
from voiagg.chain import NcdSpec, generate_ncd, realize_ncd, stationary
from voiagg.errors import EmptyGroup
from voiagg.joint import aggregate, group_sums, lifting, reduce_chain, weight_matrix
from voiagg.partition import BinaryPartition, ProbabilisticPartition


def test_single_group(small_chain):
    model, gamma = small_chain
    lift, theta, agg = reduce_chain(model, gamma, ProbabilisticPartition.ones(model.n))
    assert np.allclose(lift.u[:, 0], gamma.gamma, atol=1e-15)
    assert np.allclose(theta.theta[0], gamma.gamma, atol=1e-12)
    assert np.allclose(agg.phi, [[1.0]], atol=1e-12)


def test_binary_lifting_masks_gamma(small_chain):
    model, gamma = small_chain
    bp = BinaryPartition(np.array([0, 1, 0, 1, 1]), 2)
    u = lifting(gamma, bp.lift()).u
    g = gamma.gamma
    for j in range(2):
        mask = bp.assignment == j
        expect = np.where(mask, g, 0) / g[mask].sum()
        assert np.allclose(u[:, j], expect, atol=1e-15)


def test_identity_partition_recovers_chain(small_chain):
    model, gamma = small_chain
    _, theta, agg = reduce_chain(model, gamma, ProbabilisticPartition(np.eye(model.n)))
    assert np.max(np.abs(agg.phi - model.pi)) <= 1e-12
    assert np.max(np.abs(theta.theta - model.pi)) <= 1e-12


def test_decoupled_blocks_stay_in_block():
    spec = realize_ncd(NcdSpec((2, 3), 0.0), 1)
    model = generate_ncd(spec, 1)
    part = BinaryPartition(spec.labels, 2).lift()
    gamma = np.array([0.1, 0.1, 0.3, 0.2, 0.3])
    theta = weight_matrix(model, lifting(gamma, part)).theta
    assert np.all(theta[0, 2:] == 0) and np.all(theta[1, :2] == 0)


def test_column_summation_matches_product(ncd4):
    model, gamma = ncd4
    bp = BinaryPartition(np.array([0, 0, 0, 1, 1, 2, 2, 3, 3]), 4)
    _, theta, agg = reduce_chain(model, gamma, bp.lift())
    assert np.max(np.abs(group_sums(theta, bp.assignment) - agg.phi)) <= 1e-14


def test_empty_group_raises(small_chain):
    _, gamma = small_chain
    psi = np.zeros((5, 2))
    psi[:, 0] = 1
    with pytest.raises(EmptyGroup):
        lifting(gamma, ProbabilisticPartition(psi))


def test_provenance_recorded(small_chain):
    model, gamma = small_chain
    part = ProbabilisticPartition.ones(model.n)
    agg = aggregate(weight_matrix(model, lifting(gamma, part)), part, beta=2.0)
    assert agg.provenance == {"beta": 2.0}


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 8), st.integers(1, 4), st.integers(0, 10_000))
def test_stochasticity(n, m, seed):
    model = random_chain(seed, n)
    gamma = stationary(model)
    part = ProbabilisticPartition.random(n, m, np.random.default_rng(seed))
    lift, theta, agg = reduce_chain(model, gamma, part)
    assert np.max(np.abs(lift.u.sum(axis=0) - 1)) <= 1e-12
    assert np.max(np.abs(theta.theta.sum(axis=1) - 1)) <= 1e-12
    assert np.max(np.abs(agg.phi.sum(axis=1) - 1)) <= 1e-12
    assert agg.phi.min() >= 0
