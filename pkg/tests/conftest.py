from __future__ import annotations

import numpy as np
import pytest

from voiagg import fixtures
from voiagg.chain import NcdSpec, TransitionModel, generate_ncd, random_chain_from_limit, stationary


def random_chain(seed: int, n: int, sparsity: float = 0.3) -> TransitionModel:
    rng = np.random.default_rng(seed)
    return random_chain_from_limit(rng.dirichlet(np.ones(n)), sparsity, seed)


@pytest.fixture
def two_block():
    """Well separated 6-state chain with blocks {0,1,2} and {3,4,5}."""
    model = generate_ncd(NcdSpec((3, 3), 0.02), 11)
    return model, stationary(model)


@pytest.fixture
def small_chain():
    model = random_chain(3, 5)
    return model, stationary(model)


@pytest.fixture(scope="session")
def ncd4():
    model = fixtures.load("ncd4")
    return model, stationary(model)


@pytest.fixture(scope="session")
def duplicated():
    model = fixtures.load("duplicated")
    return model, stationary(model)


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criteria (slow)")


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
