"""Common fixtures and oracles for testing"""

import itertools

import numpy as np
import pytest

from infoflow.channel import binary_symmetric
from infoflow.tree import TreeSpec, build_complete_dary

## Add --runslow option
# see: https://docs.pytest.org/en/latest/example/simple.html#control-skipping-of-tests-according-to-command-line-option


def pytest_addoption(parser):
    parser.addoption(
        "--runslow", action="store_true", default=False, help="run slow tests"
    )


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: mark test as slow to run")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        # --runslow given in cli: do not skip slow tests
        return
    skip_slow = pytest.mark.skip(reason="need --runslow option to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


## Test instances


@pytest.fixture
def bsc025():
    return binary_symmetric(0.25)


@pytest.fixture
def bsc045():
    return binary_symmetric(0.45)


@pytest.fixture
def bsc050():
    return binary_symmetric(0.5)


# d=2, g=1 star used for the hand-derived values
@pytest.fixture
def star(bsc025):
    return build_complete_dary(2, 1, bsc025)


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)


## Brute-force oracle


def brute_force_likelihood(tree: TreeSpec, states) -> np.ndarray:
    """Pr(pattern | root state) summed over all internal-node states."""
    internal = [n for n in tree.preorder if tree.children[n]]
    hidden = [n for n in internal if n != tree.root]
    combos = list(itertools.product(range(tree.size), repeat=len(hidden)))
    grid = np.array(combos, dtype=int).reshape(len(combos), len(hidden))
    rho = np.zeros(tree.size)
    for root_state in range(tree.size):
        value = {tree.root: np.full(len(grid), root_state)}
        value.update({n: grid[:, k] for k, n in enumerate(hidden)})
        for leaf, state in zip(tree.leaves, states):
            value[leaf] = np.full(len(grid), state)
        weight = np.ones(len(grid))
        for parent in internal:
            for child in tree.children[parent]:
                matrix = tree.channel(parent, child).matrix
                weight *= matrix[value[parent], value[child]]
        rho[root_state] = weight.sum()
    return rho


@pytest.fixture
def brute_force():
    return brute_force_likelihood
