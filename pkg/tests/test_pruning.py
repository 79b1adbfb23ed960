"""Tests for likelihood pruning, posteriors and forward sampling"""

import math

import numpy as np
import pytest

from infoflow.channel import binary_symmetric, random_reversible_channel
from infoflow.errors import (
    BadPriorError,
    DimensionMismatchError,
    PatternImpossibleError,
    StateOutOfRangeError,
)
from infoflow.io import load_tree
from infoflow.measures import pi_norm
from infoflow.pruning import (
    LikelihoodState,
    forward_sample,
    leaf_likelihood,
    map_states,
    pattern_probability,
    posterior,
    prune,
    prune_batch,
    prune_clades,
    sample_patterns,
)
from infoflow.tree import (
    Pattern,
    build_complete_dary,
    enumerate_patterns,
    pattern_block,
    pattern_count,
    random_tree,
)

UNIFORM = [0.5, 0.5]


## Leaves


def test_leaf_likelihood():
    assert leaf_likelihood(0, 1).tolist() == [1.0, 0.0]
    assert leaf_likelihood(3, 3).tolist() == [0.0, 0.0, 0.0, 1.0]
    with pytest.raises(StateOutOfRangeError):
        leaf_likelihood(5, 3)


## Star values


def test_star_agreeing_pattern(star):
    state = prune(star, Pattern.parse("00"))
    assert state.rho == pytest.approx([0.5625, 0.0625], abs=1e-12)
    assert state.rho_tilde == pytest.approx([1.8, 0.2], abs=1e-12)
    assert state.memory_norm == pytest.approx(0.8, abs=1e-12)
    assert state.pr_pi == pytest.approx(0.3125, abs=1e-12)


def test_star_symmetric_pattern(star):
    state = prune(star, Pattern.parse("01"))
    assert state.rho_tilde == pytest.approx([1.0, 1.0], abs=1e-12)
    assert state.memory == pytest.approx([0.0, 0.0], abs=1e-12)
    assert state.pr_pi == pytest.approx(0.1875, abs=1e-12)


def test_memoryless_channel(bsc050):
    tree = build_complete_dary(2, 2, bsc050)
    batch = prune_batch(tree, pattern_block(tree, 0, pattern_count(tree)))
    assert np.abs(batch.rho_tilde - 1.0).max() < 1e-12
    assert np.exp(batch.log_pr_pi) == pytest.approx(np.full(16, 1 / 16))


def test_single_node_tree(bsc025):
    tree = build_complete_dary(2, 0, bsc025)
    state = prune(tree, Pattern.parse("1"))
    assert state.rho_tilde.tolist() == [0.0, 2.0]
    assert state.rho == pytest.approx([0.0, 1.0])


def test_prune_clades(star):
    clades = prune_clades(star, Pattern.parse("01"))
    assert len(clades.children) == 2
    left, channel = clades.children[0]
    assert left.rho_tilde.tolist() == [2.0, 0.0]
    assert left.log_pr_pi == pytest.approx(math.log(0.5))
    assert channel.matrix[0, 1] == pytest.approx(0.25)
    assert clades.root.pr_pi == pytest.approx(0.1875)


def test_bad_patterns(star):
    with pytest.raises(DimensionMismatchError):
        prune(star, Pattern.parse("000"))
    with pytest.raises(StateOutOfRangeError):
        prune(star, Pattern.parse("03"))
    with pytest.raises(DimensionMismatchError):
        prune_batch(star, [0, 1])


def test_impossible_pattern():
    tree = build_complete_dary(2, 1, binary_symmetric(0.0))
    with pytest.raises(PatternImpossibleError):
        prune(tree, Pattern.parse("01"))
    batch = prune_batch(tree, pattern_block(tree, 0, 4))
    assert batch.possible.tolist() == [True, False, False, True]
    assert batch.rho_tilde[1].tolist() == [1.0, 1.0]
    with pytest.raises(PatternImpossibleError):
        batch.state(1, tree.pi)


def test_deep_tree_does_not_underflow(bsc025):
    tree = build_complete_dary(2, 12, bsc025)
    state = prune(tree, Pattern((0,) * tree.n_leaves))
    assert np.isfinite(state.log_pr_pi)
    assert state.log_pr_pi < -700
    assert state.pi @ state.rho_tilde == pytest.approx(1.0, abs=1e-10)
    assert state.rho_tilde[0] > state.rho_tilde[1]


## Oracle


def random_oracle_tree(rng):
    size = int(rng.integers(2, 5))
    pi = rng.dirichlet(np.ones(size))
    channels = [random_reversible_channel(pi, rng) for _ in range(3)]
    while True:
        tree = random_tree(rng, channels)
        hidden = len(tree.postorder) - 1
        if tree.size**hidden <= 4096:
            return tree


def test_brute_force_oracle(rng, brute_force):
    for _ in range(20):
        tree = random_oracle_tree(rng)
        count = pattern_count(tree)
        if count <= 500:
            block = pattern_block(tree, 0, count)
        else:
            block = rng.integers(0, tree.size, size=(500, tree.n_leaves))
        batch = prune_batch(tree, block)
        rho = batch.rho_tilde * np.exp(batch.log_pr_pi)[:, None]
        for row, states in enumerate(block):
            expected = brute_force(tree, states)
            assert rho[row] == pytest.approx(expected, rel=1e-10, abs=1e-300)


def test_oracle_on_multitree(brute_force):
    tree = load_tree("data/multitree.yaml")
    pattern = Pattern.parse("01302002")
    state = prune(tree, pattern)
    expected = brute_force(tree, pattern.states)
    assert state.rho == pytest.approx(expected, rel=1e-10)


## Normalized likelihood invariants


@pytest.mark.parametrize("p", [0.25, 0.45])
@pytest.mark.parametrize("g", [1, 2, 3])
def test_memory_vector_invariants(p, g):
    tree = build_complete_dary(2, g, binary_symmetric(p))
    pi = tree.pi
    batch = prune_batch(tree, pattern_block(tree, 0, pattern_count(tree)))
    rho_tilde = batch.rho_tilde
    memory = rho_tilde - 1.0
    assert np.abs(rho_tilde @ pi - 1.0).max() < 1e-10
    assert np.abs(memory @ pi).max() < 1e-10
    squared = pi_norm(memory, pi) ** 2
    assert np.abs(squared - (pi_norm(rho_tilde, pi) ** 2 - 1)).max() < 1e-10
    bound = math.sqrt(1 / pi.min() - 1)
    assert pi_norm(memory, pi).max() <= bound + 1e-10
    assert np.all(rho_tilde >= 0)


def test_probabilities_sum_to_one(rng):
    tree = random_oracle_tree(rng)
    while pattern_count(tree) > 4096:
        tree = random_oracle_tree(rng)
    batch = prune_batch(tree, pattern_block(tree, 0, pattern_count(tree)))
    rho = batch.rho_tilde * np.exp(batch.log_pr_pi)[:, None]
    mu = rng.dirichlet(np.ones(tree.size))
    assert math.fsum(rho @ mu) == pytest.approx(1.0, abs=1e-9)
    assert math.fsum(rho @ tree.pi) == pytest.approx(1.0, abs=1e-9)


## Priors and posteriors


def test_pattern_probability(star):
    state = prune(star, Pattern.parse("00"))
    assert pattern_probability(state, UNIFORM) == pytest.approx(0.3125)
    assert pattern_probability(state, star.pi) == pytest.approx(
        state.pr_pi, rel=1e-12
    )
    assert pattern_probability(state, [0.2, 0.8]) == pytest.approx(0.1625)
    total = sum(
        pattern_probability(prune(star, p), [0.2, 0.8])
        for p in enumerate_patterns(star)
    )
    assert total == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize(
    "mu",
    [[0.0, 1.0], [-0.1, 1.1], [0.3, 0.6], [0.5, 0.5, 0.0], [np.nan, 0.5]],
)
def test_bad_prior(star, mu):
    state = prune(star, Pattern.parse("00"))
    with pytest.raises((BadPriorError, DimensionMismatchError)):
        posterior(state, mu)


def test_posterior(star):
    post = posterior(prune(star, Pattern.parse("00")), UNIFORM)
    assert post.r == pytest.approx([0.9, 0.1], abs=1e-12)
    assert post.map_state == 0
    assert post.map_prob == pytest.approx(0.9)
    skewed = posterior(prune(star, Pattern.parse("00")), [0.05, 0.95])
    assert skewed.r.sum() == pytest.approx(1.0, abs=1e-12)
    assert skewed.map_state == 1


def test_uninformative_posterior():
    pi = np.array([0.2, 0.3, 0.5])
    state = LikelihoodState(np.ones(3), math.log(0.1), pi)
    mu = np.array([0.1, 0.6, 0.3])
    assert np.abs(posterior(state, mu).r - mu).max() < 1e-14


def test_posterior_tie(star):
    post = posterior(prune(star, Pattern.parse("10")), UNIFORM)
    assert post.r == pytest.approx([0.5, 0.5])
    assert post.map_state == 0


def test_map_states():
    rho_tilde = np.array([[1.8, 0.2], [1.0, 1.0], [0.2, 1.8]])
    assert map_states(rho_tilde, np.array(UNIFORM)).tolist() == [0, 0, 1]


## Sampling


def test_forward_sample_is_deterministic(star):
    assert forward_sample(star, UNIFORM, 7) == forward_sample(
        star, UNIFORM, 7
    )


def test_noiseless_sampling():
    tree = build_complete_dary(3, 2, binary_symmetric(0.0))
    roots, patterns = sample_patterns(tree, UNIFORM, 200, seed=3)
    assert np.all(patterns == roots[:, None])
    root, pattern = forward_sample(tree, UNIFORM, 11)
    assert set(pattern.states) == {root}


def test_sampling_rejects_bad_prior(star):
    with pytest.raises(BadPriorError):
        forward_sample(star, [1.0, 0.0], 1)


def sample_frequencies(tree, mu, n, seed):
    _, patterns = sample_patterns(tree, mu, n, seed)
    powers = tree.size ** np.arange(tree.n_leaves - 1, -1, -1)
    return np.bincount(patterns @ powers, minlength=pattern_count(tree)) / n


def test_sample_frequencies(star):
    # 4 patterns, chi-square with 3 degrees of freedom at the 0.1% level
    n = 10**5
    freq = sample_frequencies(star, star.pi, n, seed=2024)
    batch = prune_batch(star, pattern_block(star, 0, 4))
    expected = np.exp(batch.log_pr_pi)
    chi2 = n * np.sum((freq - expected) ** 2 / expected)
    assert chi2 < 16.27


@pytest.mark.slow
def test_sample_frequencies_large(star):
    n = 10**6
    freq = sample_frequencies(star, star.pi, n, seed=99)
    sigma = math.sqrt(0.3125 * 0.6875 / n)
    assert abs(freq[0] - 0.3125) <= 3 * sigma
