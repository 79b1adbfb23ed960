"""Tests for L2(pi) geometry and the dependence factor"""

import math

from hypothesis import given, settings, strategies as st
import numpy as np
import pytest

from infoflow.channel import (
    binary_symmetric,
    jukes_cantor,
    random_reversible_channel,
)
from infoflow.config import Settings
from infoflow.errors import (
    DimensionMismatchError,
    MixedEquilibriaError,
    PatternImpossibleError,
)
from infoflow.measures import (
    centralize,
    dependence_report,
    euclidean_norm,
    expand_products,
    expansion_by_order,
    l1_norm,
    normalize,
    pi_inner,
    pi_norm,
    uniform_norm,
)
from infoflow.pruning import prune_batch, prune_clades
from infoflow.tree import (
    Pattern,
    build_complete_dary,
    pattern_block,
    pattern_count,
)

finite = st.floats(min_value=-10, max_value=10, allow_nan=False)


@st.composite
def weighted_vectors(draw, count=2):
    size = draw(st.integers(min_value=2, max_value=5))
    weights = draw(
        st.lists(
            st.floats(min_value=0.01, max_value=1.0),
            min_size=size,
            max_size=size,
        )
    )
    pi = np.array(weights) / sum(weights)
    vectors = [
        np.array(draw(st.lists(finite, min_size=size, max_size=size)))
        for _ in range(count)
    ]
    return pi, vectors


## Norms


def test_spec_norms():
    pi = np.array([0.5, 0.5])
    x = np.array([0.8, -0.8])
    assert float(pi_norm(x, pi)) == pytest.approx(0.8)
    assert float(uniform_norm(x)) == pytest.approx(0.8)
    assert float(euclidean_norm(x)) == pytest.approx(0.8 * math.sqrt(2))
    assert float(l1_norm(x)) == pytest.approx(1.6)


def test_stacked_vectors():
    pi = np.array([0.25, 0.75])
    stack = np.array([[1.0, 1.0], [4.0, 0.0]])
    assert pi_norm(stack, pi).tolist() == [1.0, 2.0]
    assert centralize(stack, pi).tolist() == [[0.0, 0.0], [3.0, -1.0]]
    with pytest.raises(DimensionMismatchError):
        pi_norm(stack, [0.5, 0.25, 0.25])


@settings(max_examples=200, deadline=None)
@given(weighted_vectors())
def test_norm_chain(data):
    pi, (x, _) = data
    norm = float(pi_norm(x, pi))
    assert norm <= float(uniform_norm(x)) + 1e-12
    assert norm <= float(euclidean_norm(x)) + 1e-12
    assert float(uniform_norm(x)) <= float(euclidean_norm(x)) + 1e-12
    assert float(euclidean_norm(x)) <= float(l1_norm(x)) + 1e-12
    assert norm >= math.sqrt(pi.min()) * float(euclidean_norm(x)) - 1e-12


def test_norm_chain_is_tight():
    x, pi = np.array([2.0, 0.0]), np.array([0.5, 0.5])
    assert float(pi_norm(x, pi)) == pytest.approx(math.sqrt(2))
    assert float(uniform_norm(x)) == pytest.approx(2.0)
    assert float(euclidean_norm(x)) == pytest.approx(2.0)
    # equality in ||x|| <= ||x||_pi / sqrt(min pi)
    assert float(pi_norm(x, pi)) / math.sqrt(pi.min()) == pytest.approx(
        float(euclidean_norm(x))
    )


@settings(max_examples=200, deadline=None)
@given(weighted_vectors())
def test_inner_product_properties(data):
    pi, (x, y) = data
    inner = float(pi_inner(x, y, pi))
    assert inner == pytest.approx(float(pi_inner(y, x, pi)))
    assert abs(inner) <= float(pi_norm(x, pi) * pi_norm(y, pi)) + 1e-9
    assert float(pi_norm(x + y, pi)) <= float(
        pi_norm(x, pi) + pi_norm(y, pi)
    ) + 1e-9


@settings(max_examples=200, deadline=None)
@given(weighted_vectors(count=1))
def test_centralize(data):
    pi, (x,) = data
    centered = centralize(x, pi)
    assert float(centered @ pi) == pytest.approx(0.0, abs=1e-9)
    assert centralize(centered, pi) == pytest.approx(centered, abs=1e-9)
    # Pythagoras between the mean and the centered part
    mean = float(x @ pi)
    assert float(pi_norm(x, pi)) ** 2 == pytest.approx(
        mean**2 + float(pi_norm(centered, pi)) ** 2, abs=1e-8
    )


def test_normalize():
    assert normalize([0.5625, 0.0625], [0.5, 0.5]) == pytest.approx(
        [1.8, 0.2]
    )
    with pytest.raises(PatternImpossibleError):
        normalize([0.0, 0.0], [0.5, 0.5])


## Dependence factor


def test_star_dependence(star):
    clades = prune_clades(star, Pattern.parse("00"))
    report = dependence_report(clades.children, star.pi, clades.root)
    assert report.d_factor == pytest.approx(1.25, abs=1e-12)
    assert report.pr_independent == pytest.approx(0.25, abs=1e-12)
    assert report.pr_pi == pytest.approx(0.3125, abs=1e-12)
    assert report.consistent
    for pi_part, sup_part in report.child_memory_norms:
        assert pi_part == pytest.approx(0.5)
        assert sup_part == pytest.approx(0.5)
    assert report.child_node_memory_norms == pytest.approx((1.0, 1.0))


def test_symmetric_pattern_is_independent(star):
    clades = prune_clades(star, Pattern.parse("01"))
    report = dependence_report(clades.children, star.pi, clades.root)
    assert report.d_factor == pytest.approx(0.75)
    assert report.pr_pi == pytest.approx(0.1875)


def test_dependence_needs_shared_equilibrium(star):
    clades = prune_clades(star, Pattern.parse("00"))
    with pytest.raises(MixedEquilibriaError):
        dependence_report(clades.children, [0.4, 0.6])
    with pytest.raises(DimensionMismatchError):
        dependence_report([], star.pi)


def tree_cases():
    rng = np.random.default_rng(5)
    skewed = random_reversible_channel(np.array([0.2, 0.3, 0.5]), rng)
    for d in (2, 3):
        for g in (1, 2):
            yield binary_symmetric(0.3), d, g
            yield skewed, d, g
    yield jukes_cantor(2, 0.4), 2, 2


@pytest.mark.parametrize("channel,d,g", list(tree_cases()))
def test_dependence_identity(channel, d, g):
    tree = build_complete_dary(d, g, channel)
    kids = tree.children[tree.root]
    batch = prune_batch(
        tree, pattern_block(tree, 0, pattern_count(tree)), keep=kids
    )
    product = np.ones_like(batch.rho_tilde)
    log_independent = np.zeros(len(batch))
    for kid in kids:
        vectors, logs = batch.nodes[kid]
        product *= vectors @ tree.channel(tree.root, kid).matrix.T
        log_independent += logs
    d_factor = product @ tree.pi
    gap = np.exp(np.log(d_factor) + log_independent - batch.log_pr_pi) - 1
    assert np.abs(gap).max() < 1e-10


def test_dependence_report_sampled(rng):
    tree = build_complete_dary(3, 2, jukes_cantor(2, 0.4))
    for states in rng.integers(0, 3, size=(50, tree.n_leaves)):
        clades = prune_clades(tree, Pattern(tuple(int(s) for s in states)))
        report = dependence_report(clades.children, tree.pi, clades.root)
        assert report.relative_gap < 1e-10


## Product expansion


def test_expansion_orders():
    m = [np.array([0.5, -0.5])] * 2
    assert expansion_by_order(m, [0.5, 0.5]) == pytest.approx([1, 0, 0.25])


def test_expansion_matches_product(rng):
    pi = np.array([0.2, 0.3, 0.5])
    for d in (1, 2, 4, 6):
        raw = rng.uniform(0.1, 3, size=(d, 3))
        memories = list(normalize(raw, pi) - 1.0)
        product, scalar = expand_products(memories, pi)
        assert scalar == pytest.approx(float(product @ pi), rel=1e-10)
        orders = expansion_by_order(memories, pi)
        assert len(orders) == d + 1
        # centred vectors contribute nothing at first order
        assert orders[1] == pytest.approx(0.0, abs=1e-12)


def test_expansion_cap():
    pi = np.array([0.5, 0.5])
    memories = [np.array([0.1, -0.1])] * 4
    with pytest.raises(DimensionMismatchError):
        expansion_by_order(memories, pi, Settings(expansion_max_d=3))
    product, scalar = expand_products(
        memories, pi, Settings(expansion_max_d=3)
    )
    assert scalar == pytest.approx(float(product @ pi))
