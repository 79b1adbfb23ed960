"""Tests for channel validation, equilibria and contraction constants"""

from hypothesis import given, settings, strategies as st
import numpy as np
import pytest

from infoflow.channel import (
    ContractionMode,
    apply_to_normalized,
    binary_symmetric,
    contraction_constant,
    is_primitive,
    jukes_cantor,
    random_primitive_channel,
    random_reversible_channel,
    stationary_distribution,
    validate_channel,
    wielandt_exponent,
)
from infoflow.errors import (
    DimensionMismatchError,
    ModeUnavailableError,
    NotNormalizedError,
    NotPrimitiveError,
    NotStochasticError,
)
from infoflow.io import load_channel
from infoflow.measures import pi_norm

ASYMMETRIC = [[0.9, 0.1], [0.3, 0.7]]


def power_iteration(matrix):
    start = np.full(len(matrix), 1.0 / len(matrix))
    return start @ np.linalg.matrix_power(np.asarray(matrix), 2**30)


def random_normalized(pi, rng, n):
    """n random normalized likelihood vectors for the equilibrium pi."""
    raw = rng.dirichlet(np.ones(len(pi)) * 0.5, size=n)
    return raw / (raw @ pi)[:, None]


def contraction_ratios(channel, vectors):
    before = pi_norm(vectors - 1.0, channel.pi)
    after = pi_norm(vectors @ channel.matrix.T - 1.0, channel.pi)
    keep = before > 1e-12
    return after[keep] / before[keep]


## Validation


def test_symmetric_channel():
    channel = validate_channel([[0.75, 0.25], [0.25, 0.75]])
    assert channel.pi == pytest.approx([0.5, 0.5], abs=1e-12)
    assert channel.reversible
    assert channel.size == 2 and channel.K == 1


def test_asymmetric_equilibrium():
    channel = validate_channel(ASYMMETRIC)
    assert channel.pi == pytest.approx([0.75, 0.25], abs=1e-12)
    assert channel.pi == pytest.approx(power_iteration(ASYMMETRIC), abs=1e-10)


def test_periodic_channel_rejected():
    with pytest.raises(NotPrimitiveError):
        validate_channel([[0, 1], [1, 0]])


def test_reducible_channel_rejected():
    with pytest.raises(NotPrimitiveError):
        validate_channel([[1.0, 0.0], [0.5, 0.5]])


@pytest.mark.parametrize(
    "matrix",
    [
        [[0.7, 0.2], [0.25, 0.75]],
        [[1.2, -0.2], [0.5, 0.5]],
        [[0.5, float("nan")], [0.5, 0.5]],
    ],
)
def test_not_stochastic(matrix):
    with pytest.raises(NotStochasticError):
        validate_channel(matrix)


@pytest.mark.parametrize(
    "matrix",
    [[[1.0]], [[0.5, 0.5]], [[0.5, 0.5], [1.0]], [0.5, 0.5]],
)
def test_bad_shapes(matrix):
    with pytest.raises(DimensionMismatchError):
        validate_channel(matrix)


def test_noiseless_channel_admitted():
    channel = binary_symmetric(0.0)
    assert not channel.primitive
    assert channel.pi.tolist() == [0.5, 0.5]
    assert contraction_constant(channel, "theta1") == pytest.approx(1.0)


def test_channel_file():
    channel = load_channel("data/channels/bsc_045.json")
    assert channel.matrix[0, 1] == pytest.approx(0.45)


def test_channel_is_read_only(bsc025):
    with pytest.raises(ValueError):
        bsc025.matrix[0, 0] = 1.0


## Primitivity


def test_wielandt_exponent():
    assert [wielandt_exponent(n) for n in (2, 3, 4)] == [2, 5, 10]


def test_primitive_with_structural_zeros():
    # Wielandt's extremal matrix needs the full exponent
    n = 4
    matrix = np.zeros((n, n))
    for i in range(n - 1):
        matrix[i, i + 1] = 1.0
    matrix[n - 1, 0] = 0.5
    matrix[n - 1, 1] = 0.5
    assert is_primitive(matrix)
    cycle = np.roll(np.eye(n), 1, axis=1)
    assert not is_primitive(cycle)


## Equilibrium


def test_stationary_three_states():
    matrix = [[0.8, 0.1, 0.1], [0.1, 0.8, 0.1], [0.1, 0.1, 0.8]]
    assert stationary_distribution(matrix) == pytest.approx(
        [1 / 3, 1 / 3, 1 / 3], abs=1e-12
    )


def test_random_channels_equilibrium(rng):
    for size in (2, 3, 4):
        for _ in range(10):
            channel = random_primitive_channel(size, rng)
            assert channel.pi.sum() == pytest.approx(1.0, abs=1e-12)
            assert np.all(channel.pi > 0)
            residual = channel.pi @ channel.matrix - channel.pi
            assert np.abs(residual).max() < 1e-10
            assert channel.pi == pytest.approx(
                power_iteration(channel.matrix), abs=1e-9
            )


def test_reversible_generator_keeps_pi(rng):
    pi = rng.dirichlet(np.ones(3))
    channel = random_reversible_channel(pi, rng)
    assert channel.reversible
    assert channel.pi == pytest.approx(pi, abs=1e-10)


## Spectrum


def test_profile_bsc025(bsc025):
    profile = bsc025.profile
    assert profile.theta1_abs == pytest.approx(0.5, abs=1e-12)
    assert profile.sigma1 == pytest.approx(0.5, abs=1e-12)
    assert profile.c_tight == pytest.approx(0.5, abs=1e-12)
    assert profile.c_general == pytest.approx(0.5, abs=1e-12)


def test_profile_bsc050(bsc050):
    assert bsc050.profile.theta1_abs == pytest.approx(0.0, abs=1e-12)
    assert bsc050.profile.sigma1 == pytest.approx(0.0, abs=1e-12)


def test_profile_asymmetric():
    channel = validate_channel(ASYMMETRIC)
    assert channel.reversible
    assert channel.profile.theta1_abs == pytest.approx(0.6, abs=1e-12)


def test_reconstruction(rng):
    for size in (2, 3, 4):
        channel = random_reversible_channel(rng.dirichlet(np.ones(size)), rng)
        profile = channel.profile
        assert profile.eigenvalues[0] == pytest.approx(1.0)
        assert profile.reconstruct() == pytest.approx(channel.matrix, abs=1e-8)
        assert 0 <= profile.theta1_abs < 1
        assert profile.sigma1 >= profile.theta1_abs - 1e-12
        assert profile.c_tight <= profile.c_general + 1e-10


def test_irreversible_has_no_eigen_constant():
    channel = load_channel("data/channels/cyclic.json")
    assert not channel.reversible
    assert channel.profile.theta1_abs is None
    with pytest.raises(ModeUnavailableError):
        contraction_constant(channel, ContractionMode.REVERSIBLE_EIG)


@pytest.mark.parametrize(
    "name, member",
    [
        ("reversible_eig", ContractionMode.REVERSIBLE_EIG),
        ("general_singular", ContractionMode.GENERAL_SINGULAR),
        ("tight_pi_operator", ContractionMode.TIGHT_PI_OPERATOR),
        ("TIGHT_PI_OPERATOR", ContractionMode.TIGHT_PI_OPERATOR),
    ],
)
def test_mode_names(bsc025, name, member):
    assert ContractionMode(name) is member
    assert contraction_constant(bsc025, name) == pytest.approx(
        contraction_constant(bsc025, member)
    )


@pytest.mark.parametrize("name", ["sigma2", "", 1])
def test_unknown_mode(bsc025, name):
    with pytest.raises(ModeUnavailableError):
        contraction_constant(bsc025, name)


## Contraction


def test_apply_to_normalized(bsc025):
    out = apply_to_normalized(bsc025, [2.0, 0.0])
    assert out.tolist() == [1.5, 0.5]
    assert pi_norm(out - 1, bsc025.pi) == pytest.approx(
        0.5 * pi_norm(np.array([1.0, -1.0]), bsc025.pi)
    )
    assert apply_to_normalized(bsc025, [1.0, 1.0]).tolist() == [1.0, 1.0]


def test_apply_rejects_unnormalized(bsc025):
    with pytest.raises(NotNormalizedError):
        apply_to_normalized(bsc025, [1.0, 0.0])
    with pytest.raises(DimensionMismatchError):
        apply_to_normalized(bsc025, [1.0, 1.0, 1.0])


def test_reversible_contraction(rng):
    for _ in range(100):
        size = int(rng.integers(2, 5))
        channel = random_reversible_channel(rng.dirichlet(np.ones(size)), rng)
        vectors = random_normalized(channel.pi, rng, 1000)
        mapped = vectors @ channel.matrix.T
        assert np.abs(mapped @ channel.pi - 1).max() < 1e-10
        ratios = contraction_ratios(channel, vectors)
        assert ratios.max() <= channel.profile.theta1_abs + 1e-10


def test_general_contraction(rng):
    for _ in range(100):
        channel = random_primitive_channel(int(rng.integers(2, 5)), rng)
        ratios = contraction_ratios(
            channel, random_normalized(channel.pi, rng, 1000)
        )
        assert ratios.max() <= channel.profile.c_tight + 1e-10
        assert ratios.max() <= channel.profile.c_general + 1e-10


@settings(max_examples=50, deadline=None)
@given(
    p=st.floats(min_value=0.01, max_value=0.99),
    K=st.integers(min_value=1, max_value=4),
)
def test_jukes_cantor_spectrum(p, K):
    channel = jukes_cantor(K, p)
    assert channel.pi == pytest.approx(np.full(K + 1, 1 / (K + 1)))
    assert channel.profile.theta1_abs == pytest.approx(
        abs(1 - p - p / K), abs=1e-10
    )
