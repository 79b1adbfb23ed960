"""Noisy channels: validation, equilibrium and contraction constants.

A channel is an irreducible, aperiodic row-stochastic matrix P. Memory
vectors live in the pi-orthogonal complement of the ones vector and P
maps that subspace into itself; the contraction constants below bound
how much P can stretch them in the L2(pi) norm.

Examples
--------
>>> bsc = binary_symmetric(0.25)
>>> np.round(bsc.pi, 12).tolist()
[0.5, 0.5]
>>> round(contraction_constant(bsc, "theta1"), 12)
0.5
"""

from dataclasses import dataclass
from enum import Enum
from functools import cached_property
import logging
from typing import Optional, Union

import numpy as np
from numpy.typing import ArrayLike
from scipy import linalg

from .config import get_settings
from .errors import (
    DimensionMismatchError,
    ModeUnavailableError,
    NotNormalizedError,
    NotPrimitiveError,
    NotStochasticError,
    SingularSolveError,
)

logger = logging.getLogger(__name__)

STOCHASTIC_TOL = 1e-12
STATIONARY_TOL = 1e-10
NORMALIZED_TOL = 1e-10


class ContractionMode(str, Enum):
    """Enumeration of the contraction constants of a channel.

    Lookups also accept the lowercase member names.

    Examples
    --------
    >>> ContractionMode("general_singular") is ContractionMode("sigma1")
    True
    """

    REVERSIBLE_EIG = "theta1"
    GENERAL_SINGULAR = "sigma1"
    TIGHT_PI_OPERATOR = "tight"

    @classmethod
    def _missing_(cls, value):
        if isinstance(value, str) and value.upper() in cls.__members__:
            return cls.__members__[value.upper()]
        raise ModeUnavailableError(f"Unknown contraction mode: {value!r}")


@dataclass(frozen=True)
class SpectralProfile:
    """Spectral and contraction data of a channel.

    The eigen fields are only filled for reversible channels. Right
    eigenvectors are the columns of ``right_eigenvectors``; the matching
    left eigenvectors satisfy h_k = pi * v_k.
    """

    sigma1: float
    c_general: float
    c_tight: float
    theta1_abs: Optional[float] = None
    eigenvalues: Optional[np.ndarray] = None
    right_eigenvectors: Optional[np.ndarray] = None
    left_eigenvectors: Optional[np.ndarray] = None

    @property
    def reversible(self) -> bool:
        return self.eigenvalues is not None

    def reconstruct(self) -> Optional[np.ndarray]:
        """Rebuild P as the sum of theta_k v_k h_k^T."""
        if not self.reversible:
            return None
        return (
            self.right_eigenvectors
            * self.eigenvalues[np.newaxis, :]
            @ self.left_eigenvectors.T
        )

    def to_dict(self) -> dict:
        out = {
            "sigma1": self.sigma1,
            "c_general": self.c_general,
            "c_tight": self.c_tight,
            "theta1_abs": self.theta1_abs,
        }
        if self.reversible:
            out["eigenvalues"] = self.eigenvalues
        return out


@dataclass(frozen=True, eq=False)
class Channel:
    """A validated Markov transition matrix with its equilibrium."""

    matrix: np.ndarray
    pi: np.ndarray
    reversible: bool
    primitive: bool = True

    @property
    def size(self) -> int:
        """Alphabet cardinality K + 1."""
        return self.matrix.shape[0]

    @property
    def K(self) -> int:
        return self.size - 1

    @property
    def min_pi(self) -> float:
        return float(self.pi.min())

    @cached_property
    def profile(self) -> SpectralProfile:
        return spectral_profile(self)

    def to_dict(self) -> dict:
        return {
            "size": self.size,
            "matrix": self.matrix,
            "pi": self.pi,
            "reversible": self.reversible,
            "primitive": self.primitive,
        }


def wielandt_exponent(n: int) -> int:
    """Power at which a primitive n x n matrix is strictly positive.

    Examples
    --------
    >>> wielandt_exponent(2)
    2
    >>> wielandt_exponent(4)
    10
    """
    return n * n - 2 * n + 2


def _boolean_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return (a.astype(np.int64) @ b.astype(np.int64)) > 0


def is_primitive(matrix: ArrayLike) -> bool:
    """Test irreducibility and aperiodicity on the zero pattern.

    Uses boolean matrix powers up to the Wielandt bound so that tiny
    positive entries never underflow to zero.

    Examples
    --------
    >>> is_primitive([[0.0, 1.0], [1.0, 0.0]])
    False
    >>> is_primitive([[0.0, 1.0], [0.5, 0.5]])
    True
    """
    base = np.asarray(matrix) > 0
    exponent = wielandt_exponent(base.shape[0])
    result = np.eye(base.shape[0], dtype=bool)
    while exponent:
        if exponent & 1:
            result = _boolean_product(result, base)
        base = _boolean_product(base, base)
        exponent >>= 1
    return bool(result.all())


def stationary_distribution(matrix: ArrayLike) -> np.ndarray:
    """Solve pi^T P = pi^T with sum(pi) = 1.

    The singular system (P^T - I) pi = 0 is augmented with the
    normalization row and solved in the least squares sense; a rank
    below the alphabet size means the kernel is not one-dimensional.
    """
    P = np.asarray(matrix, dtype=float)
    n = P.shape[0]
    system = np.vstack([P.T - np.eye(n), np.ones((1, n))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    pi, _, rank, _ = linalg.lstsq(system, rhs)
    if rank < n:
        raise SingularSolveError(
            f"Equilibrium system has rank {rank}, expected {n}."
        )
    pi = pi / pi.sum()
    residual = np.max(np.abs(pi @ P - pi))
    if residual >= STATIONARY_TOL or np.any(pi <= 0):
        raise SingularSolveError(
            f"No strictly positive equilibrium (residual {residual:.3e}, "
            f"min entry {pi.min():.3e})."
        )
    logger.debug("Equilibrium %s, residual %.3e", pi, residual)
    return pi


def validate_channel(
    matrix: ArrayLike,
    *,
    reversibility_tol: Optional[float] = None,
    require_primitive: bool = True,
) -> Channel:
    """Validate a transition matrix and compute its equilibrium.

    Parameters
    ----------
    matrix
        Square row-stochastic matrix with at least two states.
    reversibility_tol
        Absolute tolerance on the detailed-balance residuals. Defaults
        to the configured value.
    require_primitive
        When False, reducible or periodic matrices are admitted; a doubly
        stochastic matrix then takes the uniform equilibrium. This is how
        the noiseless channel enters simulations.
    """
    if reversibility_tol is None:
        reversibility_tol = get_settings().reversibility_tol
    try:
        P = np.array(matrix, dtype=float)
    except (TypeError, ValueError) as err:
        raise DimensionMismatchError(
            f"Channel matrix is not a rectangular array: {matrix!r}"
        ) from err
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise DimensionMismatchError(
            f"Channel matrix must be square, got shape {P.shape}."
        )
    if P.shape[0] < 2:
        raise DimensionMismatchError(
            "Channel matrix needs at least two states."
        )
    if not np.all(np.isfinite(P)) or np.any(P < 0):
        raise NotStochasticError("Channel matrix has a negative entry.")
    row_error = np.abs(P.sum(axis=1) - 1.0)
    if np.any(row_error > STOCHASTIC_TOL):
        bad = int(np.argmax(row_error))
        raise NotStochasticError(
            f"Row {bad} sums to {P[bad].sum():.15g}, expected 1."
        )

    primitive = is_primitive(P)
    if require_primitive and not primitive:
        raise NotPrimitiveError(
            "Channel matrix is reducible or periodic: no power up to "
            f"{wielandt_exponent(P.shape[0])} is strictly positive."
        )
    doubly = np.all(np.abs(P.sum(axis=0) - 1.0) <= STOCHASTIC_TOL)
    if not primitive and doubly:
        pi = np.full(P.shape[0], 1.0 / P.shape[0])
    else:
        pi = stationary_distribution(P)

    flux = pi[:, np.newaxis] * P
    reversible = bool(np.max(np.abs(flux - flux.T)) <= reversibility_tol)

    P.setflags(write=False)
    pi.setflags(write=False)
    return Channel(
        matrix=P, pi=pi, reversible=reversible, primitive=primitive
    )


def binary_symmetric(p: float) -> Channel:
    """Binary symmetric channel flipping the state with probability p.

    p = 0 gives the noiseless channel, admitted without the primitivity
    requirement.
    """
    if not 0 <= p < 1:
        raise NotPrimitiveError(f"Flip probability must be in [0, 1): {p}")
    return validate_channel(
        [[1 - p, p], [p, 1 - p]], require_primitive=p > 0
    )


def jukes_cantor(K: int, p: float) -> Channel:
    """Symmetric channel on K + 1 states, mutating with probability p.

    Each of the K other states is reached with probability p / K.
    """
    if K < 1:
        raise DimensionMismatchError(f"Need at least two states, got K={K}")
    matrix = np.full((K + 1, K + 1), p / K)
    np.fill_diagonal(matrix, 1 - p)
    return validate_channel(matrix, require_primitive=p > 0)


def random_primitive_channel(
    size: int, rng: np.random.Generator
) -> Channel:
    """Channel with Dirichlet rows; strictly positive, usually irreversible."""
    return validate_channel(rng.dirichlet(np.ones(size), size=size))


def random_reversible_channel(
    pi: ArrayLike, rng: np.random.Generator, mixing: Optional[float] = None
) -> Channel:
    """Metropolis-Hastings channel with equilibrium pi.

    A random symmetric proposal Q is scaled to maximal row sum ``mixing``
    and accepted with probability min(1, pi_j / pi_i), which enforces
    detailed balance with respect to pi.
    """
    pi = np.asarray(pi, dtype=float)
    size = len(pi)
    if mixing is None:
        mixing = rng.uniform(0.2, 0.95)
    proposal = rng.uniform(0.05, 1.0, size=(size, size))
    proposal = proposal + proposal.T
    np.fill_diagonal(proposal, 0.0)
    proposal *= mixing / proposal.sum(axis=1).max()
    matrix = proposal * np.minimum(1.0, pi[np.newaxis, :] / pi[:, np.newaxis])
    np.fill_diagonal(matrix, 0.0)
    np.fill_diagonal(matrix, 1.0 - matrix.sum(axis=1))
    return validate_channel(matrix)


def spectral_profile(channel: Channel) -> SpectralProfile:
    """Singular values of P - Pi and, if reversible, the real spectrum.

    Reversible channels are diagonalized through the symmetric matrix
    Psi^(1/2) P Psi^(-1/2). Non-reversible channels only get the
    singular-value based constants.
    """
    P, pi = channel.matrix, channel.pi
    root = np.sqrt(pi)
    centered = P - np.outer(np.ones(channel.size), pi)
    sigma1 = float(linalg.svdvals(centered)[0])
    c_general = sigma1 * float(root.max() / root.min())
    weighted = root[:, np.newaxis] * centered / root[np.newaxis, :]
    c_tight = float(linalg.svdvals(weighted)[0])

    if not channel.reversible:
        logger.debug("Channel is not reversible, skipping eigenvalues.")
        return SpectralProfile(
            sigma1=sigma1, c_general=c_general, c_tight=c_tight
        )

    symmetric = root[:, np.newaxis] * P / root[np.newaxis, :]
    symmetric = (symmetric + symmetric.T) / 2
    values, vectors = linalg.eigh(symmetric)
    # theta_0 belongs to the eigenvector sqrt(pi); the rest by modulus
    lead = int(np.argmax(np.abs(vectors.T @ root)))
    rest = sorted(
        (k for k in range(channel.size) if k != lead),
        key=lambda k: -abs(values[k]),
    )
    order = [lead] + rest
    values = values[order]
    vectors = vectors[:, order]
    vectors[:, 0] *= np.sign(vectors[:, 0] @ root)
    return SpectralProfile(
        sigma1=sigma1,
        c_general=c_general,
        c_tight=c_tight,
        theta1_abs=float(abs(values[1])),
        eigenvalues=values,
        right_eigenvectors=vectors / root[:, np.newaxis],
        left_eigenvectors=vectors * root[:, np.newaxis],
    )


def contraction_constant(
    channel: Channel, mode: Union[ContractionMode, str]
) -> float:
    """Constant C with ||P a - 1||_pi <= C ||a - 1||_pi.

    The bound holds for every normalized likelihood vector a.
    """
    mode = ContractionMode(mode)
    profile = channel.profile
    match mode:
        case ContractionMode.REVERSIBLE_EIG:
            if profile.theta1_abs is None:
                raise ModeUnavailableError(
                    "The eigenvalue constant needs a reversible channel."
                )
            return profile.theta1_abs
        case ContractionMode.GENERAL_SINGULAR:
            return profile.c_general
        case ContractionMode.TIGHT_PI_OPERATOR:
            return profile.c_tight
        case _:
            raise ModeUnavailableError(f"Unknown contraction mode: {mode}")


def apply_to_normalized(channel: Channel, rho_tilde: ArrayLike) -> np.ndarray:
    """Map a normalized likelihood vector through the channel.

    Examples
    --------
    >>> out = apply_to_normalized(binary_symmetric(0.25), [2.0, 0.0])
    >>> out.tolist()
    [1.5, 0.5]
    """
    x = np.asarray(rho_tilde, dtype=float)
    if x.shape != (channel.size,):
        raise DimensionMismatchError(
            f"Expected a vector of length {channel.size}, got {x.shape}."
        )
    if np.any(x < 0) or abs(channel.pi @ x - 1.0) > NORMALIZED_TOL:
        raise NotNormalizedError(
            f"Vector {x} is not a normalized likelihood vector "
            f"(pi . x = {channel.pi @ x:.15g})."
        )
    return channel.matrix @ x
