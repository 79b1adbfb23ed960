"""Geometry of likelihood vectors in L2(pi) and the dependence factor.

Vector functions accept a single vector of length K + 1 or a stack of
vectors with the states on the last axis.

Examples
--------
>>> pi = np.array([0.5, 0.5])
>>> float(pi_inner([2.0, 0.0], [2.0, 0.0], pi))
2.0
>>> centralize([2.0, 0.0], pi).tolist()
[1.0, -1.0]
"""

from dataclasses import dataclass
from functools import reduce
import itertools
import logging
import math
from typing import TYPE_CHECKING, Optional, Sequence

import numpy as np

from .config import Settings, get_settings
from .errors import (
    DimensionMismatchError,
    MixedEquilibriaError,
    PatternImpossibleError,
)

if TYPE_CHECKING:
    from .channel import Channel
    from .pruning import LikelihoodState

logger = logging.getLogger(__name__)


def _as_vectors(*vectors) -> list[np.ndarray]:
    arrays = [np.asarray(v, dtype=float) for v in vectors]
    sizes = {a.shape[-1] if a.ndim else 1 for a in arrays}
    if len(sizes) != 1:
        raise DimensionMismatchError(
            f"Vector lengths differ: {[a.shape for a in arrays]}"
        )
    return arrays


def pi_inner(x, y, pi) -> np.ndarray:
    """The pi-weighted inner product sum_i pi_i x_i y_i."""
    x, y, pi = _as_vectors(x, y, pi)
    return (x * y) @ pi


def pi_norm(x, pi) -> np.ndarray:
    """sqrt <x, x>_pi.

    Examples
    --------
    >>> round(float(pi_norm([2.0, 0.0], [0.5, 0.5])) ** 2, 12)
    2.0
    """
    x, pi = _as_vectors(x, pi)
    return np.sqrt((x * x) @ pi)


def euclidean_norm(x) -> np.ndarray:
    return np.linalg.norm(np.asarray(x, dtype=float), axis=-1)


def uniform_norm(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.max(np.abs(x), axis=-1)


def l1_norm(x) -> np.ndarray:
    return np.sum(np.abs(np.asarray(x, dtype=float)), axis=-1)


def centralize(x, pi) -> np.ndarray:
    """Remove the pi-mean: x - 1 <x, 1>_pi."""
    x, pi = _as_vectors(x, pi)
    return x - (x @ pi)[..., None]


def normalize(rho, pi) -> np.ndarray:
    """Scale a likelihood vector to pi-mean one.

    Examples
    --------
    >>> normalize([0.5625, 0.0625], [0.5, 0.5]).round(12).tolist()
    [1.8, 0.2]
    """
    rho, pi = _as_vectors(rho, pi)
    mass = rho @ pi
    if np.any(mass <= 0):
        raise PatternImpossibleError(
            "A likelihood vector with zero pi-mass cannot be normalized."
        )
    return rho / mass[..., None] if rho.ndim > 1 else rho / mass


def memory_vector(rho_tilde) -> np.ndarray:
    """Deviation of a normalized vector from the uninformative one."""
    return np.asarray(rho_tilde, dtype=float) - 1.0


def dependence_factor(mapped: Sequence[np.ndarray], pi) -> np.ndarray:
    """pi-mean of the entrywise product of channel-mapped child vectors."""
    arrays = _as_vectors(*mapped, pi)
    return reduce(np.multiply, arrays[:-1]) @ arrays[-1]


@dataclass(frozen=True)
class DependenceReport:
    """Split of a pattern probability into independent and joint parts.

    ``child_memory_norms`` holds (pi-norm, sup-norm) of the mapped child
    memories P_c a_c - 1; ``child_node_memory_norms`` the pi-norm of the
    child memories a_c - 1 before the edge.
    """

    d_factor: float
    log_pr_independent: float
    log_pr_pi: float
    child_memory_norms: tuple[tuple[float, float], ...]
    child_node_memory_norms: tuple[float, ...]
    memory_vectors: tuple[np.ndarray, ...]
    relative_gap: Optional[float] = None

    @property
    def pr_independent(self) -> float:
        return math.exp(self.log_pr_independent)

    @property
    def pr_pi(self) -> float:
        return math.exp(self.log_pr_pi)

    @property
    def consistent(self) -> Optional[bool]:
        """Whether the parent pruning result matches D * Pr_IND."""
        if self.relative_gap is None:
            return None
        return self.relative_gap <= 1e-10

    def to_dict(self) -> dict:
        return {
            "d_factor": self.d_factor,
            "pr_independent": self.pr_independent,
            "pr_pi": self.pr_pi,
            "child_memory_norms": [list(n) for n in self.child_memory_norms],
            "child_node_memory_norms": list(self.child_node_memory_norms),
            "relative_gap": self.relative_gap,
        }


def dependence_report(
    children: Sequence[tuple["LikelihoodState", "Channel"]],
    pi,
    root: Optional["LikelihoodState"] = None,
    equilibrium_tol: Optional[float] = None,
) -> DependenceReport:
    """Dependence factor of the subpatterns hanging below one node.

    Examples
    --------
    >>> from infoflow.channel import binary_symmetric
    >>> from infoflow.pruning import prune_clades
    >>> from infoflow.tree import Pattern, build_complete_dary
    >>> tree = build_complete_dary(2, 1, binary_symmetric(0.25))
    >>> clades = prune_clades(tree, Pattern.parse("00"))
    >>> report = dependence_report(clades.children, tree.pi, clades.root)
    >>> round(report.d_factor, 12), round(report.pr_independent, 12)
    (1.25, 0.25)
    """
    if not children:
        raise DimensionMismatchError("A dependence factor needs children.")
    if equilibrium_tol is None:
        equilibrium_tol = get_settings().equilibrium_tol
    pi = np.asarray(pi, dtype=float)
    mapped, norms, node_norms = [], [], []
    log_independent = 0.0
    for state, channel in children:
        _as_vectors(state.rho_tilde, channel.pi, pi)
        gap = float(np.max(np.abs(channel.pi - pi)))
        if gap > equilibrium_tol:
            raise MixedEquilibriaError(
                f"Edge channel equilibrium {channel.pi} differs from {pi}."
            )
        vector = channel.matrix @ state.rho_tilde
        mapped.append(vector)
        memory = memory_vector(vector)
        norms.append((float(pi_norm(memory, pi)), float(uniform_norm(memory))))
        node_norms.append(float(pi_norm(state.memory, pi)))
        log_independent += state.log_pr_pi

    d_factor = float(dependence_factor(mapped, pi))
    if d_factor <= 0:
        raise PatternImpossibleError(
            "The subpatterns are jointly impossible (zero dependence factor)."
        )
    log_pr_pi = math.log(d_factor) + log_independent
    gap = None
    if root is not None:
        gap = abs(math.expm1(root.log_pr_pi - log_pr_pi))
        logger.debug("Dependence identity gap %.3e", gap)
    return DependenceReport(
        d_factor=d_factor,
        log_pr_independent=log_independent,
        log_pr_pi=log_pr_pi,
        child_memory_norms=tuple(norms),
        child_node_memory_norms=tuple(node_norms),
        memory_vectors=tuple(memory_vector(v) for v in mapped),
        relative_gap=gap,
    )


def expansion_by_order(
    memory_vectors: Sequence[np.ndarray],
    pi,
    settings: Optional[Settings] = None,
) -> list[float]:
    """Sums of pi . (m_c1 * ... * m_cp) over all p-subsets, p = 0..d.

    Examples
    --------
    >>> m = [np.array([0.5, -0.5])] * 2
    >>> [round(t, 12) for t in expansion_by_order(m, [0.5, 0.5])]
    [1.0, 0.0, 0.25]
    """
    settings = settings or get_settings()
    arrays = _as_vectors(*memory_vectors, pi)
    vectors, pi = arrays[:-1], arrays[-1]
    d = len(vectors)
    if d > settings.expansion_max_d:
        raise DimensionMismatchError(
            f"Term-by-term expansion is limited to d <= "
            f"{settings.expansion_max_d}, got {d}."
        )
    orders = [1.0]
    for p in range(1, d + 1):
        terms = (
            float(reduce(np.multiply, subset) @ pi)
            for subset in itertools.combinations(vectors, p)
        )
        orders.append(math.fsum(terms))
    return orders


def expand_products(
    memory_vectors: Sequence[np.ndarray],
    pi,
    settings: Optional[Settings] = None,
) -> tuple[np.ndarray, float]:
    """Entrywise product of (1 + m_c) and its pi-mean.

    Up to ``expansion_max_d`` children the mean is summed term by term
    over all subsets of children; beyond that it is the mean of the
    product.

    Examples
    --------
    >>> m = [np.array([0.5, -0.5])] * 2
    >>> product, scalar = expand_products(m, [0.5, 0.5])
    >>> product.tolist(), round(scalar, 12)
    ([2.25, 0.25], 1.25)
    """
    settings = settings or get_settings()
    if not memory_vectors:
        raise DimensionMismatchError("Need at least one memory vector.")
    arrays = _as_vectors(*memory_vectors, pi)
    product = reduce(np.multiply, (1.0 + m for m in arrays[:-1]))
    if len(memory_vectors) <= settings.expansion_max_d:
        scalar = math.fsum(expansion_by_order(memory_vectors, pi, settings))
    else:
        logger.debug(
            "Skipping term expansion for %d children", len(memory_vectors)
        )
        scalar = float(product @ arrays[-1])
    return product, scalar
