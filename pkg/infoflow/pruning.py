"""Leaf-to-root likelihood pruning, posteriors and forward sampling.

Every node keeps its likelihood vector scaled to pi-mean one together
with the log of the scaling, so deep trees do not underflow:

    a_v = prod_c P_c a_c / z_v,   z_v = pi . prod_c P_c a_c,
    log Pr_pi(subpattern at v) = log z_v + sum_c log Pr_pi(at c).

A leaf observing state s starts from e_s / pi_s with log pi_s.

Examples
--------
>>> from infoflow.channel import binary_symmetric
>>> from infoflow.tree import Pattern, build_complete_dary
>>> tree = build_complete_dary(2, 1, binary_symmetric(0.25))
>>> state = prune(tree, Pattern.parse("00"))
>>> state.rho_tilde.round(12).tolist()
[1.8, 0.2]
>>> round(state.pr_pi, 12), round(float(state.memory_norm), 12)
(0.3125, 0.8)
"""

from dataclasses import dataclass, field
import logging
import math
from typing import Iterable, Union

import numpy as np

from .channel import Channel
from .errors import (
    BadPriorError,
    DimensionMismatchError,
    PatternImpossibleError,
    StateOutOfRangeError,
)
from .measures import pi_norm
from .tree import Pattern, TreeSpec

logger = logging.getLogger(__name__)

PRIOR_SUM_TOL = 1e-12

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator, None]


@dataclass(frozen=True, eq=False)
class LikelihoodState:
    """Normalized likelihood of one observed (sub)pattern."""

    rho_tilde: np.ndarray
    log_pr_pi: float
    pi: np.ndarray

    @property
    def pr_pi(self) -> float:
        return math.exp(self.log_pr_pi)

    @property
    def rho(self) -> np.ndarray:
        """Raw likelihoods Pr(pattern | root state)."""
        return self.rho_tilde * self.pr_pi

    @property
    def memory(self) -> np.ndarray:
        return self.rho_tilde - 1.0

    @property
    def memory_norm(self) -> float:
        return float(pi_norm(self.memory, self.pi))

    def to_dict(self) -> dict:
        return {
            "rho": self.rho,
            "rho_tilde": self.rho_tilde,
            "memory": self.memory,
            "memory_norm": self.memory_norm,
            "log_pr_pi": self.log_pr_pi,
            "pr_pi": self.pr_pi,
        }


@dataclass(frozen=True)
class Posterior:
    """Posterior over root states for one prior."""

    mu: np.ndarray
    r: np.ndarray
    map_state: int
    map_prob: float

    def to_dict(self) -> dict:
        return {
            "prior": self.mu,
            "posterior": self.r,
            "map_state": self.map_state,
            "map_prob": self.map_prob,
        }


@dataclass(frozen=True, eq=False)
class BatchLikelihood:
    """Pruning results for a stack of patterns.

    Rows of impossible patterns hold a vector of ones and ``-inf`` as log
    probability. ``nodes`` maps each requested node to its own
    (rho_tilde, log_pr_pi) arrays.
    """

    rho_tilde: np.ndarray
    log_pr_pi: np.ndarray
    possible: np.ndarray
    nodes: dict[str, tuple[np.ndarray, np.ndarray]] = field(
        default_factory=dict
    )

    def __len__(self) -> int:
        return len(self.log_pr_pi)

    def state(self, row: int, pi: np.ndarray) -> LikelihoodState:
        if not self.possible[row]:
            raise PatternImpossibleError(
                f"Pattern in row {row} has zero likelihood."
            )
        return LikelihoodState(
            self.rho_tilde[row], float(self.log_pr_pi[row]), pi
        )


@dataclass(frozen=True)
class CladeLikelihoods:
    """Root likelihood with the likelihood of each root child clade."""

    root: LikelihoodState
    children: list[tuple[LikelihoodState, Channel]]


def leaf_likelihood(state: int, K: int) -> np.ndarray:
    """Canonical vector e_state of length K + 1.

    Examples
    --------
    >>> leaf_likelihood(0, 1).tolist()
    [1.0, 0.0]
    """
    if not 0 <= state <= K:
        raise StateOutOfRangeError(
            f"State {state} is outside the alphabet 0..{K}."
        )
    vector = np.zeros(K + 1)
    vector[state] = 1.0
    return vector


def _check_block(tree: TreeSpec, patterns) -> np.ndarray:
    patterns = np.asarray(patterns, dtype=np.int64)
    if patterns.ndim != 2 or patterns.shape[1] != tree.n_leaves:
        raise DimensionMismatchError(
            f"Expected patterns of shape (n, {tree.n_leaves}), "
            f"got {patterns.shape}."
        )
    if patterns.size and (patterns.min() < 0 or patterns.max() > tree.K):
        raise StateOutOfRangeError(
            f"Pattern states must lie in 0..{tree.K}."
        )
    return patterns


def prune_batch(
    tree: TreeSpec, patterns, keep: Iterable[str] = ()
) -> BatchLikelihood:
    """Prune a (n, n_leaves) array of leaf states in one sweep."""
    patterns = _check_block(tree, patterns)
    keep = set(keep)
    n = len(patterns)
    pi = tree.pi
    rows = np.arange(n)

    vectors: dict[str, np.ndarray] = {}
    logs: dict[str, np.ndarray] = {}
    for leaf, column in tree.leaf_index.items():
        observed = patterns[:, column]
        vector = np.zeros((n, tree.size))
        vector[rows, observed] = 1.0 / pi[observed]
        vectors[leaf] = vector
        logs[leaf] = np.log(pi[observed])

    for node in tree.postorder:
        product = np.ones((n, tree.size))
        log_pr = np.zeros(n)
        for child in tree.children[node]:
            matrix = tree.channel(node, child).matrix
            product *= vectors[child] @ matrix.T
            log_pr += logs[child]
            if child not in keep:
                del vectors[child], logs[child]
        mass = product @ pi
        dead = mass <= 0
        if dead.any():
            product[dead] = 1.0
            mass[dead] = 1.0
            log_pr[dead] = -np.inf
        vectors[node] = product / mass[:, None]
        logs[node] = log_pr + np.log(mass)

    log_root = logs[tree.root]
    return BatchLikelihood(
        rho_tilde=vectors[tree.root],
        log_pr_pi=log_root,
        possible=np.isfinite(log_root),
        nodes={node: (vectors[node], logs[node]) for node in keep},
    )


def prune(tree: TreeSpec, pattern: Pattern) -> LikelihoodState:
    """Normalized root likelihood of a pattern."""
    tree.check_pattern(pattern)
    batch = prune_batch(tree, pattern.as_array()[None, :])
    if not batch.possible[0]:
        raise PatternImpossibleError(
            f"Pattern {pattern} has zero probability under every root state."
        )
    return batch.state(0, tree.pi)


def prune_clades(tree: TreeSpec, pattern: Pattern) -> CladeLikelihoods:
    """Root likelihood together with the likelihood of each root child."""
    tree.check_pattern(pattern)
    kids = tree.children[tree.root]
    batch = prune_batch(tree, pattern.as_array()[None, :], keep=kids)
    if not batch.possible[0]:
        raise PatternImpossibleError(
            f"Pattern {pattern} has zero probability under every root state."
        )
    children = []
    for kid in kids:
        vector, log_pr = batch.nodes[kid]
        state = LikelihoodState(vector[0], float(log_pr[0]), tree.pi)
        children.append((state, tree.channel(tree.root, kid)))
    return CladeLikelihoods(batch.state(0, tree.pi), children)


def check_prior(mu, size: int) -> np.ndarray:
    """Validate a prior over root states.

    Examples
    --------
    >>> check_prior([0.2, 0.8], 2).tolist()
    [0.2, 0.8]
    >>> check_prior([0.0, 1.0], 2)
    Traceback (most recent call last):
    ...
    infoflow.errors.BadPriorError: Prior must be positive, got [0. 1.]
    """
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (size,):
        raise DimensionMismatchError(
            f"Prior has shape {mu.shape}, expected ({size},)."
        )
    if not np.all(np.isfinite(mu)) or np.any(mu <= 0):
        raise BadPriorError(f"Prior must be positive, got {mu}")
    if abs(mu.sum() - 1.0) > PRIOR_SUM_TOL:
        raise BadPriorError(f"Prior sums to {mu.sum()!r}, not 1.")
    return mu


def pattern_probability(state: LikelihoodState, mu) -> float:
    """Pr(pattern) = mu . rho under the root prior mu."""
    mu = check_prior(mu, len(state.rho_tilde))
    return float(mu @ state.rho_tilde) * state.pr_pi


def posterior(state: LikelihoodState, mu) -> Posterior:
    """Posterior over root states; MAP ties go to the lowest state.

    Examples
    --------
    >>> flat = LikelihoodState(np.ones(2), math.log(0.25), np.full(2, 0.5))
    >>> post = posterior(flat, [0.5, 0.5])
    >>> post.r.tolist(), post.map_state
    ([0.5, 0.5], 0)
    """
    mu = check_prior(mu, len(state.rho_tilde))
    weights = state.rho_tilde * mu
    r = weights / weights.sum()
    map_state = int(np.argmax(r))
    return Posterior(
        mu=mu, r=r, map_state=map_state, map_prob=float(r[map_state])
    )


def map_states(rho_tilde: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """MAP root state of every row of a batch, ties to the lowest state."""
    return np.argmax(rho_tilde * mu, axis=-1)


def _generator(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_patterns(
    tree: TreeSpec, mu, n: int, seed: SeedLike = None
) -> tuple[np.ndarray, np.ndarray]:
    """Draw n root states from mu and broadcast them to the leaves.

    Returns the root states and an (n, n_leaves) array of patterns.
    """
    mu = check_prior(mu, tree.size)
    rng = _generator(seed)
    roots = rng.choice(tree.size, size=n, p=mu)
    states = {tree.root: roots}
    patterns = np.empty((n, tree.n_leaves), dtype=np.int64)
    for node in tree.preorder:
        parent_states = states.pop(node)
        if not tree.children[node]:
            patterns[:, tree.leaf_index[node]] = parent_states
            continue
        for child in tree.children[node]:
            cumulative = np.cumsum(tree.channel(node, child).matrix, axis=1)
            cumulative[:, -1] = 1.0
            draws = rng.random(n)
            states[child] = np.sum(
                cumulative[parent_states] <= draws[:, None], axis=1
            )
    return roots, patterns


def forward_sample(tree: TreeSpec, mu, seed: SeedLike) -> tuple[int, Pattern]:
    """One draw of the broadcasting process."""
    roots, patterns = sample_patterns(tree, mu, 1, seed)
    return int(roots[0]), Pattern(tuple(int(s) for s in patterns[0]))
