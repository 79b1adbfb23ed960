"""Certificates for the memory-vector bounds and unsolvability conditions.

Every check records the two sides of its precondition and of each
asserted inequality. A conclusion is only evaluated when its
precondition is met; otherwise the certificate reports
``precondition-unmet``. Sides closer than ``BOUNDARY_TOL`` are reported
as ``boundary`` and count as holding.

Slack epsilon enters through two quantities:

- the mixing threshold 4e / (1 + 2e), bounding the summed sup-norms of
  the child memories;
- the per-level factor (1 + e) / (1 - 4e^2 / (1 + 2e)), finite only
  for e < (1 + sqrt 5) / 4.

Examples
--------
>>> from infoflow.channel import binary_symmetric
>>> cert = unsolvability_reversible(binary_symmetric(0.45), d=2)
>>> cert.verdict.value, round(cert.threshold_lhs, 12)
('holds', 0.2)
>>> round(cert.decay_factor, 12)
0.6
"""

from dataclasses import dataclass
from enum import Enum
import math
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .channel import Channel, ContractionMode, contraction_constant
from .errors import (
    DimensionMismatchError,
    EpsilonOutOfRangeError,
    SOutOfRangeError,
)
from .measures import (
    DependenceReport,
    dependence_factor,
    dependence_report,
    pi_norm,
    uniform_norm,
)
from .pruning import CladeLikelihoods, LikelihoodState, prune_clades
from .tree import Pattern, TreeSpec

BOUNDARY_TOL = 1e-12
GOLDEN_LIMIT = (1 + math.sqrt(5)) / 4
PATTERNWISE_EPS = 0.5
EXPECTATION_EPS = 2.0


class Verdict(str, Enum):
    HOLDS = "holds"
    BOUNDARY = "boundary"
    VIOLATED = "violated"
    PRECONDITION_UNMET = "precondition-unmet"


class ConditionId(str, Enum):
    MIXING = "mixing"
    HADAMARD = "hadamard"
    ROOT_CHILDREN = "root-children"
    UNSOLVABLE = "unsolvable"
    UNSOLVABLE_REVERSIBLE = "unsolvable-reversible"
    UNSOLVABLE_SINGULAR = "unsolvable-singular"
    UNSOLVABLE_TIGHT = "unsolvable-tight"
    UNSOLVABLE_EXPECTATION = "unsolvable-expectation"
    EXPECTATION_FLOW = "expectation-flow"


@dataclass(frozen=True)
class Inequality:
    """lhs < rhs (strict) or lhs <= rhs, evaluated in floating point."""

    name: str
    lhs: float
    rhs: float
    strict: bool = True

    @property
    def verdict(self) -> Verdict:
        if abs(self.lhs - self.rhs) < BOUNDARY_TOL:
            return Verdict.BOUNDARY
        return Verdict.HOLDS if self.lhs < self.rhs else Verdict.VIOLATED

    @property
    def holds(self) -> bool:
        return self.verdict is not Verdict.VIOLATED

    @property
    def met(self) -> bool:
        """Precondition reading: a strict boundary does not count."""
        verdict = self.verdict
        if verdict is Verdict.BOUNDARY:
            return not self.strict
        return verdict is Verdict.HOLDS

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "strict": self.strict,
            "verdict": self.verdict.value,
        }


@dataclass(frozen=True)
class BoundCertificate:
    condition_id: ConditionId
    inputs: dict
    precondition: Inequality
    conclusions: tuple[Inequality, ...] = ()
    epsilon_used: Optional[float] = None
    decay_factor: Optional[float] = None

    @property
    def threshold_lhs(self) -> float:
        return self.precondition.lhs

    @property
    def threshold_rhs(self) -> float:
        return self.precondition.rhs

    @property
    def satisfied(self) -> bool:
        return self.precondition.met

    @property
    def verdict(self) -> Verdict:
        if not self.satisfied:
            return Verdict.PRECONDITION_UNMET
        verdicts = {c.verdict for c in self.conclusions}
        if Verdict.VIOLATED in verdicts:
            return Verdict.VIOLATED
        if Verdict.BOUNDARY in verdicts:
            return Verdict.BOUNDARY
        return Verdict.HOLDS

    def conclusion(self, name: str) -> Optional[Inequality]:
        for inequality in self.conclusions:
            if inequality.name == name:
                return inequality
        return None

    def to_dict(self) -> dict:
        return {
            "condition_id": self.condition_id.value,
            "inputs": self.inputs,
            "threshold_lhs": self.threshold_lhs,
            "threshold_rhs": self.threshold_rhs,
            "satisfied": self.satisfied,
            "verdict": self.verdict.value,
            "conclusions": [c.to_dict() for c in self.conclusions],
            "epsilon_used": self.epsilon_used,
            "decay_factor": self.decay_factor,
        }


def _check_eps(eps: float) -> float:
    if not eps > 0:
        raise EpsilonOutOfRangeError(f"Epsilon must be positive, got {eps}.")
    return float(eps)


def mixing_threshold(eps: float) -> float:
    """4e / (1 + 2e).

    Examples
    --------
    >>> mixing_threshold(0.5)
    1.0
    """
    eps = _check_eps(eps)
    return 4 * eps / (1 + 2 * eps)


def level_factor(eps: float) -> float:
    """(1 + e) / (1 - 4e^2 / (1 + 2e)), defined for e < (1 + sqrt 5) / 4.

    Examples
    --------
    >>> round(level_factor(0.5), 12)
    3.0
    """
    eps = _check_eps(eps)
    if eps >= GOLDEN_LIMIT:
        raise EpsilonOutOfRangeError(
            f"The per-level factor needs epsilon < {GOLDEN_LIMIT:.6f}, "
            f"got {eps}."
        )
    return (1 + eps) / (1 - 4 * eps**2 / (1 + 2 * eps))


def threshold_scale(min_pi: float) -> float:
    """min pi / sqrt(1 - min pi).

    Examples
    --------
    >>> round(threshold_scale(0.5), 6)
    0.707107
    """
    return min_pi / math.sqrt(1 - min_pi)


class PolyCheck(NamedTuple):
    holds_precondition: bool
    lhs: float
    rhs: float
    inequality_ok: Optional[bool]


def lemma_poly_check(d: int, S: float, eps: float) -> PolyCheck:
    """(1 + S/d)^d < 1 + (1 + e) S whenever S <= 4e / (1 + 2e).

    Examples
    --------
    >>> lemma_poly_check(2, 1.0, 0.5)
    PolyCheck(holds_precondition=True, lhs=2.25, rhs=2.5, inequality_ok=True)
    >>> lemma_poly_check(2, 1.5, 0.5).inequality_ok is None
    True
    """
    if not 0 < S < 2:
        raise SOutOfRangeError(f"S must lie in (0, 2), got {S}.")
    if d < 2:
        raise DimensionMismatchError(f"Need d >= 2, got {d}.")
    precondition = Inequality("S", S, mixing_threshold(eps), strict=False)
    conclusion = Inequality("poly", (1 + S / d) ** d, 1 + (1 + eps) * S)
    met = precondition.met
    return PolyCheck(
        holds_precondition=met,
        lhs=conclusion.lhs,
        rhs=conclusion.rhs,
        inequality_ok=conclusion.holds if met else None,
    )


def _memory_arrays(memory_vectors, pi) -> tuple[list[np.ndarray], np.ndarray]:
    pi = np.asarray(pi, dtype=float)
    arrays = [np.asarray(m, dtype=float) for m in memory_vectors]
    if not arrays:
        raise DimensionMismatchError("Need at least one memory vector.")
    if any(m.shape != pi.shape for m in arrays):
        raise DimensionMismatchError(
            f"Memory vectors {[m.shape for m in arrays]} do not match "
            f"pi of shape {pi.shape}."
        )
    return arrays, pi


def _sup_precondition(arrays, eps) -> tuple[float, Inequality]:
    total = math.fsum(float(uniform_norm(m)) for m in arrays)
    return total, Inequality(
        "sum_sup_memory", total, mixing_threshold(eps), strict=False
    )


def mixing_check(memory_vectors, pi, eps: float) -> BoundCertificate:
    """Closeness of the dependence factor to one for small memories."""
    arrays, pi = _memory_arrays(memory_vectors, pi)
    total, precondition = _sup_precondition(arrays, eps)
    d_factor = float(dependence_factor([1.0 + m for m in arrays], pi))
    conclusions = ()
    if precondition.met:
        gap = abs(d_factor - 1)
        conclusions = (
            Inequality("linear", gap, eps * total),
            Inequality(
                "quadratic", gap, 4 * eps**2 / (1 + 2 * eps), strict=False
            ),
        )
    return BoundCertificate(
        condition_id=ConditionId.MIXING,
        inputs={"d": len(arrays), "eps": eps, "d_factor": d_factor},
        precondition=precondition,
        conclusions=conclusions,
        epsilon_used=eps,
    )


def hadamard_check(
    memory_vectors,
    pi,
    eps: float,
    root: LikelihoodState,
    d_factor: float,
) -> BoundCertificate:
    """Root memory bounded by the summed pi-norms of mapped child memories."""
    arrays, pi = _memory_arrays(memory_vectors, pi)
    _, precondition = _sup_precondition(arrays, eps)
    total = math.fsum(float(pi_norm(m, pi)) for m in arrays)
    root_norm = root.memory_norm
    conclusions = []
    if precondition.met:
        conclusions.append(
            Inequality("weighted", d_factor * root_norm, (1 + eps) * total)
        )
        if eps < GOLDEN_LIMIT:
            conclusions.append(
                Inequality("unweighted", root_norm, level_factor(eps) * total)
            )
    return BoundCertificate(
        condition_id=ConditionId.HADAMARD,
        inputs={"d": len(arrays), "eps": eps, "d_factor": d_factor},
        precondition=precondition,
        conclusions=tuple(conclusions),
        epsilon_used=eps,
    )


def root_children_check(
    constants: Sequence[float],
    pi,
    eps: float,
    child_memory_norms: Sequence[float],
    root_memory_norm: float,
    d_factor: float,
) -> BoundCertificate:
    """Root memory bounded through the child memories before the edges.

    ``child_memory_norms`` are the pi-norms of a_c - 1 at the root
    children and ``constants`` the contraction constants of their edges.
    """
    constants = [float(c) for c in constants]
    if len(constants) != len(child_memory_norms) or not constants:
        raise DimensionMismatchError(
            f"Got {len(constants)} constants for "
            f"{len(child_memory_norms)} children."
        )
    if any(c < 0 for c in constants):
        raise EpsilonOutOfRangeError(
            f"Contraction constants must be nonnegative, got {constants}."
        )
    min_pi = float(np.min(pi))
    limit = threshold_scale(min_pi) * mixing_threshold(eps)
    precondition = Inequality(
        "sum_constants", math.fsum(constants), limit, strict=False
    )
    weighted = math.fsum(
        c * n for c, n in zip(constants, child_memory_norms)
    )
    conclusions = []
    decay = None
    if precondition.met:
        conclusions.append(
            Inequality(
                "weighted", d_factor * root_memory_norm, (1 + eps) * weighted
            )
        )
        if eps < GOLDEN_LIMIT:
            decay = level_factor(eps) * math.fsum(constants)
            conclusions.append(
                Inequality(
                    "unweighted",
                    root_memory_norm,
                    level_factor(eps) * weighted,
                )
            )
    return BoundCertificate(
        condition_id=ConditionId.ROOT_CHILDREN,
        inputs={
            "constants": constants,
            "d": len(constants),
            "min_pi": min_pi,
            "eps": eps,
        },
        precondition=precondition,
        conclusions=tuple(conclusions),
        epsilon_used=eps,
        decay_factor=decay,
    )


def patternwise_threshold(min_pi: float, eps: float = PATTERNWISE_EPS):
    """min{(1 - 4e^2/(1+2e)) / (1+e), scale(min pi) 4e/(1+2e)}.

    At e = 1/2 this is min{1/3, min pi / sqrt(1 - min pi)}.

    Examples
    --------
    >>> round(patternwise_threshold(0.5), 12)
    0.333333333333
    """
    return min(
        1 / level_factor(eps), threshold_scale(min_pi) * mixing_threshold(eps)
    )


def expectation_threshold(min_pi: float, eps: float = EXPECTATION_EPS):
    """min{1/(1+e), scale(min pi) 4e/(1+2e)}; min{1/3, 8/5 scale} at e=2.

    Examples
    --------
    >>> round(expectation_threshold(0.1), 6)
    0.168655
    """
    eps = _check_eps(eps)
    return min(
        1 / (1 + eps), threshold_scale(min_pi) * mixing_threshold(eps)
    )


def _unsolvability(
    condition_id: ConditionId,
    C: float,
    d: int,
    min_pi: float,
    eps: float,
    lhs: float,
    rhs: float,
    factor: float,
) -> BoundCertificate:
    precondition = Inequality("threshold", lhs, rhs, strict=True)
    return BoundCertificate(
        condition_id=condition_id,
        inputs={"C": C, "d": d, "min_pi": min_pi, "eps": eps},
        precondition=precondition,
        epsilon_used=eps,
        decay_factor=factor * C * d if precondition.met else None,
    )


def _check_arity(d: int) -> int:
    if d < 1:
        raise DimensionMismatchError(f"Need d >= 1, got {d}.")
    return int(d)


def unsolvability_condition(
    C: float, d: int, pi, eps: float = PATTERNWISE_EPS
) -> BoundCertificate:
    """Patternwise unsolvability from a contraction constant C."""
    d = _check_arity(d)
    min_pi = float(np.min(pi))
    return _unsolvability(
        ConditionId.UNSOLVABLE,
        float(C),
        d,
        min_pi,
        eps,
        lhs=C * d,
        rhs=patternwise_threshold(min_pi, eps),
        factor=level_factor(eps),
    )


def unsolvability_reversible(
    channel: Channel, d: int, eps: float = PATTERNWISE_EPS
) -> BoundCertificate:
    """|theta_1| d below the patternwise threshold."""
    d = _check_arity(d)
    C = contraction_constant(channel, ContractionMode.REVERSIBLE_EIG)
    return _unsolvability(
        ConditionId.UNSOLVABLE_REVERSIBLE,
        C,
        d,
        channel.min_pi,
        eps,
        lhs=C * d,
        rhs=patternwise_threshold(channel.min_pi, eps),
        factor=level_factor(eps),
    )


def unsolvability_singular(
    channel: Channel, d: int, eps: float = PATTERNWISE_EPS
) -> BoundCertificate:
    """sigma_1 d below the patternwise threshold scaled by min/max sqrt pi.

    The resulting decay factor uses C = sigma_1 max sqrt pi / min sqrt pi.
    """
    d = _check_arity(d)
    profile = channel.profile
    root_pi = np.sqrt(channel.pi)
    ratio = float(root_pi.min() / root_pi.max())
    return _unsolvability(
        ConditionId.UNSOLVABLE_SINGULAR,
        profile.c_general,
        d,
        channel.min_pi,
        eps,
        lhs=profile.sigma1 * d,
        rhs=ratio * patternwise_threshold(channel.min_pi, eps),
        factor=level_factor(eps),
    )


def unsolvability_tight(
    channel: Channel, d: int, eps: float = PATTERNWISE_EPS
) -> BoundCertificate:
    """Operator norm of P - Pi on L2(pi), times d, below the threshold."""
    d = _check_arity(d)
    C = contraction_constant(channel, ContractionMode.TIGHT_PI_OPERATOR)
    return _unsolvability(
        ConditionId.UNSOLVABLE_TIGHT,
        C,
        d,
        channel.min_pi,
        eps,
        lhs=C * d,
        rhs=patternwise_threshold(channel.min_pi, eps),
        factor=level_factor(eps),
    )


def unsolvability_expectation(
    C: float, d: int, pi, eps: float = EXPECTATION_EPS
) -> BoundCertificate:
    """Unsolvability in expectation; the per-level factor is (1 + e) C d."""
    d = _check_arity(d)
    min_pi = float(np.min(pi))
    return _unsolvability(
        ConditionId.UNSOLVABLE_EXPECTATION,
        float(C),
        d,
        min_pi,
        eps,
        lhs=C * d,
        rhs=expectation_threshold(min_pi, eps),
        factor=1 + eps,
    )


def certify_channel(
    channel: Channel,
    d: int,
    mode: ContractionMode = ContractionMode.TIGHT_PI_OPERATOR,
    expectation: bool = False,
    eps: Optional[float] = None,
) -> BoundCertificate:
    """Unsolvability certificate for a channel on a complete d-ary tree."""
    mode = ContractionMode(mode)
    if expectation:
        C = contraction_constant(channel, mode)
        return unsolvability_expectation(
            C, d, channel.pi, EXPECTATION_EPS if eps is None else eps
        )
    eps = PATTERNWISE_EPS if eps is None else eps
    match mode:
        case ContractionMode.REVERSIBLE_EIG:
            return unsolvability_reversible(channel, d, eps)
        case ContractionMode.GENERAL_SINGULAR:
            return unsolvability_singular(channel, d, eps)
        case ContractionMode.TIGHT_PI_OPERATOR:
            return unsolvability_tight(channel, d, eps)


@dataclass(frozen=True)
class PatternCertificates:
    """Root certificates of one pattern."""

    pattern: Pattern
    report: DependenceReport
    mixing: BoundCertificate
    hadamard: BoundCertificate
    root_children: BoundCertificate

    @property
    def certificates(self) -> tuple[BoundCertificate, ...]:
        return (self.mixing, self.hadamard, self.root_children)

    def to_dict(self) -> dict:
        return {
            "pattern": str(self.pattern),
            "dependence": self.report.to_dict(),
            **{c.condition_id.value: c.to_dict() for c in self.certificates},
        }


def certify_clades(
    pattern: Pattern,
    clades: CladeLikelihoods,
    pi,
    eps: float,
    constants: Sequence[float],
) -> PatternCertificates:
    """Root certificates from an already pruned pattern."""
    if not clades.children:
        raise DimensionMismatchError("The root of the tree has no children.")
    report = dependence_report(clades.children, pi, clades.root)
    memories = report.memory_vectors
    return PatternCertificates(
        pattern=pattern,
        report=report,
        mixing=mixing_check(memories, pi, eps),
        hadamard=hadamard_check(
            memories, pi, eps, clades.root, report.d_factor
        ),
        root_children=root_children_check(
            constants,
            pi,
            eps,
            report.child_node_memory_norms,
            clades.root.memory_norm,
            report.d_factor,
        ),
    )


def edge_constants(
    tree: TreeSpec, node: str, mode: ContractionMode
) -> list[float]:
    """Contraction constants of the edges below node, in child order."""
    return [
        contraction_constant(tree.channel(node, child), mode)
        for child in tree.children[node]
    ]


def certify_patterns(
    tree: TreeSpec,
    pattern: Pattern,
    eps: float = PATTERNWISE_EPS,
    mode: ContractionMode = ContractionMode.TIGHT_PI_OPERATOR,
) -> PatternCertificates:
    """Mixing, Hadamard and root-children certificates at the root."""
    clades = prune_clades(tree, pattern)
    constants = edge_constants(tree, tree.root, mode)
    return certify_clades(pattern, clades, tree.pi, eps, constants)
