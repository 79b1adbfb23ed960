"""Exhaustive and Monte Carlo experiments over broadcasting trees.

Exhaustive runs cut the lexicographic pattern range into blocks of
``Settings.block_size`` patterns; Monte Carlo runs cut the samples into
blocks of ``Settings.mc_block_size`` draws, block b drawing from the
stream ``SeedSequence(seed, spawn_key=(b,))``. Blocks are dispatched with
joblib and their partial results merged in block order, so results do
not depend on the number of workers.
"""

from dataclasses import dataclass, field
import itertools
import logging
import math
from typing import Callable, Optional, Sequence

from joblib import Parallel, delayed
import numpy as np

from .certify import (
    PATTERNWISE_EPS,
    BoundCertificate,
    ConditionId,
    Inequality,
    Verdict,
    certify_channel,
    certify_clades,
    edge_constants,
    mixing_threshold,
    threshold_scale,
)
from .channel import Channel, ContractionMode
from .config import Settings, get_settings
from .measures import l1_norm, pi_norm
from .pruning import (
    CladeLikelihoods,
    LikelihoodState,
    check_prior,
    map_states,
    prune_batch,
    sample_patterns,
)
from .tree import (
    Pattern,
    TreeSpec,
    build_complete_dary,
    check_enumerable,
    pattern_block,
)

logger = logging.getLogger(__name__)

CHAIN_TOL = 1e-10


def state_pairs(size: int) -> list[tuple[int, int]]:
    """Unordered state pairs (i, j) with i < j.

    Examples
    --------
    >>> state_pairs(3)
    [(0, 1), (0, 2), (1, 2)]
    """
    return list(itertools.combinations(range(size), 2))


def _blocks(total: int, size: int) -> list[tuple[int, int]]:
    return [
        (start, min(start + size, total)) for start in range(0, total, size)
    ]


def _run_blocks(
    func: Callable, tasks: Sequence[tuple], settings: Settings
) -> list:
    """Apply func to each task tuple, keeping task order."""
    if settings.n_jobs == 1 or len(tasks) < 2:
        return [func(*task) for task in tasks]
    logger.info(
        "Dispatching %d blocks to %d workers", len(tasks), settings.n_jobs
    )
    return Parallel(n_jobs=settings.n_jobs)(
        delayed(func)(*task) for task in tasks
    )


@dataclass
class ExperimentRow:
    """Statistics of one tree depth."""

    g: int
    pattern_count: Optional[int] = None
    max_memory_norm: Optional[float] = None
    expected_memory_norm_pi: Optional[float] = None
    expected_memory_norm_mu: Optional[float] = None
    tv_sums: dict[tuple[int, int], float] = field(default_factory=dict)
    decay_ratio: Optional[float] = None
    map_accuracy: Optional[float] = None
    map_se: Optional[float] = None
    impossible_count: int = 0
    memory_bound: Optional[float] = None
    decay_check: Optional[Inequality] = None
    memory_check: Optional[Inequality] = None

    @property
    def bound_checks(self) -> list[Inequality]:
        return [
            check
            for check in (self.decay_check, self.memory_check)
            if check is not None
        ]

    def to_dict(self) -> dict:
        return {
            "g": self.g,
            "pattern_count": self.pattern_count,
            "max_mem_norm": self.max_memory_norm,
            "exp_mem_norm_pi": self.expected_memory_norm_pi,
            "exp_mem_norm_mu": self.expected_memory_norm_mu,
            **{f"tv_{i}_{j}": v for (i, j), v in self.tv_sums.items()},
            "decay_ratio": self.decay_ratio,
            "memory_bound": self.memory_bound,
            "decay_check": _verdict(self.decay_check),
            "memory_check": _verdict(self.memory_check),
            "map_acc": self.map_accuracy,
            "map_se": self.map_se,
        }


def _verdict(check: Optional[Inequality]) -> Optional[str]:
    return None if check is None else check.verdict.value


@dataclass
class ExperimentReport:
    """Rows over tree depths for one alphabet size."""

    size: int
    rows: list[ExperimentRow] = field(default_factory=list)
    certificate: Optional[BoundCertificate] = None
    min_pi: Optional[float] = None

    @property
    def header(self) -> list[str]:
        tv = [f"tv_{i}_{j}" for i, j in state_pairs(self.size)]
        return [
            "g",
            "pattern_count",
            "max_mem_norm",
            "exp_mem_norm_pi",
            "exp_mem_norm_mu",
            *tv,
            "decay_ratio",
            "memory_bound",
            "decay_check",
            "memory_check",
            "map_acc",
            "map_se",
        ]

    def csv_rows(self) -> list[list]:
        return [
            [row.to_dict().get(column) for column in self.header]
            for row in self.rows
        ]

    def memory_bound(self, g: int) -> Optional[float]:
        """Certified bound factor^g sqrt(1/min pi - 1) on the memory norm."""
        if self.certificate is None or self.certificate.decay_factor is None:
            return None
        return self.certificate.decay_factor**g * math.sqrt(
            1 / self.min_pi - 1
        )

    def check_bounds(self, row: ExperimentRow):
        """Compare a row with the certified decay, if there is one.

        Fills ``memory_bound`` and the two row checks: the decay ratio
        against the per-level factor and the max memory norm against
        ``memory_bound``. Rows stay unchecked without a certificate whose
        precondition is met.
        """
        if self.certificate is None or not self.certificate.satisfied:
            return
        factor = self.certificate.decay_factor
        row.memory_bound = self.memory_bound(row.g)
        if row.decay_ratio is not None:
            row.decay_check = Inequality(
                "decay_ratio", row.decay_ratio, factor, strict=False
            )
        if row.max_memory_norm is not None:
            row.memory_check = Inequality(
                "memory_norm",
                row.max_memory_norm,
                row.memory_bound,
                strict=False,
            )

    @property
    def bounds_hold(self) -> bool:
        return all(
            check.holds for row in self.rows for check in row.bound_checks
        )

    @property
    def verdicts(self) -> set[Verdict]:
        """Verdicts of the certificate and of every row check."""
        verdicts = {
            check.verdict for row in self.rows for check in row.bound_checks
        }
        if self.certificate is not None:
            verdicts.add(self.certificate.verdict)
        return verdicts

    def to_dict(self) -> dict:
        return {
            "rows": [row.to_dict() for row in self.rows],
            "certificate": (
                self.certificate.to_dict() if self.certificate else None
            ),
            "bounds_hold": self.bounds_hold,
        }


@dataclass
class _Partial:
    max_norm: float
    sum_pi: float
    sum_mu: float
    tv: np.ndarray
    impossible: int


def _stats_block(
    tree: TreeSpec, mu: np.ndarray, start: int, stop: int
) -> _Partial:
    batch = prune_batch(tree, pattern_block(tree, start, stop))
    ok = batch.possible
    rho_tilde = batch.rho_tilde[ok]
    pr_pi = np.exp(batch.log_pr_pi[ok])
    norms = pi_norm(rho_tilde - 1.0, tree.pi)
    pr_mu = pr_pi * (rho_tilde @ mu)
    rho = rho_tilde * pr_pi[:, None]
    tv = np.array(
        [
            np.sum(np.abs(rho[:, i] - rho[:, j]))
            for i, j in state_pairs(tree.size)
        ]
    )
    return _Partial(
        max_norm=float(norms.max()) if len(norms) else 0.0,
        sum_pi=float(np.sum(pr_pi * norms)),
        sum_mu=float(np.sum(pr_mu * norms)),
        tv=tv,
        impossible=int(np.count_nonzero(~ok)),
    )


def exhaustive_stats(
    tree: TreeSpec, mu, settings: Optional[Settings] = None
) -> ExperimentRow:
    """Exact memory-norm and total-variation statistics over all patterns.

    Examples
    --------
    >>> from infoflow.channel import binary_symmetric
    >>> tree = build_complete_dary(2, 1, binary_symmetric(0.25))
    >>> row = exhaustive_stats(tree, tree.pi)
    >>> round(row.expected_memory_norm_pi, 12), round(row.tv_sums[0, 1], 12)
    (0.5, 1.0)
    """
    settings = settings or get_settings()
    mu = check_prior(mu, tree.size)
    count = check_enumerable(tree, settings)
    tasks = [
        (tree, mu, start, stop)
        for start, stop in _blocks(count, settings.block_size)
    ]
    partials = _run_blocks(_stats_block, tasks, settings)
    pairs = state_pairs(tree.size)
    row = ExperimentRow(
        g=tree.levels,
        pattern_count=count,
        max_memory_norm=max(p.max_norm for p in partials),
        expected_memory_norm_pi=math.fsum(p.sum_pi for p in partials),
        expected_memory_norm_mu=math.fsum(p.sum_mu for p in partials),
        tv_sums={
            pair: math.fsum(p.tv[k] for p in partials)
            for k, pair in enumerate(pairs)
        },
        impossible_count=sum(p.impossible for p in partials),
    )
    logger.info(
        "g=%d: %d patterns, max memory norm %.6g",
        row.g,
        count,
        row.max_memory_norm,
    )
    return row


@dataclass
class ChainCheck:
    """Worst gap lhs - rhs over every instance of one inequality family."""

    name: str
    instances: int = 0
    violations: int = 0
    worst_gap: float = -math.inf

    @property
    def holds(self) -> bool:
        return self.violations == 0

    def update(self, lhs: np.ndarray, rhs: np.ndarray):
        lhs, rhs = np.broadcast_arrays(np.asarray(lhs), np.asarray(rhs))
        if lhs.size == 0:
            return
        gap = lhs - rhs
        tolerance = CHAIN_TOL * np.maximum(1.0, np.abs(rhs))
        self.instances += gap.size
        self.violations += int(np.count_nonzero(gap > tolerance))
        self.worst_gap = max(self.worst_gap, float(gap.max()))

    def merge(self, other: "ChainCheck"):
        self.instances += other.instances
        self.violations += other.violations
        self.worst_gap = max(self.worst_gap, other.worst_gap)

    def to_dict(self) -> dict:
        return {
            "instances": self.instances,
            "violations": self.violations,
            "worst_gap": self.worst_gap if self.instances else None,
            "holds": self.holds,
        }


@dataclass
class EquivalenceReport:
    """Inequality chains linking the unsolvability notions."""

    pattern_count: int
    checks: dict[str, ChainCheck]
    expected_l1_mu: float
    expected_l1_pi: float

    @property
    def holds(self) -> bool:
        return all(check.holds for check in self.checks.values())

    def to_dict(self) -> dict:
        return {
            "pattern_count": self.pattern_count,
            "expected_l1_mu": self.expected_l1_mu,
            "expected_l1_pi": self.expected_l1_pi,
            "checks": {k: v.to_dict() for k, v in self.checks.items()},
            "holds": self.holds,
        }


_PATTERN_CHAINS = (
    "pr_lower",
    "pr_upper",
    "pairwise_triangle",
    "centered_by_pairs",
)


def _equivalence_block(
    tree: TreeSpec, mu: np.ndarray, start: int, stop: int
) -> tuple[dict[str, ChainCheck], float, float]:
    batch = prune_batch(tree, pattern_block(tree, start, stop))
    ok = batch.possible
    rho_tilde = batch.rho_tilde[ok]
    pr_pi = np.exp(batch.log_pr_pi[ok])
    pr_mu = pr_pi * (rho_tilde @ mu)
    pi = tree.pi
    checks = {name: ChainCheck(name) for name in _PATTERN_CHAINS}
    checks["pr_lower"].update(pr_mu * pi.min(), pr_pi)
    checks["pr_upper"].update(pr_pi, pr_mu / mu.min())
    centered = np.abs(rho_tilde - 1.0)
    for i, j in itertools.permutations(range(tree.size), 2):
        checks["pairwise_triangle"].update(
            np.abs(rho_tilde[:, i] - rho_tilde[:, j]),
            centered[:, i] + centered[:, j],
        )
    for i in range(tree.size):
        spread = np.abs(rho_tilde[:, [i]] - rho_tilde)
        checks["centered_by_pairs"].update(centered[:, i], spread @ pi)
    norms = l1_norm(rho_tilde - 1.0)
    return (
        checks,
        float(np.sum(pr_mu * norms)),
        float(np.sum(pr_pi * norms)),
    )


def equivalence_check(
    tree: TreeSpec, mu, settings: Optional[Settings] = None
) -> EquivalenceReport:
    """Check the chains tying prior-weighted, pi-weighted and TV sums.

    Per pattern: min pi Pr(p) <= Pr_pi(p) <= Pr(p) / min mu, the
    pairwise triangle inequality on normalized likelihoods and
    |a_i - 1| <= sum_j pi_j |a_i - a_j|. Over all patterns, with the L1
    norm: min pi E_mu <= E_pi <= E_mu / min mu.
    """
    settings = settings or get_settings()
    mu = check_prior(mu, tree.size)
    count = check_enumerable(tree, settings)
    tasks = [
        (tree, mu, start, stop)
        for start, stop in _blocks(count, settings.block_size)
    ]
    results = _run_blocks(_equivalence_block, tasks, settings)
    checks = {name: ChainCheck(name) for name in _PATTERN_CHAINS}
    for block_checks, _, _ in results:
        for name, check in block_checks.items():
            checks[name].merge(check)
    e_mu = math.fsum(r[1] for r in results)
    e_pi = math.fsum(r[2] for r in results)
    lower = ChainCheck("expectation_lower")
    upper = ChainCheck("expectation_upper")
    lower.update(tree.pi.min() * e_mu, e_pi)
    upper.update(e_pi, e_mu / mu.min())
    checks[lower.name], checks[upper.name] = lower, upper
    return EquivalenceReport(count, checks, e_mu, e_pi)


def decay_sweep(
    channel: Channel,
    d: int,
    g_min: int,
    g_max: int,
    mode: ContractionMode = ContractionMode.TIGHT_PI_OPERATOR,
    mu=None,
    settings: Optional[Settings] = None,
) -> ExperimentReport:
    """Exhaustive memory norms of complete d-ary trees, level by level.

    The decay ratio of a row is its max memory norm over the one of the
    previous level; the first row is compared with g_min - 1. When the
    channel is certified unsolvable, every row is checked against the
    certified decay (see ``ExperimentReport.check_bounds``).
    """
    settings = settings or get_settings()
    if not 0 <= g_min <= g_max:
        raise ValueError(f"Invalid level range {g_min}..{g_max}.")
    mu = channel.pi if mu is None else mu
    tree = build_complete_dary(d, g_max, channel, settings)
    check_enumerable(tree, settings)

    report = ExperimentReport(
        size=channel.size,
        certificate=certify_channel(channel, d, mode),
        min_pi=channel.min_pi,
    )
    previous = None
    if g_min > 0:
        baseline = build_complete_dary(d, g_min - 1, channel, settings)
        previous = exhaustive_stats(baseline, mu, settings).max_memory_norm
    for g in range(g_min, g_max + 1):
        tree = build_complete_dary(d, g, channel, settings)
        row = exhaustive_stats(tree, mu, settings)
        if previous:
            row.decay_ratio = row.max_memory_norm / previous
        previous = row.max_memory_norm
        report.check_bounds(row)
        report.rows.append(row)
    if not report.bounds_hold:
        logger.warning("Observed memory norms exceed the certified decay")
    return report


@dataclass(frozen=True)
class MonteCarloEstimate:
    correct: int
    n_samples: int

    @property
    def accuracy(self) -> float:
        return self.correct / self.n_samples

    @property
    def standard_error(self) -> float:
        p = self.accuracy
        return math.sqrt(p * (1 - p) / self.n_samples)

    def to_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "correct": self.correct,
            "map_acc": self.accuracy,
            "map_se": self.standard_error,
        }


def _reconstruction_block(
    tree: TreeSpec, mu: np.ndarray, seed, block: int, n: int
) -> int:
    stream = np.random.SeedSequence(seed, spawn_key=(block,))
    rng = np.random.default_rng(stream)
    roots, patterns = sample_patterns(tree, mu, n, rng)
    batch = prune_batch(tree, patterns)
    return int(np.count_nonzero(map_states(batch.rho_tilde, mu) == roots))


def monte_carlo_reconstruction(
    tree: TreeSpec,
    mu,
    n_samples: int,
    seed: Optional[int],
    settings: Optional[Settings] = None,
) -> MonteCarloEstimate:
    """Fraction of samples whose MAP root state equals the sampled one."""
    settings = settings or get_settings()
    mu = check_prior(mu, tree.size)
    if n_samples < 1:
        raise ValueError(f"Need at least one sample, got {n_samples}.")
    tasks = [
        (tree, mu, seed, block, stop - start)
        for block, (start, stop) in enumerate(
            _blocks(n_samples, settings.mc_block_size)
        )
    ]
    correct = _run_blocks(_reconstruction_block, tasks, settings)
    estimate = MonteCarloEstimate(sum(correct), n_samples)
    logger.info(
        "MAP accuracy %.4f +/- %.4f over %d samples",
        estimate.accuracy,
        estimate.standard_error,
        n_samples,
    )
    return estimate


def simulate_sweep(
    channel: Channel,
    d: int,
    levels: Sequence[int],
    mu,
    n_samples: int,
    seed: Optional[int],
    settings: Optional[Settings] = None,
) -> ExperimentReport:
    """Monte Carlo MAP accuracy on complete d-ary trees of several depths."""
    report = ExperimentReport(size=channel.size, min_pi=channel.min_pi)
    for g in levels:
        tree = build_complete_dary(d, g, channel, settings)
        estimate = monte_carlo_reconstruction(
            tree, mu, n_samples, seed, settings
        )
        report.rows.append(
            ExperimentRow(
                g=g,
                map_accuracy=estimate.accuracy,
                map_se=estimate.standard_error,
            )
        )
    return report


@dataclass
class CertificationTally:
    """Outcome counts of one certificate family over all patterns."""

    condition_id: ConditionId
    patterns: int = 0
    precondition_met: int = 0
    holds: int = 0
    boundary: int = 0
    violated: int = 0

    def add(self, certificate: BoundCertificate):
        self.patterns += 1
        match certificate.verdict:
            case Verdict.PRECONDITION_UNMET:
                return
            case Verdict.HOLDS:
                self.holds += 1
            case Verdict.BOUNDARY:
                self.boundary += 1
            case Verdict.VIOLATED:
                self.violated += 1
        self.precondition_met += 1

    def merge(self, other: "CertificationTally"):
        self.patterns += other.patterns
        self.precondition_met += other.precondition_met
        self.holds += other.holds
        self.boundary += other.boundary
        self.violated += other.violated

    def to_dict(self) -> dict:
        return {
            "patterns": self.patterns,
            "precondition_met": self.precondition_met,
            "holds": self.holds,
            "boundary": self.boundary,
            "violated": self.violated,
        }


@dataclass
class ExhaustiveCertification:
    pattern_count: int
    impossible_count: int
    tallies: dict[ConditionId, CertificationTally]

    @property
    def violations(self) -> int:
        return sum(t.violated for t in self.tallies.values())

    def to_dict(self) -> dict:
        return {
            "pattern_count": self.pattern_count,
            "impossible_count": self.impossible_count,
            "tallies": {
                k.value: v.to_dict() for k, v in self.tallies.items()
            },
        }


_PATTERN_CONDITIONS = (
    ConditionId.MIXING,
    ConditionId.HADAMARD,
    ConditionId.ROOT_CHILDREN,
)


def _certify_block(
    tree: TreeSpec,
    eps: float,
    constants: list[float],
    start: int,
    stop: int,
) -> tuple[dict[ConditionId, CertificationTally], int]:
    kids = tree.children[tree.root]
    patterns = pattern_block(tree, start, stop)
    batch = prune_batch(tree, patterns, keep=kids)
    tallies = {c: CertificationTally(c) for c in _PATTERN_CONDITIONS}
    for row in np.flatnonzero(batch.possible):
        children = []
        for kid in kids:
            vectors, logs = batch.nodes[kid]
            children.append(
                (
                    LikelihoodState(vectors[row], float(logs[row]), tree.pi),
                    tree.channel(tree.root, kid),
                )
            )
        clades = CladeLikelihoods(batch.state(row, tree.pi), children)
        pattern = Pattern(tuple(int(s) for s in patterns[row]))
        result = certify_clades(pattern, clades, tree.pi, eps, constants)
        for certificate in result.certificates:
            tallies[certificate.condition_id].add(certificate)
    return tallies, int(np.count_nonzero(~batch.possible))


def certify_exhaustive(
    tree: TreeSpec,
    eps: float = PATTERNWISE_EPS,
    mode: ContractionMode = ContractionMode.TIGHT_PI_OPERATOR,
    settings: Optional[Settings] = None,
) -> ExhaustiveCertification:
    """Root certificates for every pattern of a tree, tallied by family."""
    settings = settings or get_settings()
    count = check_enumerable(tree, settings)
    constants = edge_constants(tree, tree.root, mode)
    tasks = [
        (tree, eps, constants, start, stop)
        for start, stop in _blocks(count, settings.block_size)
    ]
    results = _run_blocks(_certify_block, tasks, settings)
    tallies = {c: CertificationTally(c) for c in _PATTERN_CONDITIONS}
    impossible = 0
    for block_tallies, block_impossible in results:
        for condition, tally in block_tallies.items():
            tallies[condition].merge(tally)
        impossible += block_impossible
    return ExhaustiveCertification(count, impossible, tallies)


def _flow_block(
    tree: TreeSpec, start: int, stop: int
) -> tuple[float, list[float]]:
    kids = tree.children[tree.root]
    batch = prune_batch(tree, pattern_block(tree, start, stop), keep=kids)
    ok = batch.possible
    pr_pi = np.exp(batch.log_pr_pi[ok])
    root = float(np.sum(pr_pi * pi_norm(batch.rho_tilde[ok] - 1.0, tree.pi)))
    children = []
    for kid in kids:
        vectors, _ = batch.nodes[kid]
        norms = pi_norm(vectors[ok] - 1.0, tree.pi)
        children.append(float(np.sum(pr_pi * norms)))
    return root, children


def expectation_flow_check(
    tree: TreeSpec,
    eps: float = PATTERNWISE_EPS,
    mode: ContractionMode = ContractionMode.TIGHT_PI_OPERATOR,
    settings: Optional[Settings] = None,
) -> BoundCertificate:
    """pi-expected root memory against the pi-expected child memories.

    The child expectations are taken over the full patterns; each child
    norm depends on its own subpattern only, whose pi-marginal is its
    own pattern probability.
    """
    settings = settings or get_settings()
    count = check_enumerable(tree, settings)
    constants = edge_constants(tree, tree.root, mode)
    if not constants:
        raise ValueError("The root of the tree has no children.")
    results = _run_blocks(
        _flow_block,
        [
            (tree, start, stop)
            for start, stop in _blocks(count, settings.block_size)
        ],
        settings,
    )
    root = math.fsum(r[0] for r in results)
    children = [
        math.fsum(r[1][k] for r in results) for k in range(len(constants))
    ]
    limit = threshold_scale(tree.min_pi) * mixing_threshold(eps)
    precondition = Inequality(
        "sum_constants", math.fsum(constants), limit, strict=False
    )
    conclusions = ()
    if precondition.met:
        weighted = math.fsum(c * e for c, e in zip(constants, children))
        conclusions = (Inequality("expected", root, (1 + eps) * weighted),)
    return BoundCertificate(
        condition_id=ConditionId.EXPECTATION_FLOW,
        inputs={
            "constants": constants,
            "child_expectations": children,
            "root_expectation": root,
            "min_pi": tree.min_pi,
            "eps": eps,
        },
        precondition=precondition,
        conclusions=conclusions,
        epsilon_used=eps,
    )
