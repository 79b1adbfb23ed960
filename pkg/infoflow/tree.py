"""Rooted trees with a channel on every edge, and leaf patterns.

Leaves are ordered depth-first, left to right, following the child order
given at construction. Pattern index i is the i-th pattern in
lexicographic order over that leaf order.

Examples
--------
>>> from infoflow.channel import binary_symmetric
>>> tree = build_complete_dary(2, 1, binary_symmetric(0.25))
>>> tree.n_nodes, len(tree.leaves), tree.levels
(3, 2, 1)
>>> [str(p) for p in enumerate_patterns(tree)]
['00', '01', '10', '11']
"""

from dataclasses import dataclass, field
from functools import cached_property
import itertools
import logging
from typing import Any, Iterator, Mapping, Optional, Sequence

import numpy as np

from .channel import Channel, validate_channel
from .config import Settings, get_settings
from .errors import (
    DimensionMismatchError,
    EnumerationTooLargeError,
    MalformedSpecError,
    MixedEquilibriaError,
    SizeOverflowError,
    StateOutOfRangeError,
    UnknownChannelError,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Pattern:
    """Ordered leaf states.

    Examples
    --------
    >>> p = Pattern.parse("01302002")
    >>> len(p), p.states[:3]
    (8, (0, 1, 3))
    >>> str(Pattern.from_index(5, n_leaves=3, size=2))
    '101'
    """

    states: tuple[int, ...]

    @classmethod
    def parse(cls, text: str) -> "Pattern":
        """Parse a digit string or a comma-separated list of states."""
        text = text.strip()
        tokens = text.split(",") if "," in text else list(text)
        try:
            states = tuple(int(tok) for tok in tokens)
        except ValueError as err:
            raise MalformedSpecError(f"Invalid pattern: {text!r}") from err
        if not states or any(s < 0 for s in states):
            raise MalformedSpecError(f"Invalid pattern: {text!r}")
        return cls(states)

    @classmethod
    def from_index(cls, index: int, n_leaves: int, size: int) -> "Pattern":
        """Decode the lexicographic index of a pattern."""
        states = []
        for _ in range(n_leaves):
            index, state = divmod(index, size)
            states.append(state)
        return cls(tuple(reversed(states)))

    def __len__(self) -> int:
        return len(self.states)

    def __str__(self) -> str:
        if all(s < 10 for s in self.states):
            return "".join(str(s) for s in self.states)
        return ",".join(str(s) for s in self.states)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.states, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class TreeSpec:
    """Rooted tree with per-edge channels sharing one equilibrium.

    Build instances with ``build_complete_dary``, ``build_from_spec`` or
    ``assemble_tree``, which validate the structure.
    """

    root: str
    children: Mapping[str, tuple[str, ...]]
    edge_channels: Mapping[tuple[str, str], Channel]
    leaves: tuple[str, ...]
    levels: int
    max_arity: int
    pi: np.ndarray
    size: int
    edge_names: Mapping[tuple[str, str], str] = field(default_factory=dict)

    @property
    def K(self) -> int:
        return self.size - 1

    @property
    def n_nodes(self) -> int:
        return len(self.children)

    @property
    def n_leaves(self) -> int:
        return len(self.leaves)

    @property
    def min_pi(self) -> float:
        return float(self.pi.min())

    @cached_property
    def preorder(self) -> tuple[str, ...]:
        return tuple(_depth_first(self.root, self.children))

    @cached_property
    def postorder(self) -> tuple[str, ...]:
        """Internal nodes with every child before its parent."""
        return tuple(
            node for node in reversed(self.preorder) if self.children[node]
        )

    @cached_property
    def leaf_index(self) -> dict[str, int]:
        return {leaf: i for i, leaf in enumerate(self.leaves)}

    @cached_property
    def _leaf_spans(self) -> dict[str, tuple[int, int]]:
        spans = {}
        for node in reversed(self.preorder):
            kids = self.children[node]
            if not kids:
                i = self.leaf_index[node]
                spans[node] = (i, i + 1)
            else:
                spans[node] = (spans[kids[0]][0], spans[kids[-1]][1])
        return spans

    def channel(self, parent: str, child: str) -> Channel:
        return self.edge_channels[(parent, child)]

    def subtree_leaves(self, node: str) -> slice:
        """Positions in the pattern of the leaves below node."""
        start, stop = self._leaf_spans[node]
        return slice(start, stop)

    def subpattern(self, pattern: Pattern, node: str) -> Pattern:
        """Restriction of a pattern to the clade rooted at node."""
        return Pattern(pattern.states[self.subtree_leaves(node)])

    def check_pattern(self, pattern: Pattern) -> Pattern:
        if len(pattern) != self.n_leaves:
            raise DimensionMismatchError(
                f"Pattern {pattern} has {len(pattern)} states, "
                f"the tree has {self.n_leaves} leaves."
            )
        bad = [s for s in pattern.states if not 0 <= s <= self.K]
        if bad:
            raise StateOutOfRangeError(
                f"States {bad} are outside the alphabet 0..{self.K}."
            )
        return pattern

    def to_dict(self) -> dict:
        return {
            "root": self.root,
            "n_nodes": self.n_nodes,
            "leaves": list(self.leaves),
            "levels": self.levels,
            "max_arity": self.max_arity,
            "pi": self.pi,
        }


def _depth_first(root: str, children: Mapping[str, Sequence[str]]):
    stack = [root]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children[node]))


def assemble_tree(
    root: str,
    children: Mapping[str, Sequence[str]],
    edge_channels: Mapping[tuple[str, str], Channel],
    *,
    edge_names: Optional[Mapping[tuple[str, str], str]] = None,
    default_channel: Optional[Channel] = None,
    settings: Optional[Settings] = None,
) -> TreeSpec:
    """Validate topology and shared equilibrium, then build a TreeSpec.

    ``children`` must list every node. ``default_channel`` supplies the
    alphabet of a tree without edges.
    """
    settings = settings or get_settings()
    children = {node: tuple(kids) for node, kids in children.items()}
    if root not in children:
        raise MalformedSpecError(f"Root {root!r} is not a node.")
    if len(children) > settings.node_cap:
        raise SizeOverflowError(
            f"Tree has {len(children)} nodes, cap is {settings.node_cap}."
        )

    channels = list(edge_channels.values()) or [default_channel]
    if channels[0] is None:
        raise MalformedSpecError("A tree needs at least one channel.")
    reference = channels[0]
    for channel in channels[1:]:
        if channel.size != reference.size:
            raise DimensionMismatchError(
                f"Channels of sizes {reference.size} and {channel.size} "
                "cannot share a tree."
            )
        gap = float(np.max(np.abs(channel.pi - reference.pi)))
        if gap > settings.equilibrium_tol:
            raise MixedEquilibriaError(
                f"Edge channels have different equilibria {reference.pi} "
                f"and {channel.pi} (gap {gap:.3e})."
            )

    leaves, levels, max_arity = [], 0, 0
    depth = {root: 0}
    seen = set()
    for node in _depth_first(root, children):
        if node in seen:
            raise MalformedSpecError(f"Node {node!r} is reached twice.")
        seen.add(node)
        kids = children[node]
        max_arity = max(max_arity, len(kids))
        if not kids:
            leaves.append(node)
            levels = max(levels, depth[node])
        for kid in kids:
            if kid not in children:
                raise MalformedSpecError(f"Unknown node {kid!r}.")
            if (node, kid) not in edge_channels:
                raise MalformedSpecError(
                    f"Edge {node!r} -> {kid!r} has no channel."
                )
            depth[kid] = depth[node] + 1
    unreachable = set(children) - seen
    if unreachable:
        raise MalformedSpecError(
            f"Nodes {sorted(unreachable)} are not reachable from the root."
        )

    logger.debug(
        "Assembled tree: %d nodes, %d leaves, %d levels, arity %d",
        len(children),
        len(leaves),
        levels,
        max_arity,
    )
    return TreeSpec(
        root=root,
        children=children,
        edge_channels=dict(edge_channels),
        leaves=tuple(leaves),
        levels=levels,
        max_arity=max_arity,
        pi=reference.pi,
        size=reference.size,
        edge_names=dict(edge_names or {}),
    )


def complete_node_count(d: int, g: int) -> int:
    """Number of nodes of a complete d-ary tree with g levels.

    Examples
    --------
    >>> complete_node_count(4, 2)
    21
    >>> complete_node_count(1, 5)
    6
    """
    if d == 1:
        return g + 1
    return (d ** (g + 1) - 1) // (d - 1)


def build_complete_dary(
    d: int,
    g: int,
    channel: Channel,
    settings: Optional[Settings] = None,
) -> TreeSpec:
    """Complete d-ary tree with g levels and the same channel everywhere.

    Node ids are paths from the root: "r", "r.0", "r.0.1", ...
    """
    settings = settings or get_settings()
    if d < 1 or g < 0:
        raise MalformedSpecError(f"Need d >= 1 and g >= 0, got {d}, {g}.")
    count = complete_node_count(d, g)
    if count > settings.node_cap:
        raise SizeOverflowError(
            f"A complete {d}-ary tree with {g} levels has {count} nodes, "
            f"cap is {settings.node_cap}."
        )
    children: dict[str, tuple[str, ...]] = {}
    edges = {}
    frontier = ["r"]
    for _ in range(g):
        next_frontier = []
        for node in frontier:
            kids = tuple(f"{node}.{i}" for i in range(d))
            children[node] = kids
            for kid in kids:
                edges[(node, kid)] = channel
            next_frontier.extend(kids)
        frontier = next_frontier
    for node in frontier:
        children[node] = ()
    return assemble_tree(
        "r", children, edges, default_channel=channel, settings=settings
    )


def build_from_spec(
    document: Any,
    settings: Optional[Settings] = None,
    **channel_kwargs,
) -> TreeSpec:
    """Build a tree from a document.

    The document has the form
    {"channels": {name: matrix}, "root": id, "edges": [[parent, child,
    name], ...]}. A channel may also be given as {"matrix": matrix}.
    Edges are listed in child order.
    """
    if not isinstance(document, Mapping):
        raise MalformedSpecError("Tree document must be a mapping.")
    missing = {"channels", "root"} - set(document)
    if missing:
        raise MalformedSpecError(f"Tree document lacks {sorted(missing)}.")
    raw_channels = document["channels"]
    if not isinstance(raw_channels, Mapping):
        raise MalformedSpecError("'channels' must map names to matrices.")

    channels = {}
    for name, value in raw_channels.items():
        if isinstance(value, Mapping):
            value = value.get("matrix")
        channels[str(name)] = validate_channel(value, **channel_kwargs)

    root = str(document["root"])
    children: dict[str, list[str]] = {root: []}
    edge_channels, edge_names = {}, {}
    parents: dict[str, str] = {}
    for edge in document.get("edges") or []:
        if not isinstance(edge, Sequence) or len(edge) != 3:
            raise MalformedSpecError(
                f"Edge {edge!r} must be [parent, child, channel]."
            )
        parent, child, name = str(edge[0]), str(edge[1]), str(edge[2])
        if name not in channels:
            raise UnknownChannelError(
                f"Edge {parent!r} -> {child!r} uses unknown channel "
                f"{name!r}. Defined channels: {sorted(channels)}"
            )
        if child == root:
            raise MalformedSpecError(f"Root {root!r} cannot be a child.")
        if child in parents:
            raise MalformedSpecError(
                f"Node {child!r} has two parents: {parents[child]!r} "
                f"and {parent!r}."
            )
        parents[child] = parent
        children.setdefault(parent, []).append(child)
        children.setdefault(child, [])
        edge_channels[(parent, child)] = channels[name]
        edge_names[(parent, child)] = name

    default = next(iter(channels.values()), None)
    return assemble_tree(
        root,
        children,
        edge_channels,
        edge_names=edge_names,
        default_channel=default,
        settings=settings,
    )


def random_tree(
    rng: np.random.Generator,
    channels: Sequence[Channel],
    max_levels: int = 3,
    max_children: int = 3,
    settings: Optional[Settings] = None,
) -> TreeSpec:
    """Random tree whose edges pick uniformly among ``channels``.

    The root always has at least one child, so the tree has at least one
    level.
    """
    levels = int(rng.integers(1, max_levels + 1))
    children: dict[str, tuple[str, ...]] = {}
    edges = {}
    stack = [("r", 0)]
    while stack:
        node, depth = stack.pop()
        if depth == levels:
            n_kids = 0
        else:
            low = 1 if depth == 0 else 0
            n_kids = int(rng.integers(low, max_children + 1))
        kids = tuple(f"{node}.{i}" for i in range(n_kids))
        children[node] = kids
        for kid in kids:
            edges[(node, kid)] = channels[int(rng.integers(len(channels)))]
            stack.append((kid, depth + 1))
    return assemble_tree(
        "r", children, edges, default_channel=channels[0], settings=settings
    )


def pattern_count(tree: TreeSpec) -> int:
    """Number of patterns (K + 1) ** n_leaves."""
    return tree.size**tree.n_leaves


def check_enumerable(tree: TreeSpec, settings: Optional[Settings] = None):
    settings = settings or get_settings()
    count = pattern_count(tree)
    if count > settings.enumeration_cap:
        raise EnumerationTooLargeError(
            f"{count} patterns exceed the enumeration cap "
            f"{settings.enumeration_cap}."
        )
    return count


def enumerate_patterns(
    tree: TreeSpec, settings: Optional[Settings] = None
) -> Iterator[Pattern]:
    """Iterate over every pattern once, in lexicographic order.

    The enumeration cap is checked before the iterator is returned.
    """
    check_enumerable(tree, settings)
    states = itertools.product(range(tree.size), repeat=tree.n_leaves)
    return (Pattern(s) for s in states)


def pattern_block(tree: TreeSpec, start: int, stop: int) -> np.ndarray:
    """Decode the patterns with lexicographic index in [start, stop).

    Examples
    --------
    >>> from infoflow.channel import binary_symmetric
    >>> tree = build_complete_dary(2, 1, binary_symmetric(0.25))
    >>> pattern_block(tree, 1, 4).tolist()
    [[0, 1], [1, 0], [1, 1]]
    """
    index = np.arange(start, stop, dtype=np.int64)
    block = np.empty((len(index), tree.n_leaves), dtype=np.int64)
    for position in range(tree.n_leaves - 1, -1, -1):
        index, block[:, position] = np.divmod(index, tree.size)
    return block
