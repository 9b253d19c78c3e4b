"""Global rhythm trees over the simplified rule vocabulary.

Per-measure parse trees are gathered under one global root (so depth stays
bounded no matter how long the track is) and every rule application is
mapped onto a fixed 15-identifier vocabulary:

====  ==========================================
id    meaning
====  ==========================================
0     leaf (note, rest or continuation)
1     global root, parent of all measures
5     whole into two halves
6     whole into a triplet
7     half into two quarters
8     half into a triplet
9     quarter into two eighths
10    quarter into a triplet
11    quarter into four sixteenths
12    eighth into two sixteenths
13    sixteenth into two thirty-seconds
====  ==========================================

Identifiers 2, 3, 4 and 14 are reserved and unused. The division key is
(parent's notated duration, arity): a k-plet's children are notated at the
parent's next binary subdivision (a triplet of a whole note is three
halves), which matches how the grammar types its division bodies.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import SimplificationError
from .parser import ParseNode, ParseTree

TERMINAL_ID = 0
ROOT_ID = 1
SIMPLIFIED_RULE_COUNT = 15
DEFAULT_INSTRUMENT_COUNT = 22

#: (notated duration of the divided node, arity) -> simplified rule id
DIVISION_IDS: dict[tuple[Fraction, int], int] = {
    (Fraction(1, 1), 2): 5,
    (Fraction(1, 1), 3): 6,
    (Fraction(1, 2), 2): 7,
    (Fraction(1, 2), 3): 8,
    (Fraction(1, 4), 2): 9,
    (Fraction(1, 4), 3): 10,
    (Fraction(1, 4), 4): 11,
    (Fraction(1, 8), 2): 12,
    (Fraction(1, 16), 2): 13,
}

#: child count per simplified id (the root's arity is the measure count)
SIMPLIFIED_ARITIES: dict[int, int] = {
    TERMINAL_ID: 0,
    5: 2,
    6: 3,
    7: 2,
    8: 3,
    9: 2,
    10: 3,
    11: 4,
    12: 2,
    13: 2,
}

_DURATION_NAMES = {
    Fraction(1, 1): "whole",
    Fraction(1, 2): "half",
    Fraction(1, 4): "quarter",
    Fraction(1, 8): "eighth",
    Fraction(1, 16): "sixteenth",
    Fraction(1, 32): "thirty-second",
}


@dataclass(frozen=True)
class RhythmNode:
    """Simplified tree node. Leaves carry a per-instrument velocity tuple."""

    id: int
    children: tuple["RhythmNode", ...] = ()
    velocities: tuple[float, ...] | None = None

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def walk(self):
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass(frozen=True)
class RhythmTree:
    """Global tree: a root (id 1) whose children are the measure subtrees."""

    root: RhythmNode

    @property
    def measure_count(self) -> int:
        return len(self.root.children)

    def preorder(self) -> list[RhythmNode]:
        return list(self.root.walk())

    @property
    def node_count(self) -> int:
        return sum(1 for _ in self.root.walk())

    @property
    def leaf_count(self) -> int:
        return sum(1 for node in self.root.walk() if node.is_leaf)

    @property
    def max_depth(self) -> int:
        def depth(node: RhythmNode) -> int:
            if node.is_leaf:
                return 0
            return 1 + max(depth(child) for child in node.children)

        return depth(self.root)


@dataclass(frozen=True)
class GlobalParse:
    """Measure parse trees re-rooted under one synthetic root, before rule
    simplification."""

    measures: tuple[ParseTree, ...]

    @property
    def root_child_count(self) -> int:
        return len(self.measures)

    @property
    def max_depth(self) -> int:
        def depth(node: ParseNode) -> int:
            if node.is_leaf:
                return 0
            return 1 + max(depth(child) for child in node.children)

        return 1 + max(depth(tree.root) for tree in self.measures)


def reroot_measures(trees: Sequence[ParseTree]) -> GlobalParse:
    """Gather per-measure parses under a single root, in temporal order.

    The measure subtrees are unchanged; total depth becomes one more than
    the deepest measure instead of growing with track length.
    """
    if not trees:
        raise ValueError("cannot re-root an empty measure list")
    return GlobalParse(tuple(trees))


def _leaf_velocities(node: ParseNode, tree: ParseTree, n: int) -> tuple[float, ...]:
    velocities = np.zeros(n)
    for index in node.cluster_indices:
        if index < len(tree.clusters) and tree.clusters[index] is not None:
            velocities = np.maximum(velocities, tree.clusters[index].velocity_by_instrument)
    return tuple(velocities.tolist())


def _duration_name(notated: Fraction) -> str:
    return _DURATION_NAMES.get(notated, str(notated))


def _simplify_node(node: ParseNode, notated: Fraction, tree: ParseTree, n: int) -> RhythmNode:
    if node.is_leaf:
        return RhythmNode(TERMINAL_ID, (), _leaf_velocities(node, tree, n))
    arity = len(node.children)
    rule_id = DIVISION_IDS.get((notated, arity))
    if rule_id is None:
        raise SimplificationError(
            f"no simplified rule for a {arity}-way division of a "
            f"{_duration_name(notated)} node at {node.interval}"
        )
    child_notated = notated / (1 << (arity.bit_length() - 1))
    children = tuple(_simplify_node(child, child_notated, tree, n) for child in node.children)
    return RhythmNode(rule_id, children)


def simplify_rules(parse: GlobalParse, n_instruments: int | None = None) -> RhythmTree:
    """Map a re-rooted parse onto the simplified vocabulary.

    Leaf velocity vectors are the per-instrument maxima over the clusters
    the leaf absorbed (all zeros for continuations). ``n_instruments``
    defaults to the cluster vector length found in the parse, or to the
    standard 22-instrument kit when the parse holds no clusters at all.
    """
    if n_instruments is None:
        n_instruments = next(
            (
                len(cluster.velocity_by_instrument)
                for tree in parse.measures
                for cluster in tree.clusters
                if cluster is not None
            ),
            DEFAULT_INSTRUMENT_COUNT,
        )
    measures = tuple(
        _simplify_node(tree.root, Fraction(1), tree, n_instruments) for tree in parse.measures
    )
    return RhythmTree(RhythmNode(ROOT_ID, measures))


@dataclass(frozen=True)
class TreeStats:
    node_count: int
    leaf_count: int
    max_depth: int
    id_histogram: dict[int, int]


def tree_stats(tree: RhythmTree) -> TreeStats:
    """Exact node/leaf/depth counts plus a per-identifier histogram."""
    histogram: dict[int, int] = {}
    for node in tree.root.walk():
        histogram[node.id] = histogram.get(node.id, 0) + 1
    return TreeStats(tree.node_count, tree.leaf_count, tree.max_depth, histogram)


def rhythm_tree(trees: Sequence[ParseTree], n_instruments: int | None = None) -> RhythmTree:
    """Re-root and simplify in one step."""
    return simplify_rules(reroot_measures(trees), n_instruments)
