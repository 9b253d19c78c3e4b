"""Minimum-penalty parsing of one measure under a weighted rhythm grammar.

Each measure is an interval [0, 1) holding a sorted list of onset
fractions. A derivation recursively divides the interval per the grammar's
division rules and closes sub-intervals with leaves: a continuation for an
empty interval, a single-event leaf for one onset, a grace leaf for two.
The cost of a derivation is the sum of the applied rule weights plus an
alignment penalty per event leaf, proportional to how far the main onset
sits from its interval start.

All arithmetic is exact. Onsets, interval bounds and costs are scaled to
integers over common denominators (k-ary division tiles the scaled grid
exactly, and rule weights are parsed from decimal text without rounding),
so equal costs compare equal and no epsilon appears anywhere. Ties are
broken structurally: fewer nodes first, then the lexicographically
smallest pre-order rule-index sequence.

Three solvers share the cost model but nothing else: the memoized dynamic
program :func:`best_parse_measure`, the direct recursion
:func:`brute_force_parse` (the same minimum computed with no memo table),
and :func:`enumerate_parses`, a best-first exhaustive listing of whole
derivations. The latter two exist to cross-check the first.
"""

from __future__ import annotations

import bisect
import heapq
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Sequence

from .errors import TrackParseError, UnparseableMeasureError
from .grammar import (
    CONTINUATION,
    DIVISION,
    EVENT,
    ProductionRule,
    WeightedGrammar,
    max_derivation_depth,
)
from .midi import DEFAULT_CLUSTER_THRESHOLD, MeasureClusters, Track, track_measures


@dataclass(frozen=True)
class Interval:
    """A sub-interval of the measure, in bar fractions."""

    start: Fraction
    duration: Fraction
    depth: int = 0

    @property
    def end(self) -> Fraction:
        return self.start + self.duration

    def child(self, index: int, arity: int) -> "Interval":
        step = self.duration / arity
        return Interval(self.start + index * step, step, self.depth + 1)

    def __str__(self) -> str:
        return f"[{self.start}, {self.end})"


@dataclass(frozen=True)
class ParseConfig:
    """Cost-model knobs.

    ``alpha`` scales the alignment penalty: a leaf whose main onset is
    displaced by a fraction ``x`` of the whole measure costs ``alpha * x``
    on top of its rule weight. The default makes a 1/32-bar displacement
    cost 0.25. ``tie_break`` currently supports only ``"nodes"``.
    """

    alpha: float = 8.0
    tie_break: str = "nodes"
    max_clusters_per_measure: int = 128

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.tie_break != "nodes":
            raise ValueError(f"unknown tie_break {self.tie_break!r}")


@dataclass(frozen=True)
class ParseNode:
    """One rule application. Leaves keep the indices of the clusters they
    absorbed (indices into the measure's cluster list)."""

    symbol: int
    interval: Interval
    applied: ProductionRule
    children: tuple["ParseNode", ...] = ()
    cluster_indices: tuple[int, ...] = ()

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def walk(self):
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass(frozen=True)
class ParseTree:
    """Best parse of one measure. ``weight`` is exact; ``total_weight`` is
    its float value."""

    root: ParseNode
    weight: Fraction
    fractions: tuple[float, ...]
    clusters: tuple = ()

    @property
    def total_weight(self) -> float:
        return float(self.weight)

    @property
    def node_count(self) -> int:
        return sum(1 for _ in self.root.walk())

    def preorder_rule_indices(self) -> tuple[int, ...]:
        return tuple(node.applied.index for node in self.root.walk())

    def leaves(self):
        return [node for node in self.root.walk() if node.is_leaf]


class _Scaled:
    """Shared exact fixed-point context for one measure.

    Positions live on an integer grid over ``position_scale`` (fine enough
    that every division and midpoint in any derivation stays integral);
    costs live over ``cost_scale`` (the common denominator of the rule
    weights and the scaled alignment penalty). Integer comparisons and sums
    then replace rational object arithmetic in the hot paths.
    """

    def __init__(self, fractions, grammar: WeightedGrammar, config: ParseConfig):
        fracs = [f if isinstance(f, Fraction) else Fraction(f) for f in fractions]
        if any(f < 0 or f >= 1 for f in fracs):
            raise ValueError("onset fractions must lie in [0, 1)")
        if any(b < a for a, b in zip(fracs, fracs[1:])):
            raise ValueError("onset fractions must be sorted ascending")
        if len(fracs) > config.max_clusters_per_measure:
            raise UnparseableMeasureError(
                f"{len(fracs)} clusters exceed the per-measure bound "
                f"{config.max_clusters_per_measure}"
            )
        arities = {r.body.arity for r in grammar.rules if r.body.kind == DIVISION}
        arity_lcm = math.lcm(*arities) if arities else 1
        depth = max_derivation_depth(grammar)
        onset_lcm = math.lcm(*(f.denominator for f in fracs)) if fracs else 1
        self.position_scale = onset_lcm * arity_lcm ** (depth + 1) * 2
        self.onsets = [int(f * self.position_scale) for f in fracs]
        self.fractions = tuple(float(f) for f in fracs)

        alpha = Fraction(config.alpha)
        weight_lcm = math.lcm(*(r.weight.denominator for r in grammar.rules))
        self.cost_scale = math.lcm(weight_lcm, alpha.denominator * self.position_scale)
        self.weights = [int(r.weight * self.cost_scale) for r in grammar.rules]
        # alignment cost = alpha * displacement/position_scale, over cost_scale
        self.alignment_unit = int(alpha * self.cost_scale / self.position_scale)
        self.grammar = grammar

    def weight_of(self, cost: int) -> Fraction:
        return Fraction(cost, self.cost_scale)

    def leaf_cost(self, rule: ProductionRule, start: int, lo: int, hi: int) -> int | None:
        """Scaled cost of a leaf rule over onsets[lo:hi], None if inapplicable."""
        body = rule.body
        if body.kind == CONTINUATION:
            return self.weights[rule.index] if hi == lo else None
        if body.kind == EVENT and hi - lo == body.event_count:
            # The last onset is the main note; earlier ones are uncosted graces.
            displacement = abs(self.onsets[hi - 1] - start)
            return self.weights[rule.index] + self.alignment_unit * displacement
        return None

    def spans(self, start: int, duration: int, arity: int, lo: int, hi: int):
        """Contiguous child index ranges under containment assignment.

        Child cells are half-open, so an onset exactly on a child start
        belongs to that (later) child, mirroring the measure convention.
        """
        step = duration // arity
        out = []
        cursor = lo
        for j in range(1, arity):
            boundary = bisect.bisect_left(self.onsets, start + j * step, cursor, hi)
            out.append((cursor, boundary))
            cursor = boundary
        out.append((cursor, hi))
        return out

    def interval(self, start: int, duration: int, depth: int = 0) -> Interval:
        return Interval(
            Fraction(start, self.position_scale),
            Fraction(duration, self.position_scale),
            depth,
        )

    @property
    def root_state(self):
        return (self.grammar.start, 0, self.position_scale, 0, len(self.onsets))


class _Candidate(NamedTuple):
    cost: int
    nodes: int
    rules: tuple[int, ...]
    node: ParseNode

    @property
    def key(self):
        return (self.cost, self.nodes, self.rules)


def partition_clusters(
    interval: Interval,
    arity: int,
    fractions: Sequence,
    span: tuple[int, int] | None = None,
) -> list[tuple[int, int]]:
    """Assign a contiguous cluster range to ``arity`` equal sub-intervals.

    Each onset goes to the half-open child cell containing it (an onset
    exactly on a child start belongs to that child). Sorted onsets map
    monotonically, so every child receives a contiguous index range and
    the ranges tile the input span.
    """
    if arity < 2:
        raise ValueError("arity must be >= 2")
    lo, hi = span if span is not None else (0, len(fractions))
    fracs = [f if isinstance(f, Fraction) else Fraction(f) for f in fractions]
    step = interval.duration / arity
    spans = []
    cursor = lo
    for j in range(1, arity):
        boundary = bisect.bisect_left(fracs, interval.start + j * step, cursor, hi)
        spans.append((cursor, boundary))
        cursor = boundary
    spans.append((cursor, hi))
    return spans


def best_parse_measure(
    fractions: Sequence[float],
    grammar: WeightedGrammar,
    config: ParseConfig | None = None,
    clusters: Sequence = (),
) -> ParseTree:
    """Globally minimum-cost parse of one measure's onset fractions.

    Memoized on (symbol, interval, cluster index range). Raises
    :class:`UnparseableMeasureError` when no derivation covers the input,
    naming the tightest interval whose clusters no rule could absorb.
    """
    config = config or ParseConfig()
    scaled = _Scaled(fractions, grammar, config)
    memo: dict = {}
    dead_ends: list[tuple[int, int, int, int]] = []

    def solve(symbol: int, start: int, duration: int, lo: int, hi: int, depth: int):
        key = (symbol, start, duration, lo, hi)
        found = memo.get(key, False)
        if found is not False:
            return found
        best: _Candidate | None = None
        for rule in grammar.rules_for(symbol):
            if rule.body.kind == DIVISION:
                arity = rule.body.arity
                step = duration // arity
                parts = []
                for j, (child_symbol, child_span) in enumerate(
                    zip(rule.body.children, scaled.spans(start, duration, arity, lo, hi))
                ):
                    sub = solve(child_symbol, start + j * step, step, *child_span, depth + 1)
                    if sub is None:
                        parts = None
                        break
                    parts.append(sub)
                if parts is None:
                    continue
                candidate = _Candidate(
                    cost=scaled.weights[rule.index] + sum(p.cost for p in parts),
                    nodes=1 + sum(p.nodes for p in parts),
                    rules=(rule.index,) + tuple(r for p in parts for r in p.rules),
                    node=ParseNode(
                        symbol,
                        scaled.interval(start, duration, depth),
                        rule,
                        tuple(p.node for p in parts),
                    ),
                )
            else:
                cost = scaled.leaf_cost(rule, start, lo, hi)
                if cost is None:
                    continue
                candidate = _Candidate(
                    cost=cost,
                    nodes=1,
                    rules=(rule.index,),
                    node=ParseNode(
                        symbol,
                        scaled.interval(start, duration, depth),
                        rule,
                        (),
                        tuple(range(lo, hi)),
                    ),
                )
            if best is None or candidate.key < best.key:
                best = candidate
        if best is None and hi > lo:
            dead_ends.append((start, duration, lo, hi))
        memo[key] = best
        return best

    best = solve(*scaled.root_state, 0)
    if best is None:
        raise _unparseable(scaled, dead_ends)
    return ParseTree(
        best.node, scaled.weight_of(best.cost), scaled.fractions, tuple(clusters)
    )


def _unparseable(scaled: _Scaled, dead_ends) -> UnparseableMeasureError:
    if dead_ends:
        start, duration, lo, hi = min(dead_ends, key=lambda d: (d[1], d[0]))
    else:
        start, duration = 0, scaled.position_scale
        lo, hi = 0, len(scaled.onsets)
    interval = scaled.interval(start, duration)
    onsets = list(scaled.fractions[lo:hi])
    return UnparseableMeasureError(
        f"no rule covers {hi - lo} clusters at fractions {onsets} within interval {interval}",
        interval=interval,
        onsets=onsets,
    )


def brute_force_parse(
    fractions: Sequence[float],
    grammar: WeightedGrammar,
    config: ParseConfig | None = None,
    clusters: Sequence = (),
) -> ParseTree:
    """Reference solver: direct recursion over every rule choice.

    No memo table and no agenda; the minimum over all derivations (with
    the same structural tie-break) falls out of the recursion because a
    division's cost is the sum of independent child costs. Exponential in
    grammar depth, so meant for verification, not production parsing.
    """
    config = config or ParseConfig()
    scaled = _Scaled(fractions, grammar, config)

    def solve(symbol: int, start: int, duration: int, lo: int, hi: int):
        best = None  # (cost, nodes, rules)
        for rule in grammar.rules_for(symbol):
            if rule.body.kind == DIVISION:
                arity = rule.body.arity
                step = duration // arity
                cost = scaled.weights[rule.index]
                nodes = 1
                rules = (rule.index,)
                for j, (child_symbol, child_span) in enumerate(
                    zip(rule.body.children, scaled.spans(start, duration, arity, lo, hi))
                ):
                    sub = solve(child_symbol, start + j * step, step, *child_span)
                    if sub is None:
                        rules = None
                        break
                    cost += sub[0]
                    nodes += sub[1]
                    rules += sub[2]
                if rules is None:
                    continue
                candidate = (cost, nodes, rules)
            else:
                cost = scaled.leaf_cost(rule, start, lo, hi)
                if cost is None:
                    continue
                candidate = (cost, 1, (rule.index,))
            if best is None or candidate < best:
                best = candidate
        return best

    best = solve(*scaled.root_state)
    if best is None:
        raise UnparseableMeasureError(
            f"no derivation covers {len(scaled.onsets)} clusters at {list(scaled.fractions)}"
        )
    cost, _, rules = best
    root = _tree_from_rule_trace(rules, scaled)
    return ParseTree(root, scaled.weight_of(cost), scaled.fractions, tuple(clusters))


@dataclass
class ParseEnumeration:
    """Weight-sorted parses of one measure. ``truncated`` means enumeration
    stopped before exhausting the derivation space, so the list is only a
    sorted prefix (its minimum is still the global minimum)."""

    parses: list[ParseTree]
    truncated: bool = False

    def __iter__(self):
        return iter(self.parses)

    def __len__(self):
        return len(self.parses)

    @property
    def best(self) -> ParseTree:
        return self.parses[0]


def enumerate_parses(
    fractions: Sequence[float],
    grammar: WeightedGrammar,
    config: ParseConfig | None = None,
    clusters: Sequence = (),
    max_count: int = 1000,
) -> ParseEnumeration:
    """Exhaustively enumerate derivations in ascending weight order.

    Runs a best-first search over partial derivations (expanding the
    leftmost open interval; every cost increment is non-negative), so
    complete parses pop in non-decreasing weight order and the head of the
    list is exact even when the listing is cut at ``max_count``. Parses of
    equal weight are ordered by the structural tie-break. Practical for
    small instances; the derivation space grows combinatorially with
    cluster count and grammar depth.
    """
    config = config or ParseConfig()
    scaled = _Scaled(fractions, grammar, config)
    clusters = tuple(clusters)

    # Agenda items: (cost, serial, open states, pre-order rule-index trace).
    # Open states are (symbol, start, duration, lo, hi) on the scaled grid.
    serial = 0
    agenda: list = [(0, 0, (scaled.root_state,), ())]
    complete: list[tuple[int, tuple[int, ...]]] = []
    truncated = False
    while agenda:
        cost, _, stack, trace = heapq.heappop(agenda)
        if not stack:
            # A completed equal-weight group closes when a heavier parse pops.
            if len(complete) >= max_count and cost != complete[-1][0]:
                truncated = True
                break
            complete.append((cost, trace))
            continue
        symbol, start, duration, lo, hi = stack[0]
        rest = stack[1:]
        for rule in grammar.rules_for(symbol):
            if rule.body.kind == DIVISION:
                arity = rule.body.arity
                step = duration // arity
                children = tuple(
                    (child_symbol, start + j * step, step, *child_span)
                    for j, (child_symbol, child_span) in enumerate(
                        zip(rule.body.children, scaled.spans(start, duration, arity, lo, hi))
                    )
                )
                serial += 1
                heapq.heappush(
                    agenda,
                    (
                        cost + scaled.weights[rule.index],
                        serial,
                        children + rest,
                        trace + (rule.index,),
                    ),
                )
            else:
                leaf = scaled.leaf_cost(rule, start, lo, hi)
                if leaf is None:
                    continue
                serial += 1
                heapq.heappush(agenda, (cost + leaf, serial, rest, trace + (rule.index,)))

    parses = []
    for cost, trace in complete:
        root = _tree_from_rule_trace(trace, scaled)
        parses.append(ParseTree(root, scaled.weight_of(cost), scaled.fractions, clusters))
    parses.sort(key=lambda p: (p.weight, p.node_count, p.preorder_rule_indices()))
    if len(parses) > max_count:
        parses = parses[:max_count]
        truncated = True
    return ParseEnumeration(parses, truncated)


def _tree_from_rule_trace(trace: Sequence[int], scaled: _Scaled) -> ParseNode:
    """Rebuild the tree a pre-order rule-index trace describes."""
    grammar = scaled.grammar
    position = 0

    def build(symbol: int, start: int, duration: int, lo: int, hi: int, depth: int) -> ParseNode:
        nonlocal position
        rule = grammar.rules[trace[position]]
        position += 1
        interval = scaled.interval(start, duration, depth)
        if rule.body.kind != DIVISION:
            return ParseNode(symbol, interval, rule, (), tuple(range(lo, hi)))
        arity = rule.body.arity
        step = duration // arity
        children = tuple(
            build(child_symbol, start + j * step, step, *child_span, depth + 1)
            for j, (child_symbol, child_span) in enumerate(
                zip(rule.body.children, scaled.spans(start, duration, arity, lo, hi))
            )
        )
        return ParseNode(symbol, interval, rule, children)

    return build(*scaled.root_state, 0)


def recompute_weight(tree: ParseTree, config: ParseConfig | None = None) -> Fraction:
    """Re-sum rule weights plus alignment costs by walking the tree.

    Pure rational arithmetic, independent of the solvers' scaled
    bookkeeping; equals ``tree.weight`` exactly.
    """
    config = config or ParseConfig()
    alpha = Fraction(config.alpha)
    total = Fraction(0)
    for node in tree.root.walk():
        total += node.applied.weight
        if node.applied.body.kind == EVENT and node.cluster_indices:
            main = Fraction(tree.fractions[node.cluster_indices[-1]])
            total += alpha * abs(main - node.interval.start)
    return total


@dataclass
class TrackParseReport:
    """Per-measure outcome of :func:`parse_track`."""

    measure_count: int = 0
    failures: list[tuple[int, UnparseableMeasureError]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def describe(self) -> str:
        lines = [f"{len(self.failures)} of {self.measure_count} measures failed to parse"]
        lines.extend(f"  measure {index}: {error}" for index, error in self.failures)
        return "\n".join(lines)


def parse_track(
    track: Track,
    grammar: WeightedGrammar,
    config: ParseConfig | None = None,
    *,
    n_instruments: int | None = None,
    cluster_threshold: float = DEFAULT_CLUSTER_THRESHOLD,
) -> list[ParseTree]:
    """Parse every measure of a track, in order.

    The whole track is rejected (:class:`TrackParseError` carrying a
    per-measure report) if any measure fails.
    """
    if grammar.time_signature != track.grid.time_signature:
        raise TrackParseError(
            f"grammar is for {grammar.time_signature[0]}/{grammar.time_signature[1]} "
            f"but track is {track.grid.time_signature[0]}/{track.grid.time_signature[1]}"
        )
    measures = track_measures(track, cluster_threshold, n_instruments)
    return parse_measures(measures, grammar, config)


def parse_measures(
    measures: Sequence[MeasureClusters],
    grammar: WeightedGrammar,
    config: ParseConfig | None = None,
) -> list[ParseTree]:
    """Parse pre-segmented measures; aggregate failures into one error."""
    report = TrackParseReport(measure_count=len(measures))
    trees: list[ParseTree] = []
    for measure in measures:
        try:
            trees.append(
                best_parse_measure(measure.fractions, grammar, config, measure.clusters)
            )
        except UnparseableMeasureError as error:
            error.measure_index = measure.index
            report.failures.append((measure.index, error))
    if not report.ok:
        raise TrackParseError(report.describe(), report=report)
    return trees
