import random
from fractions import Fraction
from itertools import product

import pytest

from rhythmlrt.errors import TrackParseError, UnparseableMeasureError
from rhythmlrt.grammar import DIVISION, parse_grammar_text, serialize_grammar
from rhythmlrt.parser import (
    Interval,
    ParseConfig,
    best_parse_measure,
    brute_force_parse,
    enumerate_parses,
    parse_track,
    partition_clusters,
    recompute_weight,
)

from conftest import make_event, make_track

UNIT = Interval(Fraction(0), Fraction(1))


def plain_enumeration(fractions, grammar, config=None):
    """Third, deliberately naive lister: all derivations by recursive
    cartesian products. Exponential; only for tiny instances."""
    config = config or ParseConfig()
    fracs = [Fraction(f) for f in fractions]
    alpha = Fraction(config.alpha)

    def derive(symbol, interval, lo, hi):
        out = []
        for rule in grammar.rules_for(symbol):
            if rule.body.kind == DIVISION:
                arity = rule.body.arity
                spans = partition_clusters(interval, arity, fracs, (lo, hi))
                child_lists = [
                    derive(child, interval.child(j, arity), *span)
                    for j, (child, span) in enumerate(zip(rule.body.children, spans))
                ]
                for combo in product(*child_lists):
                    cost = rule.weight + sum(c[0] for c in combo)
                    rules = (rule.index,) + tuple(r for c in combo for r in c[1])
                    out.append((cost, rules))
            elif rule.body.kind == "continuation":
                if hi == lo:
                    out.append((rule.weight, (rule.index,)))
            else:
                if hi - lo == rule.body.event_count:
                    cost = rule.weight + alpha * abs(fracs[hi - 1] - interval.start)
                    out.append((cost, (rule.index,)))
        return out

    return derive(grammar.start, UNIT, 0, len(fracs))


def random_fractions(rng, max_clusters=8):
    count = rng.randint(0, max_clusters)
    fracs = set()
    for _ in range(count):
        if rng.random() < 0.5:
            den = rng.choice([2, 3, 4, 6, 8, 12, 16, 32])
            fracs.add(rng.randrange(den) / den)
        else:
            fracs.add(rng.random())
    return sorted(fracs)


class TestPartition:
    def test_on_grid_split(self):
        assert partition_clusters(UNIT, 2, [0.0, 0.5]) == [(0, 1), (1, 2)]

    def test_containment_keeps_late_onsets_in_their_cell(self):
        assert partition_clusters(UNIT, 2, [0.49]) == [(0, 1), (1, 1)]

    def test_boundary_onset_belongs_to_the_later_child(self):
        assert partition_clusters(UNIT, 2, [0.5]) == [(0, 0), (0, 1)]

    def test_four_way_with_gap(self):
        spans = partition_clusters(UNIT, 4, [0.10, 0.26, 0.74])
        assert spans == [(0, 1), (1, 2), (2, 3), (3, 3)]

    def test_tail_stays_in_last_child(self):
        assert partition_clusters(UNIT, 2, [0.97]) == [(0, 0), (0, 1)]

    def test_dense_sixteenth_grid_splits_evenly(self):
        fracs = [k / 16 for k in range(16)]
        spans = partition_clusters(UNIT, 4, fracs)
        assert spans == [(0, 4), (4, 8), (8, 12), (12, 16)]

    def test_spans_tile_the_input(self):
        rng = random.Random(7)
        for _ in range(200):
            fracs = random_fractions(rng)
            arity = rng.choice([2, 3, 4])
            spans = partition_clusters(UNIT, arity, fracs)
            assert spans[0][0] == 0 and spans[-1][1] == len(fracs)
            for (_, a_end), (b_start, _) in zip(spans, spans[1:]):
                assert a_end == b_start

    def test_arity_below_two_rejected(self):
        with pytest.raises(ValueError):
            partition_clusters(UNIT, 1, [0.5])


class TestGoldenParses:
    def test_empty_measure_is_one_continuation(self, grammar):
        tree = best_parse_measure([], grammar)
        assert tree.total_weight == 1.0
        assert tree.node_count == 1
        assert tree.root.applied.body.kind == "continuation"

    def test_two_halves(self, grammar):
        tree = best_parse_measure([0.0, 0.5], grammar)
        assert tree.total_weight == 2.1
        assert tree.node_count == 3
        body = tree.root.applied.body
        assert body.kind == DIVISION and body.arity == 2

    def test_four_quarters(self, grammar):
        tree = best_parse_measure([0.0, 0.25, 0.5, 0.75], grammar)
        assert tree.total_weight == 4.3
        assert tree.node_count == 7
        assert [len(n.cluster_indices) for n in tree.leaves()] == [1, 1, 1, 1]

    def test_flam_uses_grace_leaf(self, grammar):
        tree = best_parse_measure([0.24, 0.25], grammar)
        reference = brute_force_parse([0.24, 0.25], grammar)
        assert tree.weight == reference.weight
        grace_leaves = [n for n in tree.leaves() if n.applied.body.event_count == 2]
        assert len(grace_leaves) == 1
        assert grace_leaves[0].cluster_indices == (0, 1)
        # Grace absorbed at the bar: rule weight plus the main note's
        # displacement; the earlier onset carries no cost of its own.
        assert tree.weight == Fraction("1.55") + 8 * Fraction(1, 4)

    def test_weights_are_exact_rationals(self, grammar):
        tree = best_parse_measure([0.0, 0.25, 0.5, 0.75], grammar)
        assert tree.weight == Fraction("4.3")


class TestOracleEquivalence:
    def test_brute_force_matches_dp_on_fuzz(self, grammar):
        rng = random.Random(99)
        for _ in range(200):
            fracs = random_fractions(rng)
            try:
                best = best_parse_measure(fracs, grammar)
            except UnparseableMeasureError:
                with pytest.raises(UnparseableMeasureError):
                    brute_force_parse(fracs, grammar)
                continue
            reference = brute_force_parse(fracs, grammar)
            assert best.weight == reference.weight
            assert best.preorder_rule_indices() == reference.preorder_rule_indices()

    def test_enumeration_minimum_matches_dp(self, grammar):
        rng = random.Random(5)
        for _ in range(40):
            fracs = random_fractions(rng, max_clusters=3)
            best = best_parse_measure(fracs, grammar)
            listing = enumerate_parses(fracs, grammar, max_count=1)
            assert listing.best.weight == best.weight
            assert listing.best.preorder_rule_indices() == best.preorder_rule_indices()

    def test_plain_products_match_enumeration(self):
        # Full derivation spaces only stay countable on a small grammar:
        # empty sub-intervals multiply the space combinatorially.
        g = parse_grammar_text(
            "0 -> C0 1\n0 -> E1 1\n0 -> E2 1.5\n0 -> U2(1, 1) 0.2\n"
            "1 -> C0 0.4\n1 -> E1 1\n1 -> E2 2\n1 -> T2(2, 2) 0.3\n"
            "2 -> C0 0.2\n2 -> E1 1"
        )
        for fracs in ([], [0.0], [0.0, 0.5], [0.1, 0.52], [0.05, 0.2, 0.55, 0.8]):
            listing = enumerate_parses(fracs, g, max_count=100_000)
            assert not listing.truncated
            naive = plain_enumeration(fracs, g)
            assert len(listing) == len(naive)
            assert min(c for c, _ in naive) == listing.best.weight
            listed = sorted((p.weight, p.preorder_rule_indices()) for p in listing)
            assert listed == sorted(naive)
            best = best_parse_measure(fracs, g)
            assert best.weight == listing.best.weight
            assert best.preorder_rule_indices() == listing.best.preorder_rule_indices()
        # Three onsets inside one quarter cell exceed what the tiny
        # grammar's leaves absorb; all three solvers agree there is no
        # derivation.
        assert plain_enumeration([0.26, 0.3, 0.32], g) == []
        assert len(enumerate_parses([0.26, 0.3, 0.32], g)) == 0
        with pytest.raises(UnparseableMeasureError):
            best_parse_measure([0.26, 0.3, 0.32], g)


class TestEnumeration:
    def test_empty_measure_head(self, grammar):
        listing = enumerate_parses([], grammar, max_count=4)
        assert listing.best.total_weight == 1.0
        assert listing.best.node_count == 1
        weights = [p.weight for p in listing]
        assert weights == sorted(weights)
        assert listing.truncated

    def test_exhaustive_when_space_is_small(self):
        g = parse_grammar_text("0 -> C0 1\n0 -> U2(1, 1) 0.2\n1 -> C0 0.3\n1 -> E1 1")
        listing = enumerate_parses([], g, max_count=100)
        assert not listing.truncated
        assert [p.total_weight for p in listing] == [0.8, 1.0]

    def test_equal_weights_sorted_by_tie_break(self):
        g = parse_grammar_text("0 -> U2(1, 1) 1\n0 -> T2(1, 1) 1\n1 -> C0 0\n1 -> E1 1")
        listing = enumerate_parses([], g, max_count=10)
        assert [p.weight for p in listing] == [Fraction(1), Fraction(1)]
        assert listing.parses[0].preorder_rule_indices() == (0, 2, 2)
        assert listing.parses[1].preorder_rule_indices() == (1, 2, 2)


class TestTieBreaks:
    def test_fewer_nodes_win(self):
        g = parse_grammar_text("0 -> U2(1, 1) 1\n0 -> U3(1, 1, 1) 1\n1 -> C0 0")
        tree = best_parse_measure([], g)
        assert tree.node_count == 3

    def test_rule_order_breaks_remaining_ties(self):
        g = parse_grammar_text("0 -> T2(1, 1) 1\n0 -> U2(1, 1) 1\n1 -> C0 0")
        tree = best_parse_measure([], g)
        assert tree.preorder_rule_indices() == (0, 2, 2)


class TestProperties:
    def test_weight_recomputation(self, grammar):
        rng = random.Random(31)
        for _ in range(60):
            fracs = random_fractions(rng)
            try:
                tree = best_parse_measure(fracs, grammar)
            except UnparseableMeasureError:
                continue
            assert recompute_weight(tree) == tree.weight
            assert abs(float(recompute_weight(tree)) - tree.total_weight) < 1e-9

    def test_leaf_tiling_is_exact(self, grammar):
        rng = random.Random(13)
        for _ in range(60):
            fracs = random_fractions(rng)
            try:
                tree = best_parse_measure(fracs, grammar)
            except UnparseableMeasureError:
                continue
            leaves = tree.leaves()
            assert sum(leaf.interval.duration for leaf in leaves) == 1
            cursor = Fraction(0)
            for leaf in leaves:
                assert leaf.interval.start == cursor
                cursor += leaf.interval.duration

    def test_cluster_conservation(self, grammar):
        rng = random.Random(41)
        for _ in range(60):
            fracs = random_fractions(rng)
            try:
                tree = best_parse_measure(fracs, grammar)
            except UnparseableMeasureError:
                continue
            seen = [i for leaf in tree.leaves() for i in leaf.cluster_indices]
            assert seen == list(range(len(fracs)))
            for leaf in tree.leaves():
                body = leaf.applied.body
                expected = body.event_count if body.kind == "event" else 0
                assert len(leaf.cluster_indices) == expected

    def test_monotonicity_in_rule_weights(self, grammar):
        rng = random.Random(77)
        inputs = [random_fractions(rng, max_clusters=5) for _ in range(12)]
        base_text = serialize_grammar(grammar)
        for rule_index in (3, 6, 14, 15):
            bumped_lines = []
            for line_index, line in enumerate(base_text.splitlines()):
                if line and "->" in line and grammar.rules[rule_index].format() == line:
                    lhs, rest = line.split("->")
                    body, weight = rest.rsplit(None, 1)
                    line = f"{lhs}-> {body.strip()} {float(weight) + 2.5}"
                bumped_lines.append(line)
            bumped = parse_grammar_text("\n".join(bumped_lines))
            for fracs in inputs:
                try:
                    before = best_parse_measure(fracs, grammar).weight
                except UnparseableMeasureError:
                    continue
                after = best_parse_measure(fracs, bumped).weight
                assert after >= before

    def test_zero_alignment_optima_survive_alpha_increases(self, grammar):
        # A parse whose alignment cost is zero has an alpha-independent
        # weight, while every competitor's weight is non-decreasing in
        # alpha. So once such a parse is optimal, it stays optimal for
        # every larger alpha.
        rng = random.Random(55)
        checked = 0
        for _ in range(70):
            count = rng.randint(0, 6)
            fracs = sorted({rng.randrange(16) / 16 for _ in range(count)})
            base = best_parse_measure(fracs, grammar, ParseConfig(alpha=8.0))
            if recompute_weight(base, ParseConfig(alpha=0)) != base.weight:
                continue  # optimum at alpha 8 pays alignment; no claim made
            checked += 1
            for alpha in (16.0, 64.0, 512.0):
                other = best_parse_measure(fracs, grammar, ParseConfig(alpha=alpha))
                assert other.preorder_rule_indices() == base.preorder_rule_indices()
                assert other.weight == base.weight
        assert checked >= 10


class TestErrors:
    def test_unparseable_names_interval_and_onsets(self, grammar):
        fracs = [0.001, 0.002, 0.003]  # three clusters inside one 32nd
        with pytest.raises(UnparseableMeasureError) as info:
            best_parse_measure(fracs, grammar)
        assert info.value.onsets == (0.001, 0.002, 0.003)
        assert info.value.interval is not None
        assert info.value.interval.duration <= Fraction(1, 32)

    def test_cluster_bound(self, grammar):
        config = ParseConfig(max_clusters_per_measure=4)
        with pytest.raises(UnparseableMeasureError, match="exceed"):
            best_parse_measure([0.1, 0.2, 0.3, 0.4, 0.5], grammar, config)

    def test_unsorted_fractions_rejected(self, grammar):
        with pytest.raises(ValueError, match="sorted"):
            best_parse_measure([0.5, 0.25], grammar)

    def test_out_of_range_fractions_rejected(self, grammar):
        with pytest.raises(ValueError, match="lie in"):
            best_parse_measure([1.0], grammar)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ParseConfig(alpha=-1)
        with pytest.raises(ValueError):
            ParseConfig(tie_break="mystery")


class TestParseTrack:
    def test_two_empty_measures(self, grammar):
        track = make_track([], bars=2)
        trees = parse_track(track, grammar)
        assert len(trees) == 2
        assert all(t.node_count == 1 for t in trees)

    def test_metronome_four_on_the_floor(self, grammar):
        events = [make_event(0.5 * k) for k in range(8)]  # 2 bars at 120 BPM
        track = make_track(events)
        trees = parse_track(track, grammar)
        assert len(trees) == 2
        for tree in trees:
            assert tree.weight == Fraction("4.3")
            assert tree.node_count == 7

    def test_failure_report_names_measure(self, grammar):
        # Three clusters jammed inside 1/216 of the bar (the finest grid
        # any division chain reaches) can never be separated, and no leaf
        # absorbs three. A tight merge threshold keeps them distinct.
        bad = [make_event(2.0 + 0.002 * k, instrument=k) for k in range(3)]
        track = make_track([make_event(0.0)] + bad)
        with pytest.raises(TrackParseError) as info:
            parse_track(track, grammar, cluster_threshold=0.001)
        assert "measure 1" in str(info.value)
        assert info.value.report.failures[0][0] == 1

    def test_time_signature_mismatch(self, grammar):
        text = serialize_grammar(grammar).replace("[timesig 4 4]", "[timesig 3 4]")
        with pytest.raises(TrackParseError, match="3/4"):
            parse_track(make_track([make_event(0.0)]), parse_grammar_text(text))

    def test_payload_velocities_flow_into_trees(self, grammar):
        track = make_track([make_event(0.0, instrument=2, velocity_raw=127)], bars=1)
        (tree,) = parse_track(track, grammar)
        (cluster,) = tree.clusters
        assert cluster.velocity_by_instrument[2] == 1.0
