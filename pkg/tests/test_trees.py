from fractions import Fraction

import numpy as np
import pytest

from rhythmlrt.errors import SimplificationError
from rhythmlrt.grammar import parse_grammar_text
from rhythmlrt.parser import ParseConfig, best_parse_measure, parse_measures
from rhythmlrt.midi import MeasureClusters
from rhythmlrt.trees import (
    DIVISION_IDS,
    RhythmNode,
    RhythmTree,
    reroot_measures,
    rhythm_tree,
    simplify_rules,
    tree_stats,
)

from conftest import make_cluster

# One bar: a quarter hit, a sixteenth run filling the second quarter,
# then two more quarter hits in the second half.
FIGURE_BAR = [0.0, 0.25, 0.3125, 0.375, 0.4375, 0.5, 0.75]
ANNOTATED = 2  # the run's second sixteenth (0.3125)


def parse_bar(grammar, fractions, clusters=()):
    return best_parse_measure(fractions, grammar, ParseConfig(), clusters)


class TestReroot:
    def test_single_measure_depth_grows_by_one(self, grammar):
        tree = parse_bar(grammar, [0.0, 0.5])  # bar split into two halves
        parse = reroot_measures([tree])
        assert parse.root_child_count == 1
        assert parse.max_depth == 2

    def test_leaf_measures(self, grammar):
        trees = [parse_bar(grammar, []) for _ in range(4)]
        parse = reroot_measures(trees)
        assert parse.root_child_count == 4
        assert parse.max_depth == 1

    def test_depth_is_max_over_measures_plus_one(self, grammar):
        shallow = parse_bar(grammar, [])
        deep = parse_bar(grammar, [0.0, 0.25, 0.5, 0.75])
        assert reroot_measures([shallow, deep, shallow]).max_depth == 3

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            reroot_measures([])


class TestSimplify:
    def test_figure_bar_rule_ids(self, grammar):
        tree = parse_bar(grammar, FIGURE_BAR)
        simplified = rhythm_tree([tree], n_instruments=22)
        ids = [node.id for node in simplified.preorder()]
        assert ids == [1, 5, 7, 0, 11, 0, 0, 0, 0, 7, 0, 0]

    def test_leaf_velocities_from_clusters(self, grammar):
        clusters = [make_cluster(r, {2: 0.3, 10: 0.5} if i == ANNOTATED else {2: 0.8})
                    for i, r in enumerate(FIGURE_BAR)]
        tree = parse_bar(grammar, FIGURE_BAR, clusters)
        simplified = rhythm_tree([tree], n_instruments=22)
        leaves = [node for node in simplified.preorder() if node.is_leaf]
        annotated = leaves[2]  # second sixteenth of the divided quarter
        assert annotated.velocities[2] == 0.3
        assert annotated.velocities[10] == 0.5
        assert sum(1 for v in annotated.velocities if v) == 2

    def test_empty_measure_is_single_leaf(self, grammar):
        simplified = rhythm_tree([parse_bar(grammar, [])], n_instruments=4)
        assert [n.id for n in simplified.preorder()] == [1, 0]
        assert simplified.root.children[0].velocities == (0.0,) * 4

    def test_grace_leaf_keeps_per_instrument_max(self, grammar):
        clusters = [make_cluster(0.24, {3: 0.4, 5: 0.2}), make_cluster(0.25, {3: 0.9})]
        tree = parse_bar(grammar, [0.24, 0.25], clusters)
        simplified = rhythm_tree([tree], n_instruments=22)
        (leaf,) = [n for n in simplified.preorder() if n.is_leaf]
        assert leaf.velocities[3] == 0.9
        assert leaf.velocities[5] == 0.2

    def test_triplet_mappings(self, grammar):
        # Force triplet divisions with a huge alignment penalty.
        config = ParseConfig(alpha=512.0)
        tree = best_parse_measure([0.0, 1 / 12, 1 / 6], grammar, config)
        simplified = rhythm_tree([tree], n_instruments=1)
        ids = {node.id for node in simplified.preorder()}
        assert 10 in ids  # quarter into a triplet of eighths

    def test_division_table_is_total_for_the_shipped_grammar(self, grammar):
        # Every division body in the grammar lands in the mapping table.
        notated = {0: Fraction(1), 1: Fraction(1, 2), 2: Fraction(1, 4),
                   3: Fraction(1, 8), 4: Fraction(1, 16), 6: Fraction(1, 32)}
        for rule in grammar.rules:
            if rule.body.children:
                assert (notated[rule.lhs], rule.body.arity) in DIVISION_IDS

    def test_unmapped_division_raises(self):
        g = parse_grammar_text("0 -> U5(1, 1, 1, 1, 1) 0.1\n1 -> C0 1")
        tree = best_parse_measure([], g)
        with pytest.raises(SimplificationError, match="5-way"):
            simplify_rules(reroot_measures([tree]), n_instruments=1)

    def test_shape_preserved(self, grammar):
        tree = parse_bar(grammar, FIGURE_BAR)
        simplified = rhythm_tree([tree], n_instruments=22)

        def shape(node):
            return tuple(shape(child) for child in node.children)

        assert shape(simplified.root.children[0]) == shape(tree.root)

    def test_velocity_multiset_preserved(self, grammar):
        clusters = [make_cluster(r, {i % 5: 0.1 * (i + 1)}, n=5) for i, r in enumerate(FIGURE_BAR)]
        tree = parse_bar(grammar, FIGURE_BAR, clusters)
        simplified = rhythm_tree([tree], n_instruments=5)
        got = sorted(
            tuple(node.velocities) for node in simplified.preorder()
            if node.is_leaf and any(node.velocities)
        )
        expected = sorted(tuple(c.velocity_by_instrument.tolist()) for c in clusters)
        assert got == expected

    def test_depth_bounded_by_grammar_depth_plus_one(self, grammar):
        import random

        rng = random.Random(3)
        for _ in range(20):
            fracs = sorted({rng.randrange(32) / 32 for _ in range(rng.randint(0, 6))})
            measures = [
                MeasureClusters(0, (), tuple(fracs)),
                MeasureClusters(1, (), ()),
            ]
            trees = parse_measures(measures, grammar)
            simplified = rhythm_tree(trees, n_instruments=1)
            assert simplified.max_depth <= 6 + 1


class TestStats:
    def test_root_plus_leaf(self):
        tree = RhythmTree(RhythmNode(1, (RhythmNode(0, (), (0.0,)),)))
        stats = tree_stats(tree)
        assert (stats.node_count, stats.leaf_count, stats.max_depth) == (2, 1, 1)
        assert stats.id_histogram == {1: 1, 0: 1}

    def test_four_quarter_measures(self, grammar):
        trees = [parse_bar(grammar, [0.0, 0.25, 0.5, 0.75]) for _ in range(3)]
        stats = tree_stats(rhythm_tree(trees, n_instruments=1))
        assert stats.node_count == 1 + 3 * 7
        assert stats.leaf_count == 3 * 4
        assert stats.id_histogram[5] == 3  # bar-level halves
        assert stats.id_histogram[7] == 6  # half-level quarters

    def test_figure_bar_counts(self, grammar):
        simplified = rhythm_tree([parse_bar(grammar, FIGURE_BAR)], n_instruments=1)
        stats = tree_stats(simplified)
        assert stats.leaf_count == 7
        assert stats.max_depth == 4
        assert stats.id_histogram[11] == 1
        assert stats.id_histogram[7] == 2
