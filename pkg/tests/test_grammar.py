from fractions import Fraction

import pytest

from rhythmlrt.errors import CyclicGrammarError, GrammarParseError
from rhythmlrt.grammar import (
    DIVISION,
    EVENT,
    default_grammar,
    max_derivation_depth,
    parse_grammar_text,
    serialize_grammar,
    validate_grammar,
)

TINY = """
[penalty]
[timesig 4 4]
0 -> U2(1, 1) 0.5
1 -> E1 1
"""


def test_default_grammar_shape(grammar):
    assert len(grammar.rules) == 26
    assert grammar.start == 0
    assert grammar.time_signature == (4, 4)
    assert sorted(grammar.symbols) == [0, 1, 2, 3, 4, 6]


def test_division_rule_parsing(grammar):
    halves = [r for r in grammar.rules_for(0) if r.body.kind == DIVISION and r.body.arity == 2]
    assert len(halves) == 1
    assert halves[0].body.children == (1, 1)
    assert halves[0].weight == Fraction("0.1")
    sixteenths = [r for r in grammar.rules_for(2) if r.body.arity == 4]
    assert sixteenths[0].body.children == (4, 4, 4, 4)
    assert sixteenths[0].weight == Fraction("0.15")
    assert sixteenths[0].body.marker == "T"


def test_event_and_continuation_bodies(grammar):
    bar_rules = grammar.rules_for(0)
    kinds = [(r.body.kind, r.body.event_count) for r in bar_rules if r.body.is_leaf]
    assert ("event", 1) in kinds
    assert ("event", 2) in kinds
    assert any(r.body.kind == "continuation" for r in bar_rules)


def test_empty_text_is_an_error():
    with pytest.raises(GrammarParseError, match="no rules"):
        parse_grammar_text("")
    with pytest.raises(GrammarParseError, match="no rules"):
        parse_grammar_text("// only a comment\n\n[penalty]\n")


@pytest.mark.parametrize(
    "line,fragment",
    [
        ("0 -> X2(1, 1) 0.5", "unknown body marker"),
        ("0 -> U2(1) 0.5", "lists 1 children"),
        ("0 -> U2(1, 1)", "missing weight"),
        ("0 -> E1 -3", "negative weight"),
        ("0 -> E1 abc", "bad weight"),
        ("[timesig 4]", "timesig header"),
        ("[what 1 2]", "unknown header"),
        ("0 -> C1 2", "continuation must be C0"),
    ],
)
def test_parse_errors_carry_line_numbers(line, fragment):
    text = "// leading comment\n" + line + "\n"
    with pytest.raises(GrammarParseError, match=fragment) as info:
        parse_grammar_text(text)
    assert info.value.line == 2


def test_round_trip_preserves_rule_list(grammar):
    again = parse_grammar_text(serialize_grammar(grammar))
    assert again.rules == grammar.rules
    assert again.time_signature == grammar.time_signature
    assert [r.weight_text for r in again.rules] == [r.weight_text for r in grammar.rules]


def test_validate_shipped_grammar(grammar):
    diag = validate_grammar(grammar)
    assert diag.ok
    assert diag.errors == []
    assert diag.warnings == []
    assert 6 in diag.reachable
    assert 6 in diag.producible


def test_validate_dead_end():
    g = parse_grammar_text("0 -> U2(0, 0) 1")
    diag = validate_grammar(g)
    assert not diag.ok
    assert any("cannot reach a terminal" in message for message in diag.errors)


def test_validate_cycle(grammar):
    text = serialize_grammar(grammar) + "4 -> U2(2, 2) 1\n"
    diag = validate_grammar(parse_grammar_text(text))
    assert any("cycle" in message for message in diag.errors)


def test_validate_missing_rules():
    g = parse_grammar_text("0 -> U2(1, 7) 1\n1 -> E1 1")
    diag = validate_grammar(g)
    assert any("symbol 7 has no rules" in message for message in diag.errors)


def test_unreachable_symbol_is_a_warning():
    g = parse_grammar_text("0 -> E1 1\n5 -> E1 1")
    diag = validate_grammar(g)
    assert diag.ok
    assert any("unreachable" in message for message in diag.warnings)


def test_max_derivation_depth(grammar):
    assert max_derivation_depth(grammar) == 6
    assert max_derivation_depth(parse_grammar_text("0 -> E1 1")) == 1
    assert max_derivation_depth(parse_grammar_text(TINY)) == 2


def test_max_derivation_depth_rejects_cycles(grammar):
    cyclic = parse_grammar_text(serialize_grammar(grammar) + "4 -> U2(2, 2) 1\n")
    with pytest.raises(CyclicGrammarError):
        max_derivation_depth(cyclic)


def test_timesig_header_parsed():
    g = parse_grammar_text("[timesig 3 4]\n0 -> E1 1")
    assert g.time_signature == (3, 4)


def test_event_count_generalizes():
    g = parse_grammar_text("0 -> E3 2.5")
    (rule,) = g.rules
    assert rule.body.kind == EVENT
    assert rule.body.event_count == 3
