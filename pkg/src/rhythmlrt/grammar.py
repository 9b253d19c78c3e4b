"""Weighted context-free rhythm grammars.

A grammar is a list of production rules over integer symbols. Each symbol
stands for a note-value level (0 = whole bar, 1 = half, 2 = quarter, ...),
and each rule either closes an interval with a leaf or divides it into k
equal parts. Rules carry penalty weights; the parser minimizes their sum.

The text format is line based::

    [penalty]
    [timesig 4 4]
    0 -> C0          1      // continuation (empty interval)
    0 -> E1          1      // single onset
    0 -> E2          1.55   // grace + onset
    0 -> U2(1, 1)    0.1    // divide into two halves

``C0`` closes an empty interval, ``E1`` a one-onset interval, ``E2`` a
two-onset interval (flam). ``U`` and ``T`` both introduce k-ary divisions;
the letter only matters for notation back-ends, so it is kept as metadata
and otherwise ignored.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources

from .errors import CyclicGrammarError, GrammarParseError

CONTINUATION = "continuation"
EVENT = "event"
DIVISION = "division"

_RULE_RE = re.compile(r"^(\d+)\s*->\s*([A-Z]\d+\s*(?:\(\s*[^)]*\s*\))?)\s*(.*)$")
_BODY_RE = re.compile(r"^([A-Z])(\d+)\s*(?:\(\s*([^)]*)\s*\))?$")


@dataclass(frozen=True)
class RuleBody:
    """Right-hand side of a production rule.

    ``kind`` is CONTINUATION, EVENT or DIVISION. EVENT bodies absorb
    ``event_count`` clusters in one leaf (1 = plain onset, 2 = grace + main).
    DIVISION bodies split the interval into ``len(children)`` equal parts,
    one child symbol per part. ``marker`` is the original letter from the
    grammar file, retained so serialization round-trips.
    """

    kind: str
    marker: str
    event_count: int = 0
    children: tuple[int, ...] = ()

    @property
    def arity(self) -> int:
        return len(self.children)

    @property
    def is_leaf(self) -> bool:
        return self.kind != DIVISION

    def format(self) -> str:
        if self.kind == DIVISION:
            inner = ", ".join(str(c) for c in self.children)
            return f"{self.marker}{self.arity}({inner})"
        if self.kind == EVENT:
            return f"{self.marker}{self.event_count}"
        return f"{self.marker}0"


@dataclass(frozen=True)
class ProductionRule:
    """One weighted production. ``index`` is the position in the rule list,
    used as the rule identifier in tie-breaking and tree labels."""

    lhs: int
    body: RuleBody
    weight: Fraction
    weight_text: str
    index: int

    def format(self) -> str:
        return f"{self.lhs} -> {self.body.format()} {self.weight_text}"


@dataclass(frozen=True)
class WeightedGrammar:
    """An ordered rule list with a start symbol and a time signature."""

    rules: tuple[ProductionRule, ...]
    start: int
    time_signature: tuple[int, int] = (4, 4)
    _by_lhs: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        by_lhs: dict[int, list[ProductionRule]] = {}
        for rule in self.rules:
            by_lhs.setdefault(rule.lhs, []).append(rule)
        object.__setattr__(self, "_by_lhs", by_lhs)

    @property
    def symbols(self) -> frozenset[int]:
        seen = {r.lhs for r in self.rules}
        for rule in self.rules:
            seen.update(rule.body.children)
        return frozenset(seen)

    def rules_for(self, symbol: int) -> tuple[ProductionRule, ...]:
        return tuple(self._by_lhs.get(symbol, ()))

    def division_edges(self) -> list[tuple[int, int]]:
        """Parent -> child symbol edges induced by division bodies."""
        edges = []
        for rule in self.rules:
            if rule.body.kind == DIVISION:
                for child in rule.body.children:
                    edges.append((rule.lhs, child))
        return edges


def _parse_body(text: str, line_no: int) -> RuleBody:
    match = _BODY_RE.match(text.strip())
    if not match:
        raise GrammarParseError(f"unrecognized rule body {text!r}", line_no)
    marker, number, args = match.group(1), int(match.group(2)), match.group(3)
    if marker == "C":
        if number != 0 or args is not None:
            raise GrammarParseError(f"continuation must be C0, got {text!r}", line_no)
        return RuleBody(kind=CONTINUATION, marker=marker)
    if marker == "E":
        if number < 1 or args is not None:
            raise GrammarParseError(f"event body must be E<k>, k >= 1, got {text!r}", line_no)
        return RuleBody(kind=EVENT, marker=marker, event_count=number)
    if marker in ("U", "T"):
        if args is None:
            raise GrammarParseError(f"division {text!r} is missing its child list", line_no)
        try:
            children = tuple(int(part.strip()) for part in args.split(",") if part.strip())
        except ValueError:
            raise GrammarParseError(f"non-integer child symbol in {text!r}", line_no) from None
        if number < 2:
            raise GrammarParseError(f"division arity must be >= 2, got {number}", line_no)
        if len(children) != number:
            raise GrammarParseError(
                f"division {marker}{number} lists {len(children)} children", line_no
            )
        return RuleBody(kind=DIVISION, marker=marker, children=children)
    raise GrammarParseError(f"unknown body marker {marker!r}", line_no)


def parse_grammar_text(text: str) -> WeightedGrammar:
    """Parse grammar text into a :class:`WeightedGrammar`.

    The start symbol is the left-hand side of the first rule. Raises
    :class:`GrammarParseError` with a line number on malformed input.
    """
    time_signature = (4, 4)
    rules: list[ProductionRule] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("//", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            header = line.strip("[]").split()
            if not header:
                raise GrammarParseError("empty header", line_no)
            if header[0] == "penalty":
                continue
            if header[0] == "timesig":
                if len(header) != 3:
                    raise GrammarParseError("timesig header needs two integers", line_no)
                try:
                    time_signature = (int(header[1]), int(header[2]))
                except ValueError:
                    raise GrammarParseError("timesig header needs two integers", line_no) from None
                continue
            raise GrammarParseError(f"unknown header {header[0]!r}", line_no)
        match = _RULE_RE.match(line)
        if not match:
            raise GrammarParseError(f"unrecognized rule line {line!r}", line_no)
        lhs = int(match.group(1))
        body = _parse_body(match.group(2), line_no)
        weight_text = match.group(3).strip()
        if not weight_text:
            raise GrammarParseError("missing weight", line_no)
        try:
            weight = Fraction(weight_text)
        except (ValueError, ZeroDivisionError):
            raise GrammarParseError(f"bad weight {weight_text!r}", line_no) from None
        if weight < 0:
            raise GrammarParseError(f"negative weight {weight_text!r}", line_no)
        rules.append(ProductionRule(lhs, body, weight, weight_text, index=len(rules)))
    if not rules:
        raise GrammarParseError("no rules")
    return WeightedGrammar(tuple(rules), start=rules[0].lhs, time_signature=time_signature)


def serialize_grammar(grammar: WeightedGrammar) -> str:
    """Render a grammar back to text. Weights keep their original spelling,
    so parse -> serialize -> parse yields an identical rule list."""
    num, den = grammar.time_signature
    lines = ["[penalty]", "", f"[timesig {num} {den}]", ""]
    lines.extend(rule.format() for rule in grammar.rules)
    return "\n".join(lines) + "\n"


def load_grammar_file(path) -> WeightedGrammar:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_grammar_text(handle.read())


def default_grammar() -> WeightedGrammar:
    """The 4/4 drum grammar shipped with the package."""
    text = resources.files("rhythmlrt.data").joinpath("drum_grammar_4_4.txt").read_text("utf-8")
    return parse_grammar_text(text)


@dataclass
class GrammarDiagnostics:
    """Result of :func:`validate_grammar`.

    ``errors`` must be empty for a grammar to be usable; ``warnings`` flag
    oddities (unreachable symbols) that cannot break parsing. ``reachable``
    and ``producible`` list, respectively, the symbols reachable from the
    start symbol and the symbols that can derive a finite leaf-only tree.
    """

    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    reachable: frozenset[int] = frozenset()
    producible: frozenset[int] = frozenset()

    @property
    def ok(self) -> bool:
        return not self.errors


def _find_cycle(grammar: WeightedGrammar) -> list[int] | None:
    """Return one cycle in the division graph as a symbol path, or None."""
    graph: dict[int, set[int]] = {}
    for parent, child in grammar.division_edges():
        graph.setdefault(parent, set()).add(child)
    WHITE, GREY, BLACK = 0, 1, 2
    color = {sym: WHITE for sym in grammar.symbols}
    stack: list[int] = []

    def visit(sym: int) -> list[int] | None:
        color[sym] = GREY
        stack.append(sym)
        for nxt in sorted(graph.get(sym, ())):
            if color.get(nxt, WHITE) == GREY:
                return stack[stack.index(nxt):] + [nxt]
            if color.get(nxt, WHITE) == WHITE:
                found = visit(nxt)
                if found:
                    return found
        stack.pop()
        color[sym] = BLACK
        return None

    for sym in sorted(color):
        if color[sym] == WHITE:
            found = visit(sym)
            if found:
                return found
    return None


def _producible_symbols(grammar: WeightedGrammar) -> frozenset[int]:
    """Symbols that can derive at least one finite tree (fixpoint)."""
    producible: set[int] = set()
    changed = True
    while changed:
        changed = False
        for rule in grammar.rules:
            if rule.lhs in producible:
                continue
            if rule.body.is_leaf or all(c in producible for c in rule.body.children):
                producible.add(rule.lhs)
                changed = True
    return frozenset(producible)


def _reachable_symbols(grammar: WeightedGrammar) -> frozenset[int]:
    reachable = {grammar.start}
    frontier = [grammar.start]
    while frontier:
        sym = frontier.pop()
        for rule in grammar.rules_for(sym):
            for child in rule.body.children:
                if child not in reachable:
                    reachable.add(child)
                    frontier.append(child)
    return frozenset(reachable)


def validate_grammar(grammar: WeightedGrammar) -> GrammarDiagnostics:
    """Check a grammar for cycles, dead-end symbols and unreachable symbols.

    A grammar with no errors gives every measure at least one finite parse
    attempt: continuations cover empty intervals and the event/division
    rules cover occupied ones wherever they are reachable.
    """
    diag = GrammarDiagnostics(
        reachable=_reachable_symbols(grammar),
        producible=_producible_symbols(grammar),
    )
    cycle = _find_cycle(grammar)
    if cycle:
        path = " -> ".join(str(s) for s in cycle)
        diag.errors.append(f"division cycle: {path}")
    for sym in sorted(diag.reachable):
        if not grammar.rules_for(sym):
            diag.errors.append(f"symbol {sym} has no rules")
        elif sym not in diag.producible:
            diag.errors.append(f"symbol {sym} cannot reach a terminal rule")
    for sym in sorted(grammar.symbols - diag.reachable):
        diag.warnings.append(f"symbol {sym} is unreachable from start symbol {grammar.start}")
    return diag


def max_derivation_depth(grammar: WeightedGrammar) -> int:
    """Longest chain from the start symbol down to a leaf, in edges.

    A leaf application counts as one edge, so a grammar whose start symbol
    only has ``E1`` is depth 1. Raises :class:`CyclicGrammarError` when the
    division graph has a cycle.
    """
    cycle = _find_cycle(grammar)
    if cycle:
        path = " -> ".join(str(s) for s in cycle)
        raise CyclicGrammarError(f"cannot compute depth of cyclic grammar: {path}")
    memo: dict[int, int] = {}

    def depth(sym: int) -> int:
        if sym in memo:
            return memo[sym]
        best = 0
        for rule in grammar.rules_for(sym):
            if rule.body.is_leaf:
                best = max(best, 1)
            else:
                child_depths = [depth(c) for c in rule.body.children]
                if all(d > 0 for d in child_depths):
                    best = max(best, 1 + max(child_depths))
        memo[sym] = best
        return best

    return depth(grammar.start)
