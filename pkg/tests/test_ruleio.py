import pytest

from chase_sentinel.model import Atom, constant, functional, variable
from chase_sentinel.matcher import Trigger
from chase_sentinel.ruleio import Namer, ParseError, parse, render

from conftest import BIKE_RULES


FULL_PROGRAM = BIKE_RULES + "\nEngine(d) .\n? Spare(d) .\n"


def test_parse_splits_rules_facts_queries():
    prog = parse(FULL_PROGRAM)
    assert [r.id for r in prog.rules] == ["r1", "r2", "r3", "r4"]
    assert prog.facts == (Atom("Engine", (constant("d"),)),)
    assert len(prog.queries) == 1
    assert prog.queries[0].atoms == (Atom("Spare", (constant("d"),)),)


def test_comments_and_blank_lines_are_ignored():
    prog = parse("% intro\n\nA(X) -> B(X) .  % trailing\n% outro\nA(a) .\n")
    assert len(prog.rules) == 1
    assert prog.facts == (Atom("A", (constant("a"),)),)


def test_disjunction_and_conjunction_structure():
    prog = parse("A(X) -> B(X), C(X) | D(X) .\n")
    rule = prog.rules.rules[0]
    assert len(rule.heads) == 2
    assert [a.predicate for a in rule.heads[0].atoms] == ["B", "C"]
    assert [a.predicate for a in rule.heads[1].atoms] == ["D"]
    assert rule.is_deterministic is False
    assert rule.is_datalog is False


def test_datalog_flags():
    prog = parse("A(X) -> B(X) .\nA(X) -> C(X, U) .\nA(X) -> B(X) | C(X, U) .\n")
    flags = [(r.is_datalog, r.is_deterministic, r.is_generating)
             for r in prog.rules]
    assert flags == [(True, True, False), (False, True, True),
                     (False, False, True)]


def test_parse_errors_carry_position():
    cases = [
        ("A(a) -> B(a) .", "constant"),
        ("A(X) .", "variable"),
        ("A(X) -> B(X)", "expected '.'"),
        ("A(X) -> B(U) .", "shared with the head"),
        ("A(X) -> B(X) .\nA(X, Y) -> B(X) .", "arity"),
        ("A(X) @ B(X) .", "unexpected character"),
    ]
    for text, needle in cases:
        with pytest.raises(ParseError) as err:
            parse(text)
        assert needle in str(err.value)
        assert "line" in str(err.value) and "column" in str(err.value)


def test_query_variables_allowed():
    prog = parse("R(X, Y) -> R(Y, X) .\n? R(X, Y) .\n")
    q = prog.queries[0]
    assert q.atoms[0].terms == (variable("X"), variable("Y"))


def test_render_round_trip():
    prog = parse(FULL_PROGRAM)
    again = parse(render(prog.rules))
    assert [r.id for r in again.rules] == [r.id for r in prog.rules]
    for a, b in zip(again.rules, prog.rules):
        assert a.body == b.body
        assert a.heads == b.heads


def test_namer_pretty_prints_symbols_terms_triggers():
    prog = parse(BIKE_RULES)
    names = Namer(prog.rules)
    r1 = prog.rules.by_id["r1"]
    r2 = prog.rules.by_id["r2"]
    f_v = next(iter(r1.sk_symbols))
    t = functional(f_v, (constant("d"),))
    assert names.symbol(f_v) == "f_V"
    assert names.term(t) == "f_V(d)"
    lam = Trigger(r2, {variable("X"): t})
    assert names.trigger(lam) == "<r2, [X/f_V(d)]>"
    assert names.substitution(lam.substitution) == "[X/f_V(d)]"


def test_namer_disambiguates_same_variable_across_rules():
    prog = parse("A(X) -> B(X, U) .\nC(X) -> D(X, U) .\n")
    names = Namer(prog.rules)
    syms = sorted(
        (s for r in prog.rules for s in r.sk_symbols),
        key=lambda s: s.rule_id)
    rendered = {names.symbol(s) for s in syms}
    assert len(rendered) == 2
