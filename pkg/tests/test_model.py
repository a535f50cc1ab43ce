import pytest

from chase_sentinel.model import (
    Atom,
    ConstantMapping,
    Rule,
    RuleError,
    RuleSet,
    apply_atom,
    apply_term,
    birth_facts,
    compose,
    constant,
    db_constant,
    functional,
    is_cyclic,
    is_k_cyclic,
    is_rho_cyclic,
    skeleton,
    skolem_symbol,
    star,
    subterms,
    term_depth,
    uc_constant,
    variable,
)
from chase_sentinel.matcher import Trigger
from chase_sentinel.ruleio import ParseError

from conftest import bike_subset, rules_from


def test_terms_are_interned():
    assert constant("a") is constant("a")
    assert variable("X") is variable("X")
    f = skolem_symbol("r1", 1, "Y", 1)
    assert f is skolem_symbol("r1", 1, "Y", 1)
    assert functional(f, (constant("a"),)) is functional(f, (constant("a"),))


def test_symbol_identity_includes_arity():
    # Independent rule sets reuse ids and variable names freely; the same
    # textual symbol with a different argument count must stay distinct.
    one = skolem_symbol("r1", 1, "Y", 1)
    two = skolem_symbol("r1", 1, "Y", 2)
    assert one is not two
    assert one != two


def test_term_depth_counts_nestings():
    a = constant("a")
    f = skolem_symbol("r1", 1, "Y", 1)
    assert term_depth(a) == 1
    assert term_depth(functional(f, (a,))) == 2
    assert term_depth(functional(f, (functional(f, (a,)),))) == 3


def test_cyclicity_measures():
    a = constant("a")
    f = skolem_symbol("r1", 1, "Y", 1)
    g = skolem_symbol("r2", 1, "Z", 1)
    fa = functional(f, (a,))
    gfa = functional(g, (fa,))
    fgfa = functional(f, (gfa,))
    assert not is_cyclic(fa)
    assert not is_cyclic(gfa)
    assert is_cyclic(fgfa)
    assert is_k_cyclic(fgfa, 1)
    assert not is_k_cyclic(fgfa, 2)
    assert is_k_cyclic(functional(f, (fgfa,)), 2)
    with pytest.raises(ValueError):
        is_k_cyclic(fa, 0)


def test_rho_cyclic_requires_rule_symbol_at_root_and_below():
    rules = rules_from("A(X) -> R(X, Y), A(Y) .\nB(X) -> S(X, Z) .\n")
    r1, r2 = rules.rules
    f = next(iter(r1.sk_symbols))
    g = next(iter(r2.sk_symbols))
    a = constant("a")
    ffa = functional(f, (functional(f, (a,)),))
    gfa = functional(g, (functional(f, (a,)),))
    fga = functional(f, (functional(g, (a,)),))
    assert is_rho_cyclic(ffa, r1)
    assert not is_rho_cyclic(gfa, r1)
    assert not is_rho_cyclic(fga, r1)
    assert not is_rho_cyclic(a, r1)


def test_subterms_closure():
    a, b = constant("a"), constant("b")
    f = skolem_symbol("r1", 1, "U", 2)
    t = functional(f, (a, functional(f, (a, b))))
    assert set(subterms(t)) == {t, a, b, functional(f, (a, b))}


def test_frontier_in_body_occurrence_order():
    rules = rules_from("R(Y, X), S(X, Z) -> T(X, Y, U) .\n")
    rule = rules.rules[0]
    assert rule.body_vars == (variable("Y"), variable("X"), variable("Z"))
    assert rule.frontier == (variable("Y"), variable("X"))


def test_skolemized_heads_use_frontier_arguments():
    rules = bike_subset(2)
    r1 = rules.by_id["r1"]
    first, second = r1.sk_heads
    assert [a.predicate for a in first] == ["IsIn", "Bike"]
    v_term = first[0].terms[1]
    assert v_term.symbol.var == "V"
    assert v_term.args == (variable("X"),)
    assert second == (Atom("Spare", (variable("X"),)),)


def test_generating_rule_needs_frontier():
    with pytest.raises(ParseError):
        rules_from("A(X) -> B(U) .\n")


def test_rule_set_rejects_duplicate_ids_and_arity_clashes():
    # The parser catches both within one source; RuleSet guards rules
    # combined programmatically from separate programs.
    first = rules_from("A(X) -> B(X) .\n")
    second = rules_from("B(X) -> A(X) .\n")
    with pytest.raises(RuleError):
        RuleSet(list(first) + list(second))
    clash = rules_from("C(X, Y) -> C(Y, X) .\n")
    renamed = [Rule("r9", r.body, r.heads) for r in first]
    merged = RuleSet(list(clash) + renamed)
    assert set(merged.by_id) == {"r1", "r9"}
    bad = rules_from("B(X, Y) -> B(Y, X) .\n")
    with pytest.raises(RuleError):
        RuleSet(renamed + [Rule("r8", r.body, r.heads) for r in bad])


def test_substitution_application_and_compose():
    x, y = variable("X"), variable("Y")
    a = constant("a")
    f = skolem_symbol("r1", 1, "U", 1)
    sigma = {x: a, y: functional(f, (a,))}
    assert apply_term(sigma, x) == a
    assert apply_atom(sigma, Atom("R", (x, y))) == Atom(
        "R", (a, functional(f, (a,))))
    g = ConstantMapping({a: functional(f, (a,))})
    composed = compose(g, sigma)
    assert composed[x] == functional(f, (a,))
    assert composed[y] == functional(f, (functional(f, (a,)),))


def test_constant_mapping_rewrites_inside_functional_terms():
    a, b = constant("a"), constant("b")
    f = skolem_symbol("r1", 1, "U", 2)
    g = ConstantMapping({a: b})
    assert g.apply(functional(f, (a, b))) == functional(f, (b, b))
    assert g.apply(b) == b
    assert g.apply_power(a, 3) == b


def test_constant_mapping_power_grows_terms():
    a = constant("a")
    f = skolem_symbol("r1", 1, "U", 1)
    g = ConstantMapping({a: functional(f, (a,))})
    assert term_depth(g.apply_power(a, 4)) == 5


def test_constant_mapping_domain_checked():
    x = variable("X")
    with pytest.raises(RuleError):
        ConstantMapping({x: constant("a")})


def test_birth_facts_of_term_and_trigger():
    rules = bike_subset(2)
    d = constant("d")
    r1 = rules.by_id["r1"]
    r2 = rules.by_id["r2"]
    f_v = next(iter(r1.sk_symbols))
    fvd = functional(f_v, (d,))
    assert birth_facts(fvd, rules) == frozenset(
        {Atom("IsIn", (d, fvd)), Atom("Bike", (fvd,))})
    lam = Trigger(r2, {variable("X"): fvd})
    assert birth_facts(lam, rules) == birth_facts(fvd, rules)
    assert birth_facts(d, rules) == frozenset()


def test_skeleton_is_subterm_closed_and_keeps_frontier_constants():
    rules = bike_subset(2)
    d = constant("d")
    r1 = rules.by_id["r1"]
    r2 = rules.by_id["r2"]
    f_v = next(iter(r1.sk_symbols))
    fvd = functional(f_v, (d,))
    lam = Trigger(r2, {variable("X"): fvd})
    assert skeleton(lam, rules) == frozenset({d, fvd})
    base = Trigger(r1, {variable("X"): d})
    assert skeleton(base, rules) == frozenset({d})


def test_reserved_constants_are_distinct():
    f = skolem_symbol("r1", 1, "V", 1)
    g = skolem_symbol("r1", 1, "W", 1)
    names = {star(), uc_constant(f), uc_constant(g), db_constant("X")}
    assert len(names) == 4
