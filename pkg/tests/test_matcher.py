import random

from chase_sentinel.matcher import (
    FactSet,
    Trigger,
    is_loaded,
    is_obsolete,
    match_conjunction,
    satisfies,
)
from chase_sentinel.model import Atom, constant, functional, variable

from conftest import bike_subset, oracle_obsolete, random_rule_set, rules_from


def atom(pred, *names):
    return Atom(pred, tuple(constant(n) for n in names))


def test_fact_set_basics():
    facts = FactSet()
    assert facts.add(atom("A", "a"))
    assert not facts.add(atom("A", "a"))
    new = facts.update([atom("A", "a"), atom("B", "a", "b")])
    assert new == [atom("B", "a", "b")]
    assert atom("A", "a") in facts
    assert len(facts) == 2
    assert facts.copy() == facts
    assert FactSet([atom("A", "a")]) <= facts


def test_fact_set_candidates_partition_by_first_argument():
    facts = FactSet([atom("R", "a", "b"), atom("R", "a", "c"),
                     atom("R", "b", "a")])
    assert set(facts.candidates("R", constant("a"))) == {
        atom("R", "a", "b"), atom("R", "a", "c")}
    assert facts.count("R") == 3
    assert facts.count("R", constant("b")) == 1
    assert facts.candidates("S") == ()


def test_match_conjunction_joins_and_respects_base():
    rules = rules_from("R(X, Y), R(Y, Z) -> R(X, Z) .\n")
    rule = rules.rules[0]
    facts = FactSet([atom("R", "a", "b"), atom("R", "b", "c"),
                     atom("R", "b", "b")])
    subs = list(match_conjunction(rule.body, {}, facts))
    images = {tuple(s[v] for v in rule.body_vars) for s in subs}
    assert images == {
        (constant("a"), constant("b"), constant("c")),
        (constant("a"), constant("b"), constant("b")),
        (constant("b"), constant("b"), constant("c")),
        (constant("b"), constant("b"), constant("b")),
    }
    pinned = list(match_conjunction(
        rule.body, {variable("X"): constant("b")}, facts))
    assert all(s[variable("X")] == constant("b") for s in pinned)
    assert len(pinned) == 2


def test_match_conjunction_repeated_variables():
    rules = rules_from("R(X, X) -> S(X) .\n")
    facts = FactSet([atom("R", "a", "a"), atom("R", "a", "b")])
    subs = list(match_conjunction(rules.rules[0].body, {}, facts))
    assert [s[variable("X")] for s in subs] == [constant("a")]


def test_trigger_outputs_and_frontier_image():
    rules = bike_subset(2)
    r1 = rules.by_id["r1"]
    d = constant("d")
    lam = Trigger(r1, {variable("X"): d})
    f_v = next(iter(r1.sk_symbols))
    fvd = functional(f_v, (d,))
    assert lam.body_facts() == (atom("Engine", "d"),)
    assert lam.out(1) == (Atom("IsIn", (d, fvd)), Atom("Bike", (fvd,)))
    assert lam.out(2) == (atom("Spare", "d"),)
    assert lam.outputs() == (lam.out(1), lam.out(2))
    assert lam.frontier_image() == (d,)


def test_is_loaded():
    rules = bike_subset(2)
    lam = Trigger(rules.by_id["r1"], {variable("X"): constant("d")})
    assert not is_loaded(lam, FactSet())
    assert is_loaded(lam, FactSet([atom("Engine", "d")]))


def test_is_obsolete_matches_any_disjunct_with_any_witness():
    rules = bike_subset(2)
    d = constant("d")
    lam = Trigger(rules.by_id["r1"], {variable("X"): d})
    base = FactSet([atom("Engine", "d")])
    assert not is_obsolete(lam, base)

    spare = base.copy()
    spare.add(atom("Spare", "d"))
    assert is_obsolete(lam, spare)

    # The witness may be any term of the set, not only the skolem image.
    wit = base.copy()
    wit.update([Atom("IsIn", (d, constant("e"))), atom("Bike", "e")])
    assert is_obsolete(lam, wit)

    # Both head atoms must agree on the same witness.
    split = base.copy()
    split.update([Atom("IsIn", (d, constant("e"))), atom("Bike", "g")])
    assert not is_obsolete(lam, split)


def test_satisfies_means_every_loaded_trigger_obsolete():
    rules = rules_from("A(X) -> B(X) .\n")
    rule = rules.rules[0]
    assert satisfies(FactSet([atom("A", "a"), atom("B", "a")]), rule)
    assert not satisfies(FactSet([atom("A", "a")]), rule)
    assert satisfies(FactSet([atom("B", "a")]), rule)


def test_is_obsolete_agrees_with_brute_force_on_random_sets():
    rng = random.Random(11)
    consts = [constant(n) for n in ("a", "b", "c")]
    checked = 0
    for _ in range(60):
        rules = random_rule_set(rng)
        facts = FactSet()
        preds = sorted(rules.predicates.items())
        for _ in range(rng.randint(2, 8)):
            pred, arity = rng.choice(preds)
            facts.add(Atom(pred, tuple(
                rng.choice(consts) for _ in range(arity))))
        for rule in rules:
            for sub in match_conjunction(rule.body, {}, facts):
                lam = Trigger(rule, sub)
                assert is_obsolete(lam, facts) == oracle_obsolete(lam, facts)
                checked += 1
    assert checked >= 100
