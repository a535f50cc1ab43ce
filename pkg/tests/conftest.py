"""Shared rule sets, a seeded rule-set generator, and naive reference oracles.

The oracles re-implement the saturation definitions as direct enumerations
over the full substitution space. They are slow on purpose: the point is
that they share no indexing or delta logic with the engines under test.
"""

from __future__ import annotations

import itertools
import random

import pytest

from chase_sentinel.matcher import FactSet, Trigger
from chase_sentinel.model import (
    Atom,
    Constant,
    FunctionalTerm,
    RuleError,
    RuleSet,
    Term,
    apply_atom,
    birth_facts,
    is_cyclic,
    skeleton,
    star,
    subterms,
    uc_constant,
)
from chase_sentinel.ruleio import ParseError, parse

# ---------------------------------------------------------------------------
# Canonical rule sets

BIKE_RULES = """\
Engine(X) -> IsIn(X, V), Bike(V) | Spare(X) .
Bike(X) -> Has(X, W), Engine(W) .
IsIn(X, Y) -> Has(Y, X) .
Has(X, Y) -> IsIn(Y, X) .
"""

UC_STAR_RULES = """\
R(X, Y) -> R(Y, U) .
R(X, Y) -> S(Y, V) .
R(X, Y) -> T(Y, W) .
S(X, Y), T(X, Y) -> R(X, Y) .
"""

GUARD_RULES = """\
P(X, Y) -> R(X, U), S(Y, U) .
R(X, Y) -> T(Y, V) .
R(X, Y), S(X, Y) -> T(Y, X) .
T(X, Y) -> P(Y, Y) .
"""

COLOUR_RULES = """\
Cl1(X), Cl2(Y) -> Red(X, U), Red(Y, U) .
Cl1(X), Red(X, Z) -> Gr(X, V), Blu(Z, V) .
Red(Y, Z), Blu(Z, W), Gr(X, W) -> Gr(Y, Y) .
Red(Y, Z), Blu(Z, W), Gr(X, W) -> Blu(Z, Y) .
Red(Y, Z), Blu(Z, W), Gr(X, W) -> Cl1(Y) .
Cl2(Y), Gr(Y, W) -> Cl2(W) .
"""

COND3_RULES = """\
A(X) -> P(X, U) .
B(X) -> Q(X, V) .
C(X) -> S(X, W) .
Q(X, Y) -> T(X) .
P(X, Y) -> T(Y) | R(X, Y, Z) .
"""


def rules_from(text: str) -> RuleSet:
    return parse(text).rules


def bike_subset(n: int) -> RuleSet:
    """The first n bike rules, ids r1..rn."""
    lines = BIKE_RULES.splitlines()[:n]
    return rules_from("\n".join(lines) + "\n")


@pytest.fixture
def bike4() -> RuleSet:
    return bike_subset(4)


@pytest.fixture
def bike3() -> RuleSet:
    return bike_subset(3)


@pytest.fixture
def bike2() -> RuleSet:
    return bike_subset(2)


@pytest.fixture
def uc_star() -> RuleSet:
    return rules_from(UC_STAR_RULES)


@pytest.fixture
def guard_rules() -> RuleSet:
    return rules_from(GUARD_RULES)


@pytest.fixture
def colour() -> RuleSet:
    return rules_from(COLOUR_RULES)


@pytest.fixture
def cond3() -> RuleSet:
    return rules_from(COND3_RULES)


# ---------------------------------------------------------------------------
# Random rule sets

def random_rule_set(rng: random.Random, max_rules: int = 4) -> RuleSet:
    """A small random rule set: <= max_rules rules over <= 3-ary predicates,
    at most two disjuncts per head. Re-rolls drafts the parser rejects."""
    while True:
        n_preds = rng.randint(2, 4)
        arity = {f"P{i}": rng.randint(1, 3) for i in range(n_preds)}
        names = sorted(arity)
        lines = []
        for _ in range(rng.randint(1, max_rules)):
            body = []
            used: set[str] = set()
            for _ in range(rng.randint(1, 2)):
                p = rng.choice(names)
                args = [rng.choice(("X", "Y", "Z")) for _ in range(arity[p])]
                used.update(args)
                body.append(f"{p}({', '.join(args)})")
            pool = sorted(used) + ["U", "V"]
            heads = []
            for _ in range(rng.randint(1, 2)):
                atoms = []
                for _ in range(rng.randint(1, 2)):
                    p = rng.choice(names)
                    args = [rng.choice(pool) for _ in range(arity[p])]
                    atoms.append(f"{p}({', '.join(args)})")
                heads.append(", ".join(atoms))
            lines.append(f"{', '.join(body)} -> {' | '.join(heads)} .")
        try:
            return rules_from("\n".join(lines) + "\n")
        except (ParseError, RuleError):
            continue


# ---------------------------------------------------------------------------
# Naive oracles

def oracle_obsolete(trigger: Trigger, facts: FactSet) -> bool:
    """Obsoleteness by brute force: for each head disjunct, try every
    assignment of the existential variables to terms of the fact set."""
    pool = list(dict.fromkeys(t for a in facts for t in a.terms))
    for head in trigger.rule.heads:
        base = dict(trigger.substitution)
        exvars = [v for v in head.existential_vars]
        for combo in itertools.product(pool, repeat=len(exvars)):
            sigma = dict(base)
            sigma.update(zip(exvars, combo))
            if all(apply_atom(sigma, a) in facts for a in head.atoms):
                return True
    return False


def _oracle_abstract(kind: str, skel: frozenset[Term],
                     uc_names: set[Constant], t: Term) -> Term:
    if t in skel:
        return t
    if kind == "uc":
        if isinstance(t, FunctionalTerm):
            return uc_constant(t.symbol)
        if t in uc_names:
            return t
    return star()


def naive_over_approx(rules: RuleSet, pivot: Trigger, kind: str,
                      hc=None) -> set[Atom]:
    """Direct reading of the over-approximation closure, one item at a time.

    kind is "star" or "uc". With hc the exclusion compares the chosen
    output against the pivot's for triggers of any rule; without it the
    head is read conjunctively and only pivot-rule triggers whose outputs
    all coincide with the pivot's are excluded.
    """
    skel = skeleton(pivot, rules)
    uc_names = {uc_constant(s) for r in rules for s in r.sk_symbols}

    def habs(atom: Atom) -> Atom:
        return Atom(atom.predicate, tuple(
            _oracle_abstract(kind, skel, uc_names, t) for t in atom.terms))

    facts: set[Atom] = set()
    base = {t for t in skel if isinstance(t, Constant)} | {star()}
    for pred, n in rules.predicates.items():
        for combo in itertools.product(sorted(base, key=str), repeat=n):
            facts.add(Atom(pred, combo))
    facts.update(birth_facts(pivot, rules))

    if hc is not None:
        pivot_out = frozenset(hc.out(pivot))
    else:
        pivot_outs = tuple(frozenset(o) for o in pivot.outputs())

    changed = True
    while changed:
        changed = False
        pool = sorted({t for a in facts for t in a.terms}, key=str)
        for rule in rules:
            for combo in itertools.product(pool, repeat=len(rule.body_vars)):
                lam = Trigger(rule, dict(zip(rule.body_vars, combo)))
                if not all(f in facts for f in lam.body_facts()):
                    continue
                if hc is not None:
                    out = hc.out(lam)
                    if frozenset(out) == pivot_out:
                        continue
                    derived = [habs(a) for a in out]
                else:
                    outs = lam.outputs()
                    if rule.id == pivot.rule.id and tuple(
                            frozenset(o) for o in outs) == pivot_outs:
                        continue
                    derived = [habs(a) for o in outs for a in o]
                for a in derived:
                    if a not in facts:
                        facts.add(a)
                        changed = True
    return facts


def naive_saturation(rules: RuleSet, rho, hc=None,
                     depth_cap: int = 3) -> set[Atom]:
    """Fixpoint of chosen outputs over loaded triggers with cyclic-free,
    depth-capped substitution ranges. No unblockability, no injectivity,
    no early stop; the reference for the stubbed saturation engines."""
    from chase_sentinel.cyclicity import rule_database

    db = rule_database(rho)
    facts: set[Atom] = set(db.facts)
    seed = Trigger(rho, db.substitution)
    facts.update(hc.out(seed) if hc is not None else seed.out(1))

    deterministic_only = hc is None
    changed = True
    while changed:
        changed = False
        pool = sorted({t for a in facts for t in a.terms}, key=str)
        for rule in rules:
            if deterministic_only and not rule.is_deterministic:
                continue
            for combo in itertools.product(pool, repeat=len(rule.body_vars)):
                if any(is_cyclic(t) for t in combo):
                    continue
                if any(t.depth > depth_cap for t in combo):
                    continue
                lam = Trigger(rule, dict(zip(rule.body_vars, combo)))
                if not all(f in facts for f in lam.body_facts()):
                    continue
                out = hc.out(lam) if hc is not None else lam.out(1)
                for a in out:
                    if a not in facts:
                        facts.add(a)
                        changed = True
    return facts


def terms_of(facts) -> set[Term]:
    """Every subterm appearing in some fact of the collection."""
    acc: set[Term] = set()
    for a in facts:
        for t in a.terms:
            acc.update(subterms(t))
    return acc
