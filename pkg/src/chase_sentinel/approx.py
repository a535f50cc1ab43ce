"""Finite over-approximations of chase futures and trigger unblockability.

A trigger survives forever (is unblockable) when it stays non-obsolete for a
finite fact set that over-approximates everything later triggers could add.
The approximation abstracts foreign terms either to the special constant
(star) or to one fresh constant per skolem symbol (unique constants); the
latter is strictly sharper because distinct symbols stay distinct.

Reversible constant mappings transport unblockability between triggers of
the same rule, which is what lets a finite search certify infinitely many
trigger repetitions.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .chase import HeadChoice
from .matcher import FactSet, Trigger, is_obsolete, match_conjunction
from .model import (
    Atom,
    Constant,
    ConstantMapping,
    FunctionalTerm,
    RuleSet,
    Term,
    UC_PREFIX,
    birth_facts,
    skeleton,
    star,
    subterms,
    uc_constant,
)

__all__ = [
    "TermAbstraction",
    "OverApproximation",
    "ReversibilityCertificate",
    "NotReversibleError",
    "star_abstraction",
    "uc_abstraction",
    "abstract",
    "abstract_atom",
    "build_over_approx",
    "is_star_unblockable",
    "is_uc_unblockable",
    "check_reversible",
    "transport_trigger",
    "UnblockabilityCache",
]

STAR = "star"
UC = "uc"


@dataclass(frozen=True)
class TermAbstraction:
    """Maps whole terms into a finite universe around one trigger's skeleton."""

    kind: str
    skeleton: frozenset[Term]


def star_abstraction(rules: RuleSet, trigger: Trigger) -> TermAbstraction:
    return TermAbstraction(STAR, skeleton(trigger, rules))


def uc_abstraction(rules: RuleSet, trigger: Trigger) -> TermAbstraction:
    return TermAbstraction(UC, skeleton(trigger, rules))


def abstract(h: TermAbstraction, t: Term) -> Term:
    """Abstract one term. Skeleton terms survive unchanged.

    Under the unique-constants abstraction a foreign functional term becomes
    the fresh constant of its outermost symbol and those fresh constants map
    to themselves; everything else becomes the special constant.
    """
    if t in h.skeleton:
        return t
    if h.kind == UC:
        if isinstance(t, FunctionalTerm):
            return uc_constant(t.symbol)
        if isinstance(t, Constant) and t.name.startswith(UC_PREFIX):
            return t
    return star()


def abstract_atom(h: TermAbstraction, atom: Atom) -> Atom:
    return Atom(atom.predicate, tuple(abstract(h, t) for t in atom.terms))


@dataclass
class OverApproximation:
    facts: FactSet
    pivot: Trigger
    hc: HeadChoice | None
    abstraction: TermAbstraction


def _seed_facts(rules: RuleSet, h: TermAbstraction, pivot: Trigger) -> FactSet:
    facts = FactSet()
    consts = sorted(
        (t for t in h.skeleton if isinstance(t, Constant)),
        key=lambda c: c.name,
    )
    universe: list[Term] = list(consts) + [star()]
    for predicate, arity in rules.predicates.items():
        for combo in itertools.product(universe, repeat=arity):
            facts.add(Atom(predicate, combo))
    facts.update(sorted(birth_facts(pivot, rules), key=repr))
    return facts


def build_over_approx(
    rules: RuleSet,
    pivot: Trigger,
    h: TermAbstraction,
    hc: HeadChoice | None = None,
) -> OverApproximation:
    """Least fact set closed under abstracted outputs of loaded triggers.

    Seeded with every fact over the rule set's predicates and the skeleton's
    constants plus the special constant, together with the pivot's birth
    facts. With a head choice, each loaded trigger contributes its chosen
    output unless that output equals the pivot's; without one, disjunction is
    read conjunctively and each loaded trigger contributes all its outputs
    unless it shares the pivot's rule and all of its outputs.
    """
    facts = _seed_facts(rules, h, pivot)
    if hc is not None:
        pivot_out = frozenset(hc.out(pivot))
    else:
        pivot_outs = tuple(frozenset(o) for o in pivot.outputs())

    seen: set[Trigger] = set()
    queue: deque[Trigger] = deque()

    def enqueue_for(new_facts: Sequence[Atom] | None) -> None:
        if new_facts is None:
            for rule in rules:
                for sub in match_conjunction(rule.body, {}, facts):
                    trig = Trigger(rule, sub)
                    if trig not in seen:
                        seen.add(trig)
                        queue.append(trig)
            return
        for fact in new_facts:
            for rule, idx in rules.body_index.get(fact.predicate, ()):
                pinned = rule.body[idx]
                base: dict = {}
                ok = True
                for pat, val in zip(pinned.terms, fact.terms):
                    cur = base.get(pat)
                    if cur is None:
                        base[pat] = val
                    elif cur != val:
                        ok = False
                        break
                if not ok:
                    continue
                for sub in match_conjunction(rule.body, base, facts):
                    trig = Trigger(rule, sub)
                    if trig not in seen:
                        seen.add(trig)
                        queue.append(trig)

    enqueue_for(None)
    while queue:
        trig = queue.popleft()
        if hc is not None:
            if frozenset(hc.out(trig)) == pivot_out:
                continue
            contribution = hc.out(trig)
        else:
            if trig.rule.id == pivot.rule.id:
                outs = tuple(frozenset(o) for o in trig.outputs())
                if outs == pivot_outs:
                    continue
            contribution = tuple(
                atom for out in trig.outputs() for atom in out)
        new = facts.update(abstract_atom(h, a) for a in contribution)
        if new:
            enqueue_for(new)
    return OverApproximation(facts, pivot, hc, h)


# ---------------------------------------------------------------------------
# Unblockability

class UnblockabilityCache:
    """Memo for unblockability checks, scoped to one rule set.

    Triggers that differ only by a bijective renaming of constants have the
    same unblockability (the renaming is reversible in both directions), so
    entries are keyed by the trigger's constant-canonical shape.
    """

    def __init__(self) -> None:
        self.entries: dict[object, bool] = {}

    @staticmethod
    def _shape(t: Term, renaming: dict[Constant, int]) -> object:
        if isinstance(t, Constant):
            idx = renaming.get(t)
            if idx is None:
                idx = len(renaming)
                renaming[t] = idx
            return ("c", idx)
        assert isinstance(t, FunctionalTerm)
        return (t.symbol, tuple(
            UnblockabilityCache._shape(a, renaming) for a in t.args))

    def key(self, kind: str, hc: HeadChoice | None, trigger: Trigger) -> object:
        renaming: dict[Constant, int] = {}
        shape = tuple(
            self._shape(trigger.substitution[v], renaming)
            for v in trigger.rule.body_vars)
        sig = hc.signature() if hc is not None else None
        return (kind, sig, trigger.rule.id, shape)


def is_star_unblockable(
    rules: RuleSet,
    trigger: Trigger,
    cache: UnblockabilityCache | None = None,
) -> bool:
    """Datalog triggers always; others iff not obsolete for the star set."""
    if trigger.rule.is_datalog:
        return True
    key = cache.key(STAR, None, trigger) if cache is not None else None
    if cache is not None and key in cache.entries:
        return cache.entries[key]
    approx = build_over_approx(rules, trigger, star_abstraction(rules, trigger))
    answer = not is_obsolete(trigger, approx.facts)
    if cache is not None:
        cache.entries[key] = answer
    return answer


def is_uc_unblockable(
    rules: RuleSet,
    hc: HeadChoice,
    trigger: Trigger,
    cache: UnblockabilityCache | None = None,
) -> bool:
    """Datalog triggers always; others iff not obsolete for the uc set."""
    if trigger.rule.is_datalog:
        return True
    key = cache.key(UC, hc, trigger) if cache is not None else None
    if cache is not None and key in cache.entries:
        return cache.entries[key]
    approx = build_over_approx(rules, trigger, uc_abstraction(rules, trigger), hc)
    answer = not is_obsolete(trigger, approx.facts)
    if cache is not None:
        cache.entries[key] = answer
    return answer


# ---------------------------------------------------------------------------
# Reversibility

@dataclass(frozen=True)
class ReversibilityCertificate:
    reversible: bool
    violated: int | None
    detail: str


class NotReversibleError(ValueError):
    def __init__(self, certificate: ReversibilityCertificate):
        super().__init__(certificate.detail)
        self.certificate = certificate


def check_reversible(g: ConstantMapping, terms: Iterable[Term]) -> ReversibilityCertificate:
    """Check the three reversibility conditions over a subterm-closed set.

    Condition 1: g is defined on every constant of the set. Condition 2: g
    is injective on the set. Condition 3: no image of a functional member
    occurs as a subterm of the image of a constant. The first violated
    condition is reported.
    """
    domain = sorted(set(terms), key=repr)
    members = set(domain)
    for t in domain:
        for s in subterms(t):
            if s not in members:
                raise ValueError(
                    f"term set is not subterm-closed: {s!r} missing (from {t!r})")

    for t in domain:
        if isinstance(t, Constant) and t not in g.mapping:
            return ReversibilityCertificate(
                False, 1, f"condition 1: g is undefined on constant {t!r}")

    images: dict[Term, Term] = {}
    for t in domain:
        image = g.apply(t)
        for other, other_image in images.items():
            if other_image == image:
                return ReversibilityCertificate(
                    False, 2,
                    f"condition 2: g({other!r}) = g({t!r}) = {image!r}")
        images[t] = image

    constant_image_subterms: set[Term] = set()
    for t in domain:
        if isinstance(t, Constant):
            constant_image_subterms.update(subterms(images[t]))
    for t in domain:
        if isinstance(t, FunctionalTerm) and images[t] in constant_image_subterms:
            return ReversibilityCertificate(
                False, 3,
                f"condition 3: g({t!r}) = {images[t]!r} occurs inside the "
                f"image of a constant")

    return ReversibilityCertificate(True, None, "reversible")


def transport_trigger(rules: RuleSet, trigger: Trigger, g: ConstantMapping) -> Trigger:
    """Apply g to the trigger's substitution; g must be reversible for the
    trigger's skeleton."""
    certificate = check_reversible(g, skeleton(trigger, rules))
    if not certificate.reversible:
        raise NotReversibleError(certificate)
    moved = {v: g.apply(t) for v, t in trigger.substitution.items()}
    return Trigger(trigger.rule, moved)
