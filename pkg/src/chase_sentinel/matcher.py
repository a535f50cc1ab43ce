"""Fact storage and conjunction matching.

Matching is a deterministic backtracking join: atoms are ordered most
selective first (fewest candidate facts under the bindings known at planning
time, ties broken by source order), and candidate facts are scanned in
insertion order, so identical inputs always enumerate substitutions in the
same order.
"""
from __future__ import annotations

from typing import Iterable, Iterator, Mapping, Sequence

from .model import (
    Atom,
    Rule,
    RuleError,
    RuleSet,
    Substitution,
    Term,
    Variable,
    apply_term,
)

__all__ = ["FactSet", "Trigger", "match_conjunction", "is_loaded", "is_obsolete", "satisfies"]


class FactSet:
    """Insertion-ordered set of facts, indexed by predicate and first argument."""

    __slots__ = ("_order", "_by_pred", "_by_pred_arg0")

    def __init__(self, facts: Iterable[Atom] = ()):
        self._order: dict[Atom, None] = {}
        self._by_pred: dict[str, list[Atom]] = {}
        self._by_pred_arg0: dict[tuple[str, Term], list[Atom]] = {}
        for f in facts:
            self.add(f)

    def add(self, fact: Atom) -> bool:
        """Insert one fact; returns True when it was not present before."""
        if not fact.is_ground:
            raise RuleError(f"not a fact: {fact!r}")
        if fact in self._order:
            return False
        self._order[fact] = None
        self._by_pred.setdefault(fact.predicate, []).append(fact)
        self._by_pred_arg0.setdefault((fact.predicate, fact.terms[0]), []).append(fact)
        return True

    def update(self, facts: Iterable[Atom]) -> list[Atom]:
        """Insert many facts; returns the ones that were new, in order."""
        return [f for f in facts if self.add(f)]

    def copy(self) -> "FactSet":
        dup = FactSet.__new__(FactSet)
        dup._order = dict(self._order)
        dup._by_pred = {k: list(v) for k, v in self._by_pred.items()}
        dup._by_pred_arg0 = {k: list(v) for k, v in self._by_pred_arg0.items()}
        return dup

    def candidates(self, predicate: str, first: Term | None = None) -> Sequence[Atom]:
        if first is not None:
            return self._by_pred_arg0.get((predicate, first), ())
        return self._by_pred.get(predicate, ())

    def count(self, predicate: str, first: Term | None = None) -> int:
        return len(self.candidates(predicate, first))

    def terms(self) -> list[Term]:
        """Distinct argument terms in first-seen order."""
        seen: dict[Term, None] = {}
        for fact in self._order:
            for t in fact.terms:
                if t not in seen:
                    seen[t] = None
        return list(seen)

    def __contains__(self, fact: Atom) -> bool:
        return fact in self._order

    def __iter__(self) -> Iterator[Atom]:
        return iter(self._order)

    def __len__(self) -> int:
        return len(self._order)

    def __le__(self, other: "FactSet") -> bool:
        return all(f in other for f in self)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FactSet):
            return NotImplemented
        return len(self) == len(other) and all(f in other for f in self)

    def __repr__(self) -> str:
        return f"FactSet({len(self)} facts)"


class Trigger:
    """A rule paired with a total substitution for its body variables."""

    __slots__ = ("rule", "substitution", "_key", "_hash")

    def __init__(self, rule: Rule, substitution: Substitution):
        sub = {v: substitution[v] for v in rule.body_vars}
        for v, t in sub.items():
            if not t.is_ground:
                raise RuleError(f"trigger substitution must be ground, {v!r} -> {t!r}")
        self.rule = rule
        self.substitution = sub
        self._key = (rule.id, tuple(sub[v] for v in rule.body_vars))
        self._hash = hash(self._key)

    def body_facts(self) -> tuple[Atom, ...]:
        sigma = self.substitution
        return tuple(
            Atom(a.predicate, tuple(sigma[t] for t in a.terms))  # type: ignore[index]
            for a in self.rule.body
        )

    def out(self, disjunct: int) -> tuple[Atom, ...]:
        """Skolemized output of one head disjunct (1-based)."""
        sigma = self.substitution
        return tuple(
            Atom(a.predicate, tuple(apply_term(sigma, t) for t in a.terms))
            for a in self.rule.sk_heads[disjunct - 1]
        )

    def outputs(self) -> tuple[tuple[Atom, ...], ...]:
        return tuple(self.out(i) for i in range(1, self.rule.branching + 1))

    def frontier_image(self) -> tuple[Term, ...]:
        return tuple(self.substitution[v] for v in self.rule.frontier)

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        return isinstance(other, Trigger) and other._key == self._key

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        inner = ", ".join(
            f"{v.name}/{self.substitution[v]!r}" for v in self.rule.body_vars)
        return f"<{self.rule.id}, [{inner}]>"


def _plan(pattern: Sequence[Atom], facts: FactSet) -> list[Atom]:
    """Order atoms most selective first, ties broken by source order."""
    def cost(entry: tuple[int, Atom]) -> tuple[int, int]:
        src, atom = entry
        first = atom.terms[0]
        if first.is_ground:
            return (facts.count(atom.predicate, first), src)
        return (facts.count(atom.predicate), src)

    return [atom for _, atom in sorted(enumerate(pattern), key=cost)]


def _unify_atom(atom: Atom, fact: Atom, binding: dict[Variable, Term]) -> dict[Variable, Term] | None:
    if atom.predicate != fact.predicate or atom.arity != fact.arity:
        return None
    out = binding
    fresh = False
    for pat, val in zip(atom.terms, fact.terms):
        if isinstance(pat, Variable):
            cur = out.get(pat)
            if cur is None:
                if not fresh:
                    out = dict(out)
                    fresh = True
                out[pat] = val
            elif cur != val:
                return None
        else:
            if apply_term(out, pat) != val:
                return None
    return out


def match_conjunction(
    pattern: Sequence[Atom],
    base: Substitution,
    facts: FactSet,
) -> Iterator[dict[Variable, Term]]:
    """Enumerate extensions of base mapping the pattern into the fact set.

    Yields dictionaries covering dom(base) plus every pattern variable. The
    enumeration order is deterministic for identical inputs.
    """
    binding: dict[Variable, Term] = dict(base)
    plan = _plan(pattern, facts)

    def walk(idx: int, binding: dict[Variable, Term]) -> Iterator[dict[Variable, Term]]:
        if idx == len(plan):
            yield dict(binding)
            return
        atom = Atom(plan[idx].predicate,
                    tuple(apply_term(binding, t) for t in plan[idx].terms))
        if atom.is_ground:
            if atom in facts:
                yield from walk(idx + 1, binding)
            return
        first = atom.terms[0]
        pool = facts.candidates(atom.predicate, first if first.is_ground else None)
        for fact in pool:
            nxt = _unify_atom(atom, fact, binding)
            if nxt is not None:
                yield from walk(idx + 1, nxt)

    return walk(0, binding)


def is_loaded(trigger: Trigger, facts: FactSet) -> bool:
    """True iff every instantiated body atom is present."""
    return all(f in facts for f in trigger.body_facts())


def is_obsolete(trigger: Trigger, facts: FactSet) -> bool:
    """True iff some original head disjunct matches into the facts.

    The match must extend the trigger substitution on the universally
    quantified head variables; existential witnesses may be any terms of the
    fact set.
    """
    sigma = trigger.substitution
    for disjunct in trigger.rule.heads:
        base = {
            v: sigma[v]
            for a in disjunct.atoms
            for v in a.terms
            if isinstance(v, Variable) and v in sigma
        }
        for _ in match_conjunction(disjunct.atoms, base, facts):
            return True
    return False


def satisfies(facts: FactSet, rule: Rule) -> bool:
    """True iff every loaded trigger of the rule is obsolete."""
    for sub in match_conjunction(rule.body, {}, facts):
        if not is_obsolete(Trigger(rule, sub), facts):
            return False
    return True
