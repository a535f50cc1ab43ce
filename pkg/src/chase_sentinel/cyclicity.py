"""Static never-termination analysis.

Starting from a rule's own body turned into fresh constants, a saturation
collects chosen outputs of triggers that are loaded, carry no cyclic terms
in their substitution, are unblockable, and (for the pivot rule) are
injective. A term that nests the pivot rule's skolem symbols inside each
other certifies that the restricted chase admits no finite tree for the
rule set extended by that database, for any database that loads the pivot
rule. The provenance of the saturation is sliced backward into a replayable
trigger prefix whose constant mapping can be pumped forever.

Three notions are provided: the full search over all head choices, the
cheaper search over the uniform head choices hc_1..hc_b only, and the
deterministic-rules-only search with the coarser star abstraction.
"""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Mapping, Sequence

from .approx import (
    UnblockabilityCache,
    check_reversible,
    is_star_unblockable,
    is_uc_unblockable,
)
from .chase import HeadChoice
from .matcher import FactSet, Trigger, match_conjunction
from .model import (
    Atom,
    ConstantMapping,
    Constant,
    FunctionalTerm,
    Rule,
    RuleSet,
    Term,
    compose,
    db_constant,
    is_cyclic,
    is_rho_cyclic,
    skeleton,
)

__all__ = [
    "RuleDatabase",
    "SearchBudget",
    "AppliedTrigger",
    "SaturationRun",
    "CyclicityPrefix",
    "Verdict",
    "InternalInconsistencyError",
    "RPC",
    "RPC_S",
    "DRPC",
    "rule_database",
    "rpc_fact_set",
    "drpc_fact_set",
    "check",
    "extract_prefix",
    "unroll_prefix",
]

RPC = "RPC"
RPC_S = "RPC_s"
DRPC = "DRPC"

CYCLIC = "cyclic"
NOT_DETECTED = "not-detected"
RESOURCE_EXHAUSTED = "resource-exhausted"

_NOTION_ALIASES = {
    "rpc": RPC,
    "rpc_s": RPC_S,
    "rpcs": RPC_S,
    "drpc": DRPC,
}


class InternalInconsistencyError(RuntimeError):
    """A recorded provenance failed to replay; this indicates a bug."""


@dataclass(frozen=True)
class RuleDatabase:
    """The rule's body with every variable frozen to a fresh constant."""

    rule: Rule
    substitution: Mapping
    facts: tuple[Atom, ...]


def rule_database(rule: Rule) -> RuleDatabase:
    sigma = {v: db_constant(v.name) for v in rule.body_vars}
    facts = tuple(
        Atom(a.predicate, tuple(sigma[t] for t in a.terms)) for a in rule.body)
    return RuleDatabase(rule, sigma, facts)


@dataclass(frozen=True)
class SearchBudget:
    max_triggers: int | None = 1_000_000
    max_term_depth: int | None = 8
    timeout_seconds: float | None = None


@dataclass(frozen=True)
class AppliedTrigger:
    index: int
    trigger: Trigger
    out: tuple[Atom, ...]
    new: tuple[Atom, ...]


@dataclass
class SaturationRun:
    """Outcome of one pivot-rule saturation, with full provenance."""

    notion: str
    rules: RuleSet
    rho: Rule
    hc: HeadChoice | None
    facts: FactSet
    provenance: list[AppliedTrigger]
    derived_by: dict[Atom, int]
    cyclic_term: Term | None
    cyclic_index: int | None
    truncated: bool
    rounds: int


def _preorder(t: Term) -> Iterator[Term]:
    yield t
    if isinstance(t, FunctionalTerm):
        for arg in t.args:
            yield from _preorder(arg)


def _canon_key(trigger: Trigger) -> tuple:
    return tuple(repr(trigger.substitution[v]) for v in trigger.rule.body_vars)


def _saturate(
    rules: RuleSet,
    rho: Rule,
    hc: HeadChoice | None,
    budget: SearchBudget,
    notion: str,
    cache: UnblockabilityCache,
    injectivity_guard: bool = True,
) -> SaturationRun:
    """Shared saturation engine.

    With a head choice, triggers of every rule contribute their chosen
    output and must be unblockable under the unique-constants abstraction.
    Without one (the deterministic notion), only triggers of deterministic
    rules take part and the star abstraction is used.
    """
    deterministic_only = hc is None
    db = rule_database(rho)
    facts = FactSet(db.facts)
    run = SaturationRun(notion, rules, rho, hc, facts, [], {}, None, None, False, 0)
    deadline = None
    if budget.timeout_seconds is not None:
        deadline = time.monotonic() + budget.timeout_seconds

    known_terms: set[Term] = set(facts.terms())

    def out_of(trigger: Trigger) -> tuple[Atom, ...]:
        if hc is not None:
            return hc.out(trigger)
        return trigger.out(1)

    def record(trigger: Trigger) -> bool:
        """Apply one trigger; returns True when a cyclic term was found."""
        index = len(run.provenance)
        out = out_of(trigger)
        new = facts.update(out)
        run.provenance.append(AppliedTrigger(index, trigger, out, tuple(new)))
        for fact in new:
            run.derived_by[fact] = index
        for atom in out:
            for arg in atom.terms:
                for t in _preorder(arg):
                    if t in known_terms:
                        continue
                    known_terms.add(t)
                    if is_rho_cyclic(t, rho):
                        run.cyclic_term = t
                        run.cyclic_index = index
                        return True
        return False

    seed = Trigger(rho, db.substitution)
    processed: set[Trigger] = {seed}
    if record(seed):
        return run

    while True:
        if deadline is not None and time.monotonic() > deadline:
            run.truncated = True
            return run
        run.rounds += 1
        candidates: list[tuple[int, tuple, Trigger]] = []
        for rule_index, rule in enumerate(rules):
            if deterministic_only and not rule.is_deterministic:
                continue
            for sub in match_conjunction(rule.body, {}, facts):
                trigger = Trigger(rule, sub)
                if trigger in processed:
                    continue
                candidates.append((rule_index, _canon_key(trigger), trigger))
        if not candidates:
            return run
        candidates.sort(key=lambda c: (c[0], c[1]))
        progressed = False
        for _, _, trigger in candidates:
            if deadline is not None and time.monotonic() > deadline:
                run.truncated = True
                return run
            processed.add(trigger)
            image = list(trigger.substitution.values())
            if any(is_cyclic(t) for t in image):
                continue
            if budget.max_term_depth is not None and \
                    any(t.depth > budget.max_term_depth for t in image):
                run.truncated = True
                continue
            if injectivity_guard and trigger.rule.id == rho.id:
                if len(set(image)) != len(image):
                    continue
            if hc is not None:
                if not is_uc_unblockable(rules, hc, trigger, cache):
                    continue
            else:
                if not is_star_unblockable(rules, trigger, cache):
                    continue
            if budget.max_triggers is not None and \
                    len(run.provenance) >= budget.max_triggers:
                run.truncated = True
                return run
            progressed = True
            if record(trigger):
                return run
        if not progressed:
            return run


def rpc_fact_set(
    rules: RuleSet,
    hc: HeadChoice,
    rho: Rule,
    budget: SearchBudget | None = None,
    *,
    injectivity_guard: bool = True,
    cache: UnblockabilityCache | None = None,
) -> SaturationRun:
    """Saturation for one generating rule under one head choice.

    The injectivity guard on pivot-rule triggers is part of the definition;
    disabling it exists purely to demonstrate why it is needed.
    """
    if not rho.is_generating:
        raise ValueError(f"rule {rho.id} is not generating")
    return _saturate(rules, rho, hc, budget or SearchBudget(), RPC,
                     cache or UnblockabilityCache(), injectivity_guard)


def drpc_fact_set(
    rules: RuleSet,
    rho: Rule,
    budget: SearchBudget | None = None,
    *,
    cache: UnblockabilityCache | None = None,
) -> SaturationRun:
    """Saturation over deterministic rules only, star abstraction."""
    if not (rho.is_generating and rho.is_deterministic):
        raise ValueError(f"rule {rho.id} is not deterministic and generating")
    return _saturate(rules, rho, None, budget or SearchBudget(), DRPC,
                     cache or UnblockabilityCache())


# ---------------------------------------------------------------------------
# Prefix extraction

@dataclass(frozen=True)
class CyclicityPrefix:
    """Replayable evidence: a loaded trigger sequence from the rule database
    of rho, ending in a trigger of rho whose output carries a rho-cyclic
    term, together with the constant mapping that pumps it."""

    notion: str
    rho: Rule
    hc: HeadChoice | None
    triggers: tuple[Trigger, ...]
    g: ConstantMapping
    cyclic_term: Term
    validated: str


def extract_prefix(run: SaturationRun, *, validate: bool = True) -> CyclicityPrefix:
    """Slice the provenance backward from the cyclic trigger.

    The slice keeps exactly the triggers whose outputs feed, transitively,
    the body of the final trigger, and always starts at the seed trigger.
    Validation replays loadedness, rebuilds the constant mapping, and checks
    its reversibility on the skeleton of every non-seed trigger; a failure
    means the saturation recorded something unsound and is raised loudly.
    """
    if run.cyclic_term is None or run.cyclic_index is None:
        raise ValueError("saturation found no cyclic term")
    final = run.provenance[run.cyclic_index]
    if final.trigger.rule.id != run.rho.id:
        raise InternalInconsistencyError(
            f"cyclic output produced by {final.trigger.rule.id}, "
            f"expected {run.rho.id}")

    keep: set[int] = {0, final.index}
    frontier_facts = list(final.trigger.body_facts())
    while frontier_facts:
        fact = frontier_facts.pop()
        src = run.derived_by.get(fact)
        if src is None or src in keep:
            continue
        keep.add(src)
        frontier_facts.extend(run.provenance[src].trigger.body_facts())
    triggers = tuple(run.provenance[i].trigger for i in sorted(keep))

    seed = triggers[0]
    last = triggers[-1]
    mapping: dict[Constant, Term] = {}
    for v in run.rho.body_vars:
        c = seed.substitution[v]
        assert isinstance(c, Constant)
        target = last.substitution[v]
        if mapping.setdefault(c, target) != target:
            raise InternalInconsistencyError(
                f"constant mapping ill-defined at {c!r}")
    g = ConstantMapping(mapping)

    if validate:
        _validate_prefix(run, triggers, g)

    return CyclicityPrefix(run.notion, run.rho, run.hc, triggers, g,
                           run.cyclic_term, "j=0")


def _validate_prefix(run: SaturationRun, triggers: Sequence[Trigger],
                     g: ConstantMapping) -> None:
    facts = FactSet(rule_database(run.rho).facts)
    for pos, trigger in enumerate(triggers):
        for fact in trigger.body_facts():
            if fact not in facts:
                raise InternalInconsistencyError(
                    f"prefix trigger {pos} is not loaded during replay")
        if run.hc is not None:
            facts.update(run.hc.out(trigger))
        else:
            facts.update(trigger.out(1))
    if compose(g, triggers[0].substitution) != dict(triggers[-1].substitution):
        raise InternalInconsistencyError("constant mapping does not close the loop")
    if not any(
        is_rho_cyclic(t, run.rho)
        for atom in (triggers[-1].out(run.hc.choice(run.rho)) if run.hc is not None
                     else triggers[-1].out(1))
        for arg in atom.terms
        for t in _preorder(arg)
    ):
        raise InternalInconsistencyError("final output carries no cyclic term")
    for trigger in triggers[1:]:
        certificate = check_reversible(g, skeleton(trigger, run.rules))
        if not certificate.reversible:
            raise InternalInconsistencyError(
                f"constant mapping not reversible: {certificate.detail}")


def unroll_prefix(prefix: CyclicityPrefix, repetitions: int) -> list[Trigger]:
    """First repetitions blocks of the induced infinite sequence.

    Block j repeats the non-seed triggers with the constant mapping applied
    j-1 times, so the result has 1 + (len(prefix) - 1) * repetitions
    triggers and repetitions = 1 returns the prefix itself.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    out = [prefix.triggers[0]]
    for j in range(1, repetitions + 1):
        for trigger in prefix.triggers[1:]:
            sub = {
                v: prefix.g.apply_power(t, j - 1)
                for v, t in trigger.substitution.items()
            }
            out.append(Trigger(trigger.rule, sub))
    return out


# ---------------------------------------------------------------------------
# Verdicts

@dataclass
class Verdict:
    notion: str
    result: str
    witness: CyclicityPrefix | None
    stats: dict


class _RecordingHeadChoice(HeadChoice):
    """Head choice that remembers which rules were consulted."""

    __slots__ = ("consulted",)

    def __init__(self, rules: RuleSet, choices: Mapping[str, int]):
        super().__init__(rules, choices)
        self.consulted: set[str] = set()

    def choice(self, rule: Rule) -> int:
        self.consulted.add(rule.id)
        return self.choices[rule.id]


def _branching(rules: RuleSet) -> int:
    return max((r.branching for r in rules), default=1)


def check(
    rules: RuleSet,
    notion: str,
    budget: SearchBudget | None = None,
) -> Verdict:
    """Run one never-termination notion over every eligible pivot rule.

    Verdict "cyclic" always carries a validated witness prefix; the other
    results carry none. "resource-exhausted" is reported when a search was
    truncated before anything was found, never instead of "cyclic".
    """
    canonical = _NOTION_ALIASES.get(notion.lower())
    if canonical is None:
        raise ValueError(f"unknown notion {notion!r}")
    budget = budget or SearchBudget()
    start = time.monotonic()
    cache = UnblockabilityCache()
    truncated = False
    runs = 0

    def finish(result: str, witness: CyclicityPrefix | None) -> Verdict:
        if witness is not None and witness.notion != canonical:
            # The saturation itself only knows the uc/star machinery, not
            # which head-choice family the caller enumerated.
            witness = replace(witness, notion=canonical)
        stats = {
            "notion": canonical,
            "saturations": runs,
            "elapsed_ms": round((time.monotonic() - start) * 1000.0, 3),
        }
        return Verdict(canonical, result, witness, stats)

    if canonical == DRPC:
        for rho in rules:
            if not (rho.is_deterministic and rho.is_generating):
                continue
            runs += 1
            run = drpc_fact_set(rules, rho, budget, cache=cache)
            truncated = truncated or run.truncated
            if run.cyclic_term is not None:
                return finish(CYCLIC, extract_prefix(run))
        return finish(RESOURCE_EXHAUSTED if truncated else NOT_DETECTED, None)

    if canonical == RPC_S:
        for i in range(1, _branching(rules) + 1):
            hc = HeadChoice.uniform(rules, i)
            for rho in rules:
                if not rho.is_generating:
                    continue
                runs += 1
                run = rpc_fact_set(rules, hc, rho, budget, cache=cache)
                truncated = truncated or run.truncated
                if run.cyclic_term is not None:
                    return finish(CYCLIC, extract_prefix(run))
        return finish(RESOURCE_EXHAUSTED if truncated else NOT_DETECTED, None)

    # Full search over head choices, lexicographic in rule order. Completed
    # searches are remembered by the choices they actually consulted, so any
    # later head choice agreeing on that subset is skipped.
    memo: dict[str, list[tuple[dict[str, int], bool]]] = {}
    rule_ids = [r.id for r in rules]
    for combo in itertools.product(*(range(1, r.branching + 1) for r in rules)):
        assignment = dict(zip(rule_ids, combo))
        for rho in rules:
            if not rho.is_generating:
                continue
            skip = False
            for consulted, _ in memo.get(rho.id, ()):
                if all(assignment[rid] == choice for rid, choice in consulted.items()):
                    skip = True
                    break
            if skip:
                continue
            hc = _RecordingHeadChoice(rules, assignment)
            runs += 1
            run = rpc_fact_set(rules, hc, rho, budget, cache=cache)
            truncated = truncated or run.truncated
            if not run.truncated:
                # A truncated search is not remembered: an agreeing head
                # choice must get a fresh chance under a fresh clock.
                consulted = {rid: assignment[rid] for rid in hc.consulted}
                memo.setdefault(rho.id, []).append(
                    (consulted, run.cyclic_term is not None))
            if run.cyclic_term is not None:
                return finish(CYCLIC, extract_prefix(run))
    return finish(RESOURCE_EXHAUSTED if truncated else NOT_DETECTED, None)
