"""Restricted chase over disjunctive existential rules.

Chase trees follow the usual discipline: a vertex is expanded by a trigger
that is loaded and not obsolete for its label, a non-datalog trigger fires
only once every datalog rule is satisfied, expansion creates one child per
head disjunct, and triggers are consumed from FIFO queues so every loaded
trigger is eventually applied or found obsolete on every branch (fairness).
Obsolete triggers are re-checked at application time because labels grow
monotonically along a branch.
"""
from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

from .matcher import FactSet, Trigger, is_obsolete, match_conjunction
from .model import Atom, Query, Rule, RuleSet, Substitution

__all__ = [
    "HeadChoice",
    "ChaseBudget",
    "ChaseVertex",
    "ChaseTree",
    "IncompleteTreeError",
    "run_chase",
    "results",
    "entails",
    "hc_branch",
]

COMPLETE = "complete"
BUDGET_EXHAUSTED = "budget-exhausted"


class IncompleteTreeError(RuntimeError):
    """Raised when an operation needs a fully expanded chase tree."""


class HeadChoice:
    """Total map from rules to one of their head disjuncts (1-based)."""

    __slots__ = ("choices",)

    def __init__(self, rules: RuleSet, choices: Mapping[str, int]):
        self.choices: dict[str, int] = {}
        for rule in rules:
            i = choices.get(rule.id)
            if i is None:
                raise ValueError(f"head choice undefined for rule {rule.id}")
            if not 1 <= i <= rule.branching:
                raise ValueError(
                    f"head choice {i} out of range for rule {rule.id} "
                    f"(branching {rule.branching})")
            self.choices[rule.id] = i

    @classmethod
    def uniform(cls, rules: RuleSet, i: int) -> "HeadChoice":
        """hc_i: pick disjunct i where available, else the last one."""
        if i < 1:
            raise ValueError("head choice index must be >= 1")
        return cls(rules, {r.id: min(i, r.branching) for r in rules})

    def choice(self, rule: Rule) -> int:
        return self.choices[rule.id]

    def out(self, trigger: Trigger) -> tuple[Atom, ...]:
        return trigger.out(self.choice(trigger.rule))

    def signature(self) -> tuple[tuple[str, int], ...]:
        return tuple(sorted(self.choices.items()))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, HeadChoice) and other.choices == self.choices

    def __hash__(self) -> int:
        return hash(self.signature())

    def __repr__(self) -> str:
        inner = ", ".join(f"{rid}:{i}" for rid, i in sorted(self.choices.items()))
        return f"HeadChoice({inner})"


@dataclass(frozen=True)
class ChaseBudget:
    max_vertices: int | None = 100_000
    max_depth: int | None = None
    max_term_depth: int | None = 8
    timeout_seconds: float | None = None


@dataclass
class ChaseVertex:
    id: int
    parent: int | None
    depth: int
    # Trigger applied at the parent to create this vertex, with the disjunct
    # whose output was added; None at the root.
    trigger: Trigger | None
    disjunct: int | None
    new_facts: tuple[Atom, ...]
    children: list[int] = field(default_factory=list)

    @property
    def is_leaf(self) -> bool:
        return not self.children


class ChaseTree:
    def __init__(self, rules: RuleSet, database: tuple[Atom, ...]):
        self.rules = rules
        self.database = database
        self.vertices: list[ChaseVertex] = []
        self.status = COMPLETE

    @property
    def root(self) -> ChaseVertex:
        return self.vertices[0]

    def label(self, vertex_id: int) -> FactSet:
        """Phi(v): the database plus everything added on the path to v."""
        path: list[ChaseVertex] = []
        cur: int | None = vertex_id
        while cur is not None:
            v = self.vertices[cur]
            path.append(v)
            cur = v.parent
        facts = FactSet()
        for v in reversed(path):
            facts.update(v.new_facts)
        return facts

    def leaves(self) -> list[ChaseVertex]:
        return [v for v in self.vertices if v.is_leaf]

    def trace_lines(self) -> list[str]:
        from .ruleio import Namer

        namer = Namer(self.rules)
        lines = []
        for v in self.vertices:
            if v.trigger is None:
                origin = "database"
            else:
                origin = f"{namer.trigger(v.trigger)} disjunct {v.disjunct}"
            added = "; ".join(namer.atom(a) for a in v.new_facts) or "-"
            parent = "-" if v.parent is None else str(v.parent)
            lines.append(f"vertex {v.id} parent {parent} via {origin}: {added}")
        return lines

    def to_dot(self) -> str:
        from .ruleio import Namer

        namer = Namer(self.rules)
        out = ["digraph chase {", '  node [shape=box, fontname="monospace"];']
        for v in self.vertices:
            added = "\\n".join(namer.atom(a) for a in v.new_facts) or "(nothing new)"
            out.append(f'  v{v.id} [label="{added}"];')
            if v.parent is not None:
                assert v.trigger is not None
                label = f"{namer.trigger(v.trigger)} #{v.disjunct}"
                out.append(f'  v{v.parent} -> v{v.id} [label="{label}"];')
        out.append("}")
        return "\n".join(out)


@dataclass
class _Branch:
    vertex: int
    facts: FactSet
    datalog: deque[Trigger]
    general: deque[Trigger]
    seen: set[Trigger]

    def fork(self) -> "_Branch":
        return _Branch(self.vertex, self.facts.copy(), deque(self.datalog),
                       deque(self.general), set(self.seen))


def _discover_initial(rules: RuleSet, facts: FactSet, branch: _Branch) -> None:
    for rule in rules:
        for sub in match_conjunction(rule.body, {}, facts):
            _enqueue(branch, Trigger(rule, sub))


def _discover_new(rules: RuleSet, facts: FactSet, branch: _Branch,
                  new_facts: Sequence[Atom]) -> None:
    # Semi-naive: every newly loaded trigger uses at least one new fact, so
    # pin each new fact to each body atom with a matching predicate.
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
                _enqueue(branch, Trigger(rule, sub))


def _enqueue(branch: _Branch, trigger: Trigger) -> None:
    if trigger in branch.seen:
        return
    branch.seen.add(trigger)
    if trigger.rule.is_datalog:
        branch.datalog.append(trigger)
    else:
        branch.general.append(trigger)


def _next_trigger(branch: _Branch) -> Trigger | None:
    # Datalog triggers are drained first, which keeps labels datalog-closed
    # before any non-datalog rule fires. Obsolete entries are dropped for
    # good: labels only grow, so obsoleteness is permanent.
    for queue in (branch.datalog, branch.general):
        while queue:
            trigger = queue.popleft()
            if is_obsolete(trigger, branch.facts):
                continue
            return trigger
    return None


def run_chase(
    rules: RuleSet,
    database: Iterable[Atom],
    budget: ChaseBudget | None = None,
) -> ChaseTree:
    """Build one restricted chase tree; depth-first, first disjunct first.

    The returned tree carries status "complete" when every branch ended in a
    vertex satisfying all rules, or "budget-exhausted" when a vertex, depth,
    term depth, or time limit stopped the expansion.
    """
    budget = budget or ChaseBudget()
    db = FactSet()
    seed: list[Atom] = []
    for fact in database:
        rules.check_fact(fact)
        if db.add(fact):
            seed.append(fact)
    tree = ChaseTree(rules, tuple(seed))
    root = ChaseVertex(0, None, 0, None, None, tuple(seed))
    tree.vertices.append(root)

    deadline = None
    if budget.timeout_seconds is not None:
        deadline = time.monotonic() + budget.timeout_seconds

    start = _Branch(0, db, deque(), deque(), set())
    _discover_initial(rules, db, start)
    stack: list[_Branch] = [start]

    while stack:
        if deadline is not None and time.monotonic() > deadline:
            tree.status = BUDGET_EXHAUSTED
            return tree
        branch = stack.pop()
        trigger = _next_trigger(branch)
        if trigger is None:
            continue
        vertex = tree.vertices[branch.vertex]
        if budget.max_depth is not None and vertex.depth >= budget.max_depth:
            tree.status = BUDGET_EXHAUSTED
            return tree
        fanout = trigger.rule.branching
        if budget.max_vertices is not None and \
                len(tree.vertices) + fanout > budget.max_vertices:
            tree.status = BUDGET_EXHAUSTED
            return tree
        outputs = trigger.outputs()
        if budget.max_term_depth is not None:
            for out in outputs:
                for atom in out:
                    if any(t.depth > budget.max_term_depth for t in atom.terms):
                        tree.status = BUDGET_EXHAUSTED
                        return tree
        children: list[_Branch] = []
        for i in range(1, fanout + 1):
            child = branch if i == fanout else branch.fork()
            new = child.facts.update(outputs[i - 1])
            cv = ChaseVertex(len(tree.vertices), vertex.id, vertex.depth + 1,
                             trigger, i, tuple(new))
            tree.vertices.append(cv)
            vertex.children.append(cv.id)
            child.vertex = cv.id
            _discover_new(rules, child.facts, child, new)
            children.append(child)
        # First disjunct is explored first.
        stack.extend(reversed(children))
    return tree


def results(tree: ChaseTree) -> list[frozenset[Atom]]:
    """Result sets, one per branch, duplicates removed (order preserved)."""
    if tree.status != COMPLETE:
        raise IncompleteTreeError(
            "chase tree is not complete; results are undefined")
    out: list[frozenset[Atom]] = []
    seen: set[frozenset[Atom]] = set()
    for leaf in tree.leaves():
        acc: set[Atom] = set()
        cur: int | None = leaf.id
        while cur is not None:
            v = tree.vertices[cur]
            acc.update(v.new_facts)
            cur = v.parent
        frozen = frozenset(acc)
        if frozen not in seen:
            seen.add(frozen)
            out.append(frozen)
    return out


def entails(
    rules: RuleSet,
    database: Iterable[Atom],
    query: Query,
    budget: ChaseBudget | None = None,
) -> str:
    """Decide certain entailment of a boolean conjunctive query.

    Returns "yes" when every result set of the chase tree admits a match,
    "no" when at least one does not, and "unknown" when the tree could not
    be completed within the budget.
    """
    tree = run_chase(rules, database, budget)
    if tree.status != COMPLETE:
        return "unknown"
    for result in results(tree):
        facts = FactSet(result)
        matched = False
        for _ in match_conjunction(query.atoms, {}, facts):
            matched = True
            break
        if not matched:
            return "no"
    return "yes"


def hc_branch(tree: ChaseTree, hc: HeadChoice) -> list[ChaseVertex]:
    """The unique root-to-leaf path that always follows hc's disjunct."""
    path = [tree.root]
    while path[-1].children:
        vertex = path[-1]
        first_child = tree.vertices[vertex.children[0]]
        assert first_child.trigger is not None
        wanted = hc.choice(first_child.trigger.rule)
        step = None
        for cid in vertex.children:
            child = tree.vertices[cid]
            if child.disjunct == wanted:
                step = child
                break
        assert step is not None, "children must cover every disjunct"
        path.append(step)
    return path
