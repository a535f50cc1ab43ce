"""Core symbolic vocabulary.

Terms, atoms, rules, substitutions, skolemization, and the term-level
measures (depth, subterm cyclicity, birth facts, term skeletons) that the
rest of the package builds on.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

__all__ = [
    "STAR_NAME",
    "UC_PREFIX",
    "DB_PREFIX",
    "Term",
    "Constant",
    "Variable",
    "FunctionalTerm",
    "SkolemSymbol",
    "Atom",
    "Query",
    "HeadDisjunct",
    "Rule",
    "RuleSet",
    "SkolemizedRule",
    "ConstantMapping",
    "RuleError",
    "UnknownSymbolError",
    "constant",
    "variable",
    "functional",
    "skolem_symbol",
    "star",
    "uc_constant",
    "db_constant",
    "is_reserved_name",
    "apply_term",
    "apply_atom",
    "apply_atoms",
    "compose",
    "subterms",
    "skolemize",
    "term_depth",
    "is_cyclic",
    "is_k_cyclic",
    "is_rho_cyclic",
    "birth_facts",
    "skeleton",
]

# Reserved constant namespaces for the special constant, the fresh per-symbol
# constants of the unique-constants abstraction, and rule-database constants.
# The parser rejects identifiers starting with "_", so user input can never
# collide with these.
STAR_NAME = "__star"
UC_PREFIX = "__uc_"
DB_PREFIX = "__db_"


class RuleError(ValueError):
    """A rule violates a structural invariant."""


class UnknownSymbolError(KeyError):
    """A skolem symbol does not belong to the rule set at hand."""


# ---------------------------------------------------------------------------
# Terms

class Term:
    """Base class for constants, variables, and functional terms.

    Terms are interned: constructing the same term twice returns the same
    object, so equality usually reduces to a pointer check and hashes are
    computed once. ``_nest`` maps every skolem symbol occurring in the term
    to the maximal number of its occurrences on one root-to-leaf path, which
    makes the cyclicity predicates O(#symbols).
    """

    __slots__ = ("depth", "is_ground", "_nest", "_hash")

    depth: int
    is_ground: bool
    _nest: Mapping["SkolemSymbol", int]
    _hash: int

    def __hash__(self) -> int:
        return self._hash

    def function_symbols(self) -> frozenset["SkolemSymbol"]:
        """All skolem symbols occurring anywhere in the term."""
        return frozenset(self._nest)


class Constant(Term):
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name
        self.depth = 1
        self.is_ground = True
        self._nest = _EMPTY_NEST
        self._hash = hash(("c", name))

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        return isinstance(other, Constant) and other.name == self.name

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return self.name


class Variable(Term):
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name
        self.depth = 1
        self.is_ground = False
        self._nest = _EMPTY_NEST
        self._hash = hash(("v", name))

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        return isinstance(other, Variable) and other.name == self.name

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"?{self.name}"


class SkolemSymbol:
    """Function symbol unique for one (rule, disjunct, existential variable)."""

    __slots__ = ("rule_id", "disjunct", "var", "arity", "_hash")

    def __init__(self, rule_id: str, disjunct: int, var: str, arity: int):
        self.rule_id = rule_id
        self.disjunct = disjunct
        self.var = var
        self.arity = arity
        self._hash = hash((rule_id, disjunct, var, arity))

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        return (
            isinstance(other, SkolemSymbol)
            and other.rule_id == self.rule_id
            and other.disjunct == self.disjunct
            and other.var == self.var
            and other.arity == self.arity
        )

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"f[{self.rule_id}.{self.disjunct}.{self.var}]"


class FunctionalTerm(Term):
    __slots__ = ("symbol", "args")

    def __init__(self, symbol: SkolemSymbol, args: tuple[Term, ...]):
        if len(args) != symbol.arity or not args:
            raise RuleError(
                f"symbol {symbol!r} expects {symbol.arity} arguments, got {len(args)}"
            )
        self.symbol = symbol
        self.args = args
        self.depth = 1 + max(a.depth for a in args)
        self.is_ground = all(a.is_ground for a in args)
        nest: dict[SkolemSymbol, int] = {}
        for a in args:
            for sym, count in a._nest.items():
                if count > nest.get(sym, 0):
                    nest[sym] = count
        nest[symbol] = nest.get(symbol, 0) + 1
        self._nest = nest
        self._hash = hash((symbol, args))

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        return (
            isinstance(other, FunctionalTerm)
            and other._hash == self._hash
            and other.symbol == self.symbol
            and other.args == self.args
        )

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"{self.symbol!r}({', '.join(map(repr, self.args))})"


_EMPTY_NEST: Mapping[SkolemSymbol, int] = {}

# Intern tables. dict.setdefault is a single atomic operation in CPython, so
# concurrent insertion is safe without a lock.
_TERMS: dict[object, Term] = {}
_SYMBOLS: dict[tuple[str, int, str], SkolemSymbol] = {}


def constant(name: str) -> Constant:
    key = ("c", name)
    t = _TERMS.get(key)
    if t is None:
        t = _TERMS.setdefault(key, Constant(name))
    return t  # type: ignore[return-value]


def variable(name: str) -> Variable:
    key = ("v", name)
    t = _TERMS.get(key)
    if t is None:
        t = _TERMS.setdefault(key, Variable(name))
    return t  # type: ignore[return-value]


def skolem_symbol(rule_id: str, disjunct: int, var: str, arity: int) -> SkolemSymbol:
    # Arity is part of the identity: independent rule sets reuse rule ids and
    # variable names freely, and only coincide on a symbol when the frontier
    # size agrees too. Resolution back to a rule always goes through one
    # rule set's symbol index, never through the shared table.
    key = (rule_id, disjunct, var, arity)
    s = _SYMBOLS.get(key)
    if s is None:
        s = _SYMBOLS.setdefault(key, SkolemSymbol(rule_id, disjunct, var, arity))
    return s


def functional(symbol: SkolemSymbol, args: Sequence[Term]) -> FunctionalTerm:
    args = tuple(args)
    key = (symbol, args)
    t = _TERMS.get(key)
    if t is None:
        t = _TERMS.setdefault(key, FunctionalTerm(symbol, args))
    return t  # type: ignore[return-value]


def star() -> Constant:
    return constant(STAR_NAME)


def uc_constant(symbol: SkolemSymbol) -> Constant:
    """The fresh constant c_f, one per skolem symbol."""
    return constant(f"{UC_PREFIX}{symbol.rule_id}_{symbol.disjunct}_{symbol.var}")


def db_constant(var_name: str) -> Constant:
    """The fresh constant c_x of a rule database."""
    return constant(f"{DB_PREFIX}{var_name}")


def is_reserved_name(name: str) -> bool:
    return name.startswith("_")


def subterms(t: Term) -> Iterator[Term]:
    """Yield t and every subterm, depth first, without duplicates."""
    seen: set[Term] = set()
    stack = [t]
    while stack:
        cur = stack.pop()
        if cur in seen:
            continue
        seen.add(cur)
        yield cur
        if isinstance(cur, FunctionalTerm):
            stack.extend(cur.args)


# ---------------------------------------------------------------------------
# Atoms and substitutions

class Atom:
    """Predicate applied to terms; a fact is a variable-free atom."""

    __slots__ = ("predicate", "terms", "is_ground", "_hash")

    def __init__(self, predicate: str, terms: Sequence[Term]):
        self.predicate = predicate
        self.terms = tuple(terms)
        self.is_ground = all(t.is_ground for t in self.terms)
        self._hash = hash((predicate, self.terms))

    @property
    def arity(self) -> int:
        return len(self.terms)

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        return (
            isinstance(other, Atom)
            and other._hash == self._hash
            and other.predicate == self.predicate
            and other.terms == self.terms
        )

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"{self.predicate}({', '.join(map(repr, self.terms))})"


Substitution = Mapping[Variable, Term]


def apply_term(sigma: Substitution, t: Term) -> Term:
    if t.is_ground:
        return t
    if isinstance(t, Variable):
        return sigma.get(t, t)
    assert isinstance(t, FunctionalTerm)
    return functional(t.symbol, tuple(apply_term(sigma, a) for a in t.args))


def apply_atom(sigma: Substitution, atom: Atom) -> Atom:
    if atom.is_ground:
        return atom
    return Atom(atom.predicate, tuple(apply_term(sigma, t) for t in atom.terms))


def apply_atoms(sigma: Substitution, atoms: Iterable[Atom]) -> tuple[Atom, ...]:
    return tuple(apply_atom(sigma, a) for a in atoms)


def compose(g: "ConstantMapping", sigma: Substitution) -> dict[Variable, Term]:
    """g composed with sigma: apply sigma first, then g."""
    return {x: g.apply(t) for x, t in sigma.items()}


class ConstantMapping:
    """Partial map from constants to ground terms, applied syntactically.

    Application replaces every occurrence of every mapped constant, also
    inside functional terms.
    """

    __slots__ = ("mapping",)

    def __init__(self, mapping: Mapping[Constant, Term]):
        for c, t in mapping.items():
            if not isinstance(c, Constant):
                raise RuleError(f"constant mapping domain must be constants, got {c!r}")
            if not t.is_ground:
                raise RuleError(f"constant mapping range must be ground, got {t!r}")
        self.mapping = dict(mapping)

    def apply(self, t: Term) -> Term:
        if isinstance(t, Constant):
            return self.mapping.get(t, t)
        if isinstance(t, FunctionalTerm):
            return functional(t.symbol, tuple(self.apply(a) for a in t.args))
        return t

    def apply_atom(self, atom: Atom) -> Atom:
        return Atom(atom.predicate, tuple(self.apply(t) for t in atom.terms))

    def apply_power(self, t: Term, j: int) -> Term:
        for _ in range(j):
            t = self.apply(t)
        return t

    def items(self):
        return self.mapping.items()

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ConstantMapping) and other.mapping == self.mapping

    def __repr__(self) -> str:
        inner = ", ".join(f"{c!r} -> {t!r}" for c, t in sorted(
            self.mapping.items(), key=lambda kv: kv[0].name))
        return f"{{{inner}}}"


# ---------------------------------------------------------------------------
# Rules

@dataclass(frozen=True)
class HeadDisjunct:
    existential_vars: tuple[Variable, ...]
    atoms: tuple[Atom, ...]


@dataclass(frozen=True)
class Query:
    """Boolean conjunctive query; every variable is existential."""

    atoms: tuple[Atom, ...]


class Rule:
    """One disjunctive existential rule.

    Bodies and heads are constant- and function-free. The frontier lists the
    body variables shared with some head, ordered by first occurrence in the
    body; skolem terms take exactly this tuple as arguments.
    """

    __slots__ = (
        "id",
        "body",
        "heads",
        "body_vars",
        "frontier",
        "branching",
        "is_deterministic",
        "is_generating",
        "is_datalog",
        "sk_heads",
        "sk_symbols",
    )

    def __init__(self, rule_id: str, body: Sequence[Atom], heads: Sequence[HeadDisjunct]):
        body = tuple(body)
        heads = tuple(heads)
        if not body:
            raise RuleError(f"rule {rule_id}: empty body")
        if not heads or any(not h.atoms for h in heads):
            raise RuleError(f"rule {rule_id}: empty head")
        for atom in body + tuple(a for h in heads for a in h.atoms):
            for t in atom.terms:
                if not isinstance(t, Variable):
                    raise RuleError(
                        f"rule {rule_id}: rules are constant- and function-free, "
                        f"found {t!r} in {atom!r}"
                    )
        self.id = rule_id
        self.body = body
        self.heads = heads

        ordered: list[Variable] = []
        seen: set[Variable] = set()
        for atom in body:
            for t in atom.terms:
                if t not in seen:
                    seen.add(t)
                    ordered.append(t)  # type: ignore[arg-type]
        self.body_vars = tuple(ordered)

        used_existentials: set[Variable] = set()
        for i, h in enumerate(heads, start=1):
            evars = set(h.existential_vars)
            if evars & seen:
                raise RuleError(
                    f"rule {rule_id}: existential variables must not occur in the body"
                )
            if evars & used_existentials:
                raise RuleError(
                    f"rule {rule_id}: existential variable reused across disjuncts"
                )
            used_existentials |= evars
            for atom in h.atoms:
                for t in atom.terms:
                    if t not in seen and t not in evars:
                        raise RuleError(
                            f"rule {rule_id}: head variable {t!r} neither universal "
                            f"nor existential in disjunct {i}"
                        )

        head_vars = {t for h in heads for a in h.atoms for t in a.terms}
        self.frontier = tuple(v for v in self.body_vars if v in head_vars)

        self.branching = len(heads)
        self.is_deterministic = self.branching == 1
        self.is_generating = any(h.existential_vars for h in heads)
        self.is_datalog = self.is_deterministic and not self.is_generating
        if self.is_generating and not self.frontier:
            raise RuleError(
                f"rule {rule_id}: a generating rule needs a body variable that is "
                f"shared with the head (skolem symbols have arity >= 1)"
            )

        arity = len(self.frontier)
        frontier_terms: tuple[Term, ...] = self.frontier
        sk_heads: list[tuple[Atom, ...]] = []
        symbols: set[SkolemSymbol] = set()
        for i, h in enumerate(heads, start=1):
            sk_map: dict[Variable, Term] = {}
            for y in h.existential_vars:
                sym = skolem_symbol(rule_id, i, y.name, arity)
                symbols.add(sym)
                sk_map[y] = functional(sym, frontier_terms)
            sk_heads.append(apply_atoms(sk_map, h.atoms))
        self.sk_heads = tuple(sk_heads)
        self.sk_symbols = frozenset(symbols)

    def __repr__(self) -> str:
        return f"Rule({self.id})"


@dataclass(frozen=True)
class SkolemizedRule:
    rule: Rule
    heads: tuple[tuple[Atom, ...], ...]


def skolemize(rule: Rule) -> SkolemizedRule:
    """Replace each existential y of disjunct i by f[rule.i.y](frontier)."""
    return SkolemizedRule(rule, rule.sk_heads)


class RuleSet:
    """An ordered set of rules with derived indexes and per-term caches."""

    def __init__(self, rules: Sequence[Rule]):
        self.rules = tuple(rules)
        self.by_id: dict[str, Rule] = {}
        self.predicates: dict[str, int] = {}
        self.symbol_index: dict[SkolemSymbol, tuple[Rule, int]] = {}
        self.body_index: dict[str, list[tuple[Rule, int]]] = {}
        for rule in self.rules:
            if rule.id in self.by_id:
                raise RuleError(f"duplicate rule id {rule.id}")
            self.by_id[rule.id] = rule
            for atom in rule.body + tuple(a for h in rule.heads for a in h.atoms):
                known = self.predicates.setdefault(atom.predicate, atom.arity)
                if known != atom.arity:
                    raise RuleError(
                        f"predicate {atom.predicate} used with arities "
                        f"{known} and {atom.arity}"
                    )
            for sym in rule.sk_symbols:
                self.symbol_index[sym] = (rule, sym.disjunct)
            for idx, atom in enumerate(rule.body):
                self.body_index.setdefault(atom.predicate, []).append((rule, idx))
        self._birth_cache: dict[Term, frozenset[Atom]] = {}

    def __iter__(self) -> Iterator[Rule]:
        return iter(self.rules)

    def __len__(self) -> int:
        return len(self.rules)

    def check_fact(self, fact: Atom) -> None:
        if not fact.is_ground:
            raise RuleError(f"not a fact: {fact!r}")
        known = self.predicates.get(fact.predicate)
        if known is not None and known != fact.arity:
            raise RuleError(
                f"predicate {fact.predicate} used with arities {known} and {fact.arity}"
            )


# ---------------------------------------------------------------------------
# Term measures

def term_depth(t: Term) -> int:
    """1 for non-functional terms, else 1 + the maximal argument depth."""
    return t.depth


def is_cyclic(t: Term) -> bool:
    """True iff some subterm f(s) has f occurring again inside s."""
    return any(count >= 2 for count in t._nest.values())


def is_k_cyclic(t: Term, k: int) -> bool:
    """True iff one root-to-leaf path carries the same symbol k + 1 times."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return any(count >= k + 1 for count in t._nest.values())


def is_rho_cyclic(t: Term, rho: Rule) -> bool:
    """True iff t = f(s) with f from sk(rho) and an sk(rho) symbol inside s."""
    if not isinstance(t, FunctionalTerm):
        return False
    if t.symbol not in rho.sk_symbols:
        return False
    return any(
        sym in arg._nest for arg in t.args for sym in rho.sk_symbols
    )


def _trigger_parts(x: object) -> tuple[Rule, Substitution] | None:
    rule = getattr(x, "rule", None)
    sub = getattr(x, "substitution", None)
    if isinstance(rule, Rule) and isinstance(sub, Mapping):
        return rule, sub
    return None


def _birth_of_term(t: Term, rules: RuleSet) -> frozenset[Atom]:
    cached = rules._birth_cache.get(t)
    if cached is not None:
        return cached
    if not isinstance(t, FunctionalTerm):
        result: frozenset[Atom] = frozenset()
    else:
        entry = rules.symbol_index.get(t.symbol)
        if entry is None:
            raise UnknownSymbolError(f"symbol {t.symbol!r} is not from this rule set")
        rule, disjunct = entry
        sigma = dict(zip(rule.frontier, t.args))
        out = apply_atoms(sigma, rule.sk_heads[disjunct - 1])
        acc: set[Atom] = set(out)
        for arg in t.args:
            acc |= _birth_of_term(arg, rules)
        result = frozenset(acc)
    rules._birth_cache[t] = result
    return result


def birth_facts(x: object, rules: RuleSet) -> frozenset[Atom]:
    """Birth facts of a term, or of a trigger (union over frontier images)."""
    parts = _trigger_parts(x)
    if parts is not None:
        rule, sub = parts
        acc: set[Atom] = set()
        for v in rule.frontier:
            acc |= _birth_of_term(sub[v], rules)
        return frozenset(acc)
    if isinstance(x, Term):
        return _birth_of_term(x, rules)
    raise TypeError(f"expected a term or a trigger, got {x!r}")


def skeleton(trigger: object, rules: RuleSet) -> frozenset[Term]:
    """Term skeleton of a trigger, closed under subterms.

    Contains every term of the trigger's birth facts plus every constant a
    frontier variable maps to. Subterm closure is required so reversibility
    checks can run on skeletons directly.
    """
    parts = _trigger_parts(trigger)
    if parts is None:
        raise TypeError(f"expected a trigger, got {trigger!r}")
    rule, sub = parts
    base: set[Term] = set()
    for atom in birth_facts(trigger, rules):
        base.update(atom.terms)
    for v in rule.frontier:
        image = sub[v]
        if isinstance(image, Constant):
            base.add(image)
    closed: set[Term] = set()
    for t in base:
        closed.update(subterms(t))
    return frozenset(closed)
