"""Core value types: terms, atoms, contexts, bridge rules, multi-context systems,
belief sets and integrity constraints.

Everything here is immutable; services build new values instead of mutating.
Context indices are 0-based positions in ``MultiContextSystem.contexts``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Callable, Dict, FrozenSet, Iterable, Iterator, Mapping, Optional, Tuple, Union

from app.errors import ActionError, ValidationError

if TYPE_CHECKING:
    from app.services.logics import ContextLogic


# -- terms and atoms ---------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Constant:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, slots=True)
class Variable:
    name: str

    def __str__(self) -> str:
        return self.name


Term = Union[Constant, Variable]


def is_variable_name(name: str) -> bool:
    """Variables start with an uppercase letter or an underscore."""
    return bool(name) and (name[0].isupper() or name[0] == "_")


def term(value: Union[str, int, Term]) -> Term:
    if isinstance(value, (Constant, Variable)):
        return value
    text = str(value)
    return Variable(text) if is_variable_name(text) else Constant(text)


@dataclass(frozen=True, slots=True)
class Atom:
    predicate: str
    args: Tuple[Term, ...] = ()

    @property
    def arity(self) -> int:
        return len(self.args)

    @property
    def signature(self) -> Tuple[str, int]:
        return (self.predicate, len(self.args))

    def is_ground(self) -> bool:
        return all(isinstance(a, Constant) for a in self.args)

    def variables(self) -> Tuple[str, ...]:
        seen: Dict[str, None] = {}
        for a in self.args:
            if isinstance(a, Variable):
                seen.setdefault(a.name)
        return tuple(seen)

    def constants(self) -> FrozenSet[str]:
        return frozenset(a.name for a in self.args if isinstance(a, Constant))

    def values(self) -> Tuple[str, ...]:
        return tuple(a.name for a in self.args)

    def substitute(self, theta: Mapping[str, str]) -> "Atom":
        if not theta:
            return self
        return Atom(
            self.predicate,
            tuple(
                Constant(theta[a.name]) if isinstance(a, Variable) and a.name in theta else a
                for a in self.args
            ),
        )

    def __str__(self) -> str:
        if not self.args:
            return self.predicate
        return f"{self.predicate}({','.join(str(a) for a in self.args)})"


def atom(predicate: str, *args: Union[str, int, Term]) -> Atom:
    """Build an atom; uppercase/underscore strings become variables."""
    return Atom(predicate, tuple(term(a) for a in args))


def ground_atom(predicate: str, *values: Union[str, int]) -> Atom:
    """Build a ground atom, treating every argument as a constant."""
    return Atom(predicate, tuple(Constant(str(v)) for v in values))


@dataclass(frozen=True, slots=True)
class Token:
    """Ordinary (non-relational) element, opaque to the engine."""

    name: str

    def __str__(self) -> str:
        return f"#{self.name}"


@dataclass(frozen=True, slots=True)
class Negated:
    """Explicit negative belief ``-p(t)``."""

    atom: Atom

    @property
    def signature(self) -> Tuple[str, int]:
        return self.atom.signature

    def is_ground(self) -> bool:
        return self.atom.is_ground()

    def variables(self) -> Tuple[str, ...]:
        return self.atom.variables()

    def substitute(self, theta: Mapping[str, str]) -> "Negated":
        return Negated(self.atom.substitute(theta))

    def __str__(self) -> str:
        return f"-{self.atom}"


KBElement = Union[Atom, Token]
Belief = Union[Atom, Token, Negated]


def element_variables(element: Belief) -> Tuple[str, ...]:
    if isinstance(element, Token):
        return ()
    return element.variables()


def element_constants(element: Belief) -> FrozenSet[str]:
    if isinstance(element, Atom):
        return element.constants()
    if isinstance(element, Negated):
        return element.atom.constants()
    return frozenset()


def substitute_element(element: Belief, theta: Mapping[str, str]) -> Belief:
    if isinstance(element, Token):
        return element
    return element.substitute(theta)


@dataclass(frozen=True)
class Signature:
    kb_predicates: FrozenSet[Tuple[str, int]] = frozenset()
    belief_predicates: FrozenSet[Tuple[str, int]] = frozenset()
    universe: FrozenSet[str] = frozenset()

    @property
    def predicates(self) -> FrozenSet[Tuple[str, int]]:
        return self.kb_predicates | self.belief_predicates

    def predicate_names(self) -> FrozenSet[str]:
        return frozenset(name for name, _ in self.predicates)

    def overlap(self) -> FrozenSet[str]:
        """Names used both as constants and as predicates."""
        return self.universe & self.predicate_names()


# -- rule bodies -------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class ContextLiteral:
    """``(c:p)`` or ``not (c:p)``: belief ``p`` queried in context ``c``."""

    context: int
    belief: Belief
    negated: bool = False

    def variables(self) -> Tuple[str, ...]:
        return element_variables(self.belief)

    def is_ground(self) -> bool:
        return not self.variables()

    def substitute(self, theta: Mapping[str, str]) -> "ContextLiteral":
        return ContextLiteral(self.context, substitute_element(self.belief, theta), self.negated)


@dataclass(frozen=True, slots=True)
class Comparison:
    """Built-in ``t1 = t2`` / ``t1 != t2``, evaluated syntactically on constants."""

    left: Term
    op: str
    right: Term

    def __post_init__(self):
        if self.op not in ("=", "!="):
            raise ValidationError(f"unknown comparison operator {self.op!r}")

    def variables(self) -> Tuple[str, ...]:
        return tuple(dict.fromkeys(t.name for t in (self.left, self.right) if isinstance(t, Variable)))

    def substitute(self, theta: Mapping[str, str]) -> "Comparison":
        def sub(t: Term) -> Term:
            if isinstance(t, Variable) and t.name in theta:
                return Constant(theta[t.name])
            return t

        return Comparison(sub(self.left), self.op, sub(self.right))

    def evaluate(self) -> bool:
        if isinstance(self.left, Variable) or isinstance(self.right, Variable):
            raise ValidationError(f"comparison {self} is not ground")
        same = self.left.name == self.right.name
        return same if self.op == "=" else not same

    def __str__(self) -> str:
        return f"{self.left} {self.op} {self.right}"


def lit(context: int, belief: Belief, negated: bool = False) -> ContextLiteral:
    return ContextLiteral(context, belief, negated)


class _Body:
    """Shared accessors for rules and constraints with split bodies."""

    positive: Tuple[ContextLiteral, ...]
    negative: Tuple[ContextLiteral, ...]
    comparisons: Tuple[Comparison, ...]

    def literals(self) -> Tuple[ContextLiteral, ...]:
        return self.positive + self.negative

    def positive_variables(self) -> FrozenSet[str]:
        return frozenset(v for l in self.positive for v in l.variables())

    def body_variables(self) -> Tuple[str, ...]:
        seen: Dict[str, None] = {}
        for l in self.literals():
            for v in l.variables():
                seen.setdefault(v)
        for c in self.comparisons:
            for v in c.variables():
                seen.setdefault(v)
        return tuple(seen)

    def body_constants(self) -> FrozenSet[str]:
        found = set()
        for l in self.literals():
            found |= element_constants(l.belief)
        for c in self.comparisons:
            found |= {t.name for t in (c.left, c.right) if isinstance(t, Constant)}
        return frozenset(found)

    def occurrences(self) -> Dict[str, int]:
        counts: Dict[str, int] = {}
        for l in self.literals():
            if isinstance(l.belief, Token):
                continue
            atom_ = l.belief.atom if isinstance(l.belief, Negated) else l.belief
            for a in atom_.args:
                if isinstance(a, Variable):
                    counts[a.name] = counts.get(a.name, 0) + 1
        for c in self.comparisons:
            for t in (c.left, c.right):
                if isinstance(t, Variable):
                    counts[t.name] = counts.get(t.name, 0) + 1
        return counts


# -- bridge rules, local rules, management ------------------------------------


@dataclass(frozen=True, slots=True)
class ManagedHead:
    """Operation applied to a knowledge-base element, ``op(p)``."""

    op: str
    element: KBElement

    def __str__(self) -> str:
        return f"{self.op}({self.element})"


@dataclass(frozen=True)
class BridgeRule(_Body):
    """``(k:op(s)) <- (c1:p1),...,not (cm:pm)``; plain heads use op ``add``."""

    context: int
    head: KBElement
    positive: Tuple[ContextLiteral, ...] = ()
    negative: Tuple[ContextLiteral, ...] = ()
    comparisons: Tuple[Comparison, ...] = ()
    op: str = "add"

    def variables(self) -> Tuple[str, ...]:
        seen = dict.fromkeys(element_variables(self.head))
        for v in self.body_variables():
            seen.setdefault(v)
        return tuple(seen)

    def is_ground(self) -> bool:
        return not self.variables()

    def occurrences(self) -> Dict[str, int]:
        counts = _Body.occurrences(self)
        if isinstance(self.head, Atom):
            for a in self.head.args:
                if isinstance(a, Variable):
                    counts[a.name] = counts.get(a.name, 0) + 1
        return counts

    @property
    def managed_head(self) -> ManagedHead:
        return ManagedHead(self.op, self.head)

    def substitute(self, theta: Mapping[str, str]) -> "BridgeRule":
        return BridgeRule(
            self.context,
            substitute_element(self.head, theta),  # type: ignore[arg-type]
            tuple(l.substitute(theta) for l in self.positive),
            tuple(l.substitute(theta) for l in self.negative),
            tuple(c.substitute(theta) for c in self.comparisons),
            self.op,
        )


GroundRule = BridgeRule


@dataclass(frozen=True)
class Rule:
    """Local rule ``head :- body`` of a Datalog or closure context."""

    head: Union[Atom, Negated]
    body: Tuple[Union[Atom, Negated], ...] = ()
    negative_body: Tuple[Atom, ...] = ()

    def variables(self) -> Tuple[str, ...]:
        seen = dict.fromkeys(self.head.variables())
        for b in self.body + self.negative_body:
            for v in b.variables():
                seen.setdefault(v)
        return tuple(seen)

    def __str__(self) -> str:
        parts = [str(b) for b in self.body] + [f"not {b}" for b in self.negative_body]
        if not parts:
            return f"{self.head}."
        return f"{self.head} :- {', '.join(parts)}."


OpHandler = Callable[[FrozenSet[KBElement], KBElement], FrozenSet[KBElement]]


@dataclass(frozen=True)
class Management:
    """Management function: keyed adds and ``replace`` first, custom ops next, removes last.

    ``keys`` maps a predicate signature to the 0-based argument positions that
    identify a tuple; adding a keyed atom evicts other tuples with the same key.
    """

    keys: Mapping[Tuple[str, int], Tuple[int, ...]] = field(default_factory=dict)
    handlers: Mapping[str, OpHandler] = field(default_factory=dict)

    def key_of(self, element: KBElement) -> Optional[Tuple]:
        if not isinstance(element, Atom):
            return None
        positions = self.keys.get(element.signature)
        if positions is None:
            return None
        values = element.values()
        return (element.signature, tuple(values[p] for p in positions))

    def __call__(self, actions: Iterable[ManagedHead], kb: FrozenSet[KBElement]) -> FrozenSet[KBElement]:
        adds, removes, custom = [], [], []
        for action in actions:
            if action.op == "add":
                adds.append(action.element)
            elif action.op == "replace":
                if self.key_of(action.element) is None:
                    raise ActionError(f"replace needs a declared key for {action.element}")
                adds.append(action.element)
            elif action.op == "remove":
                removes.append(action.element)
            elif action.op in self.handlers:
                custom.append(action)
            else:
                raise ActionError(f"unknown operation {action.op!r}")
        result = set(kb)
        if adds:
            keyed = {self.key_of(e) for e in adds} - {None}
            if keyed:
                result = {e for e in result if self.key_of(e) not in keyed}
            result.update(adds)
        for action in sorted(custom, key=str):
            result = set(self.handlers[action.op](frozenset(result), action.element))
        result.difference_update(removes)
        return frozenset(result)


STANDARD_MANAGEMENT = Management()


# -- contexts and systems ------------------------------------------------------


@dataclass(frozen=True)
class Context:
    name: str
    logic: "ContextLogic"
    kb: FrozenSet[KBElement] = frozenset()
    bridge_rules: Tuple[BridgeRule, ...] = ()
    import_domains: Mapping[int, FrozenSet[str]] = field(default_factory=dict)
    ops: FrozenSet[str] = frozenset({"add"})
    management: Management = STANDARD_MANAGEMENT

    def apply(self, actions: Iterable[ManagedHead], kb: Optional[FrozenSet[KBElement]] = None) -> FrozenSet[KBElement]:
        """``mng(actions, kb)``; defaults to this context's own kb."""
        return self.management(actions, self.kb if kb is None else kb)

    def with_kb(self, kb: Iterable[KBElement]) -> "Context":
        return replace(self, kb=frozenset(kb))


@dataclass(frozen=True)
class MultiContextSystem:
    contexts: Tuple[Context, ...] = ()

    def __len__(self) -> int:
        return len(self.contexts)

    def __getitem__(self, index: int) -> Context:
        return self.contexts[index]

    def __iter__(self) -> Iterator[Context]:
        return iter(self.contexts)

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(c.name for c in self.contexts)

    def index_of(self, name: str) -> int:
        for i, c in enumerate(self.contexts):
            if c.name == name:
                return i
        raise KeyError(name)

    def replace_context(self, index: int, context: Context) -> "MultiContextSystem":
        contexts = list(self.contexts)
        contexts[index] = context
        return MultiContextSystem(tuple(contexts))

    def append(self, context: Context) -> "MultiContextSystem":
        return MultiContextSystem(self.contexts + (context,))


# -- belief sets and states ---------------------------------------------------------


class BeliefSet:
    """A set of beliefs.

    Closed-world sets answer ``-p`` as "p is absent" without materialising the
    negative part; open-world sets only contain the negatives they were given.
    """

    __slots__ = ("positive", "negative", "closed_world", "_index", "_hash")

    def __init__(
        self,
        positive: Iterable[KBElement] = (),
        negative: Iterable[Atom] = (),
        closed_world: bool = True,
    ):
        self.positive: FrozenSet[KBElement] = frozenset(positive)
        self.negative: FrozenSet[Atom] = frozenset(negative)
        self.closed_world = closed_world
        if closed_world and self.negative:
            raise ValidationError("closed-world belief sets keep their negative part implicit")
        clash = self.positive & self.negative
        if clash:
            raise ValidationError(f"belief set contains both p and -p for {sorted(map(str, clash))}")
        self._index: Optional[Dict[Tuple[str, int], Tuple[Atom, ...]]] = None
        self._hash: Optional[int] = None

    def atoms(self) -> FrozenSet[Atom]:
        return frozenset(e for e in self.positive if isinstance(e, Atom))

    def atoms_of(self, signature: Tuple[str, int]) -> Tuple[Atom, ...]:
        if self._index is None:
            index: Dict[Tuple[str, int], list] = {}
            for e in self.positive:
                if isinstance(e, Atom):
                    index.setdefault(e.signature, []).append(e)
            self._index = {k: tuple(v) for k, v in index.items()}
        return self._index.get(signature, ())

    def __contains__(self, belief: object) -> bool:
        if isinstance(belief, Negated):
            if self.closed_world:
                return belief.atom not in self.positive
            return belief.atom in self.negative
        return belief in self.positive

    def holds(self, belief: Belief) -> bool:
        """Membership; variables left in an atom are read existentially."""
        if isinstance(belief, Atom) and not belief.is_ground():
            return any(match(belief, fact, {}) is not None for fact in self.atoms_of(belief.signature))
        if isinstance(belief, Negated) and not belief.is_ground():
            raise ValidationError(f"existential variables are not supported under negation: {belief}")
        return belief in self

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BeliefSet):
            return NotImplemented
        return (
            self.closed_world == other.closed_world
            and self.positive == other.positive
            and self.negative == other.negative
        )

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.closed_world, self.positive, self.negative))
        return self._hash

    def __len__(self) -> int:
        return len(self.positive) + len(self.negative)

    def sorted_beliefs(self) -> Tuple[str, ...]:
        return tuple(sorted(str(b) for b in self.positive) + sorted(f"-{b}" for b in self.negative))

    def __repr__(self) -> str:
        return "{" + ", ".join(self.sorted_beliefs()) + "}"


@dataclass(frozen=True)
class BeliefState:
    sets: Tuple[BeliefSet, ...] = ()

    def __len__(self) -> int:
        return len(self.sets)

    def __getitem__(self, index: int) -> BeliefSet:
        return self.sets[index]

    def __iter__(self) -> Iterator[BeliefSet]:
        return iter(self.sets)


def belief_state(*sets: Iterable[KBElement], closed_world: bool = True) -> BeliefState:
    return BeliefState(tuple(BeliefSet(s, closed_world=closed_world) for s in sets))


def match(pattern: Atom, fact: Atom, theta: Mapping[str, str]) -> Optional[Dict[str, str]]:
    """Extend ``theta`` so that ``pattern`` equals the ground ``fact``, or None."""
    if pattern.predicate != fact.predicate or len(pattern.args) != len(fact.args):
        return None
    result = dict(theta)
    for p, f in zip(pattern.args, fact.args):
        if isinstance(p, Constant):
            if p.name != f.name:
                return None
        else:
            bound = result.get(p.name)
            if bound is None:
                result[p.name] = f.name
            elif bound != f.name:
                return None
    return result


# -- integrity constraints and updates ---------------------------------------------------------


@dataclass(frozen=True)
class IntegrityConstraint(_Body):
    """``<- (i1:P1),...,(im:Pm), not (im+1:Pm+1),...,not (il:Pl)``."""

    positive: Tuple[ContextLiteral, ...] = ()
    negative: Tuple[ContextLiteral, ...] = ()
    comparisons: Tuple[Comparison, ...] = ()
    label: Optional[str] = field(default=None, compare=False)

    def variables(self) -> Tuple[str, ...]:
        return self.body_variables()

    def is_ground(self) -> bool:
        return not self.variables()

    def existential_variables(self) -> FrozenSet[str]:
        """Variables of negated literals used exactly once and nowhere positive."""
        bound = self.positive_variables() | {v for c in self.comparisons for v in c.variables()}
        counts = self.occurrences()
        return frozenset(
            v for l in self.negative for v in l.variables() if v not in bound and counts.get(v) == 1
        )

    def substitute(self, theta: Mapping[str, str]) -> "IntegrityConstraint":
        return IntegrityConstraint(
            tuple(l.substitute(theta) for l in self.positive),
            tuple(l.substitute(theta) for l in self.negative),
            tuple(c.substitute(theta) for c in self.comparisons),
            self.label,
        )


def constraint(*body: Union[ContextLiteral, Comparison], label: Optional[str] = None) -> IntegrityConstraint:
    """Build an IC from a mixed body, splitting it by literal polarity."""
    return IntegrityConstraint(
        tuple(b for b in body if isinstance(b, ContextLiteral) and not b.negated),
        tuple(b for b in body if isinstance(b, ContextLiteral) and b.negated),
        tuple(b for b in body if isinstance(b, Comparison)),
        label,
    )


def bridge(context: int, head: KBElement, *body: Union[ContextLiteral, Comparison], op: str = "add") -> BridgeRule:
    """Build a bridge rule from a mixed body."""
    return BridgeRule(
        context,
        head,
        tuple(b for b in body if isinstance(b, ContextLiteral) and not b.negated),
        tuple(b for b in body if isinstance(b, ContextLiteral) and b.negated),
        tuple(b for b in body if isinstance(b, Comparison)),
        op,
    )


@dataclass(frozen=True, slots=True)
class UpdateAction:
    """``(i:o(p))``."""

    context: int
    op: str
    element: KBElement

    @property
    def head(self) -> ManagedHead:
        return ManagedHead(self.op, self.element)

    def sort_key(self) -> Tuple[int, str, str]:
        return (self.context, self.op, str(self.element))
