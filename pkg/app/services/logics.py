"""Context logics: the ``ACC`` functions contexts are evaluated with.

Built-in kinds:

- ``db``       relational database, closed world, ``ACC(kb) = {kb}``
- ``datalog``  positive Datalog, closed world, least model
- ``closure``  Horn axioms over unary/binary predicates, open world
- ``models``   every Herbrand model over a declared finite base (first-order stand-in)
- ``flag-weak`` / ``flag-strong``  the two-state logics used by the constraint encodings

Further kinds can be plugged in with ``register_logic``.
"""

from abc import ABC, abstractmethod
from itertools import combinations, product
from typing import Callable, Dict, FrozenSet, Hashable, Iterable, Optional, Sequence, Tuple

from app.errors import CapabilityError, UnsupportedLogicError, ValidationError
from app.models.kernel import Atom, BeliefSet, Constant, KBElement, Negated, Rule, Signature, Token
from app.services import datalog
from app.services.config import get_settings


class ContextLogic(ABC):
    kind: str = "abstract"
    singleton: bool = False
    monotone: bool = False
    enumerable: bool = True
    closed_world: bool = True

    def __init__(self, signature: Optional[Signature] = None):
        self.signature = signature

    @abstractmethod
    def acc(self, kb: FrozenSet[KBElement]) -> Tuple[BeliefSet, ...]:
        """Acceptable belief sets for ``kb`` in a deterministic order."""

    @property
    def rules(self) -> Tuple[Rule, ...]:
        return ()

    def cache_key(self) -> Hashable:
        return self

    def __repr__(self) -> str:
        return f"{type(self).__name__}(kind={self.kind!r})"


class RelationalDBLogic(ContextLogic):
    kind = "db"
    singleton = True
    monotone = True

    def acc(self, kb):
        for element in kb:
            if isinstance(element, Token):
                raise UnsupportedLogicError(f"relational context cannot hold ordinary element {element}")
            if not element.is_ground():
                raise UnsupportedLogicError(f"relational context holds non-ground atom {element}")
        return (BeliefSet(kb, closed_world=True),)

    def cache_key(self):
        return (self.kind,)


class DatalogLogic(ContextLogic):
    kind = "datalog"
    singleton = True
    monotone = True

    def __init__(self, rules: Sequence[Rule] = (), signature: Optional[Signature] = None):
        super().__init__(signature)
        for rule in rules:
            if isinstance(rule.head, Negated) or any(isinstance(b, Negated) for b in rule.body):
                raise UnsupportedLogicError(f"Datalog rules are positive: {rule}")
            datalog.check_rule(rule)
        self._rules = tuple(rules)

    @property
    def rules(self):
        return self._rules

    def acc(self, kb):
        return (datalog_minimal_model(kb, self._rules),)

    def cache_key(self):
        return (self.kind, self._rules)


class ClosureLogic(ContextLogic):
    """Horn fragment: closure under axioms; a clash ``p``/``-p`` has no acceptable set."""

    kind = "closure"
    singleton = True
    monotone = True
    closed_world = False

    def __init__(self, axioms: Sequence[Rule] = (), signature: Optional[Signature] = None):
        super().__init__(signature)
        for axiom in axioms:
            if axiom.negative_body:
                raise UnsupportedLogicError(f"axiom is not Horn: {axiom}")
            for literal in (axiom.head,) + axiom.body:
                if (literal.atom if isinstance(literal, Negated) else literal).arity > 2:
                    raise UnsupportedLogicError(f"axiom uses a predicate of arity > 2: {axiom}")
            datalog.check_rule(axiom)
        self._axioms = tuple(axioms)

    @property
    def rules(self):
        return self._axioms

    def acc(self, kb):
        result = closure_acc(kb, self._axioms)
        return () if result is None else (result,)

    def cache_key(self):
        return (self.kind, self._axioms)


class HerbrandModelLogic(ContextLogic):
    """All models over a finite Herbrand base that contain the kb."""

    kind = "models"

    def __init__(self, predicates: Iterable[Tuple[str, int]], universe: Iterable[str], signature: Optional[Signature] = None):
        self.predicates = tuple(sorted(set(predicates)))
        self.universe = tuple(sorted(set(universe)))
        super().__init__(signature or Signature(belief_predicates=frozenset(self.predicates), universe=frozenset(self.universe)))
        self.base = tuple(
            sorted(
                (Atom(name, tuple(Constant(c) for c in args)) for name, arity in self.predicates for args in product(self.universe, repeat=arity)),
                key=str,
            )
        )

    def acc(self, kb):
        maximum = get_settings().max_herbrand_base
        if len(self.base) > maximum:
            raise CapabilityError(f"Herbrand base of {len(self.base)} atoms exceeds {maximum}")
        free = [a for a in self.base if a not in kb]
        models = []
        for size in range(len(free) + 1):
            for extra in combinations(free, size):
                models.append(BeliefSet(kb | frozenset(extra), closed_world=True))
        return tuple(models)

    def cache_key(self):
        return (self.kind, self.predicates, self.universe)


FLAG_TOKEN = Token("*")


class FlagLogic(ContextLogic):
    """Two-state logic over ``{*}``.

    weak:   ACC(∅) = {∅},  ACC({*}) = ∅
    strong: ACC(∅) = ∅,    ACC({*}) = {{*}}
    """

    singleton = True

    def __init__(self, variant: str):
        if variant not in ("weak", "strong"):
            raise ValidationError(f"unknown flag variant {variant!r}")
        super().__init__(Signature(universe=frozenset()))
        self.variant = variant
        self.kind = f"flag-{variant}"

    def acc(self, kb):
        if not kb <= {FLAG_TOKEN}:
            raise UnsupportedLogicError(f"flag context only accepts {FLAG_TOKEN}")
        raised = FLAG_TOKEN in kb
        if self.variant == "weak":
            return () if raised else (BeliefSet(),)
        return (BeliefSet({FLAG_TOKEN}),) if raised else ()

    def cache_key(self):
        return (self.kind,)


def relational_db_acc(kb: FrozenSet[KBElement]) -> Tuple[BeliefSet, ...]:
    return RelationalDBLogic().acc(frozenset(kb))


def datalog_minimal_model(facts: Iterable[KBElement], rules: Sequence[Rule]) -> BeliefSet:
    facts = frozenset(facts)
    tokens = {f for f in facts if isinstance(f, Token)}
    model = datalog.evaluate(facts, rules)
    return BeliefSet(set(model) | tokens, closed_world=True)


def closure_acc(kb: Iterable[KBElement], axioms: Sequence[Rule]) -> Optional[BeliefSet]:
    """Deductive closure, or None when it contains both ``p`` and ``-p``."""
    kb = frozenset(kb)
    closure = datalog.evaluate(kb, axioms)
    positive = {f for f in closure if isinstance(f, Atom)} | {e for e in kb if isinstance(e, Token)}
    negative = {f.atom for f in closure if isinstance(f, Negated)}
    if positive & negative:
        return None
    return BeliefSet(positive, negative, closed_world=False)


def flag_logic(variant: str) -> FlagLogic:
    return FlagLogic(variant)


LogicFactory = Callable[..., ContextLogic]

LOGIC_REGISTRY: Dict[str, LogicFactory] = {
    "db": lambda rules=(), signature=None, **_: RelationalDBLogic(signature),
    "datalog": lambda rules=(), signature=None, **_: DatalogLogic(rules, signature),
    "closure": lambda rules=(), signature=None, **_: ClosureLogic(rules, signature),
    "models": lambda predicates=(), universe=(), **_: HerbrandModelLogic(predicates, universe),
    "flag-weak": lambda **_: FlagLogic("weak"),
    "flag-strong": lambda **_: FlagLogic("strong"),
}


def register_logic(kind: str, factory: LogicFactory) -> None:
    LOGIC_REGISTRY[kind] = factory


def create_logic(kind: str, **params) -> ContextLogic:
    try:
        factory = LOGIC_REGISTRY[kind]
    except KeyError:
        raise UnsupportedLogicError(f"unknown logic kind {kind!r}") from None
    if kind == "db" and params.get("rules"):
        raise UnsupportedLogicError("relational contexts take no rules")
    return factory(**params)
