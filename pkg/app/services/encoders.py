"""Lift databases into multi-context systems.

- ``ctx_of_db``: one closed-world context holding the database
- ``denial_to_ic``: denial clauses as constraints over that context
- ``distributed_db``: one context per site plus replica constraints
- ``deductive_db_to_mcs``: extensional and intensional contexts
- ``p2p_to_mcs`` and the weak-model semantics of peer systems
"""

from dataclasses import dataclass
from itertools import combinations, product
from typing import Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Sequence, Set, Tuple, Union

from app.errors import SchemaError, ValidationError
from app.models.kernel import (
    Atom,
    BridgeRule,
    Comparison,
    Context,
    IntegrityConstraint,
    MultiContextSystem,
    Rule,
    Variable,
    lit,
    match,
)
from app.services import datalog
from app.services.logging import engine_logger
from app.services.logics import RelationalDBLogic

DB_CONTEXT_NAME = "db"


@dataclass(frozen=True)
class Denial:
    """``forall(A1 & ... & Ak & ~B1 & ... & ~Bm -> false)``."""

    positive: Tuple[Atom, ...] = ()
    negative: Tuple[Atom, ...] = ()
    comparisons: Tuple[Comparison, ...] = ()
    label: Optional[str] = None


def ctx_of_db(db: Iterable[Atom], name: str = DB_CONTEXT_NAME) -> MultiContextSystem:
    return MultiContextSystem((Context(name=name, logic=RelationalDBLogic(), kb=frozenset(db)),))


def denial_to_ic(denial: Union[Denial, str], context: int = 0) -> IntegrityConstraint:
    """``<- (c:A1),...,(c:Ak), not (c:B1),...,not (c:Bm)``."""
    if isinstance(denial, str):
        from app.api.parser import parse_denial

        denial = parse_denial(denial)
    return IntegrityConstraint(
        tuple(lit(context, a) for a in denial.positive),
        tuple(lit(context, b, negated=True) for b in denial.negative),
        denial.comparisons,
        denial.label,
    )


# -- distributed databases -------------------------------------------------------------


def _arities(dbs: Mapping[str, Iterable[Atom]], schema: Mapping[str, int]) -> Dict[str, int]:
    arities = dict(schema)
    for site, facts in dbs.items():
        for fact in facts:
            known = arities.setdefault(fact.predicate, fact.arity)
            if known != fact.arity:
                raise SchemaError(
                    f"{fact.predicate} has arity {fact.arity} at site {site} but {known} elsewhere"
                )
    return arities


def _tuple_pattern(predicate: str, arity: int) -> Atom:
    return Atom(predicate, tuple(Variable(f"X{k + 1}") for k in range(arity)))


def distributed_db(
    dbs: Mapping[str, Iterable[Atom]],
    schema: Mapping[str, int],
    relations: Optional[Mapping[str, Iterable[str]]] = None,
) -> Tuple[MultiContextSystem, List[IntegrityConstraint]]:
    """One context per site; every relation in ``schema`` must agree across the sites holding it.

    A site holds a relation when it has facts for it or lists it in ``relations``.
    """
    dbs = {site: frozenset(facts) for site, facts in dbs.items()}
    schema = dict(schema)
    arities = _arities(dbs, schema)
    unknown = sorted(set(arities) - set(schema))
    if unknown:
        raise SchemaError(f"relations {unknown} are stored at some site but missing from the schema")
    m = MultiContextSystem(tuple(Context(name=site, logic=RelationalDBLogic(), kb=facts) for site, facts in dbs.items()))
    declared = {site: set(relations.get(site, ())) if relations else set() for site in dbs}

    ics: List[IntegrityConstraint] = []
    for predicate in sorted(schema):
        pattern = _tuple_pattern(predicate, arities[predicate])
        holders = [
            i for i, (site, facts) in enumerate(dbs.items())
            if predicate in declared[site] or any(f.predicate == predicate for f in facts)
        ]
        for i, j in product(holders, holders):
            if i != j:
                ics.append(
                    IntegrityConstraint(
                        (lit(i, pattern),),
                        (lit(j, pattern, negated=True),),
                        label=f"{predicate}:{m[i].name}->{m[j].name}",
                    )
                )
    engine_logger.grounding("distributed_db", sites=len(dbs), constraints=len(ics)).debug("encoded")
    return m, ics


def exclusion_ics(
    m: MultiContextSystem, site: str, predicate: str, arity: int, districts: Iterable[str]
) -> List[IntegrityConstraint]:
    """``<- (site:p(X)), (d:p(X))`` for every other district ``d``."""
    pattern = _tuple_pattern(predicate, arity)
    i = m.index_of(site)
    return [
        IntegrityConstraint((lit(i, pattern), lit(m.index_of(d), pattern)), label=f"exclusive-{predicate}:{site}/{d}")
        for d in districts
        if d != site
    ]


# -- deductive databases -------------------------------------------------------------


@dataclass(frozen=True)
class DeductiveDB:
    facts: FrozenSet[Atom] = frozenset()
    rules: Tuple[Rule, ...] = ()

    @property
    def extensional(self) -> FrozenSet[Tuple[str, int]]:
        return frozenset(f.signature for f in self.facts)

    @property
    def intensional(self) -> FrozenSet[Tuple[str, int]]:
        return frozenset(r.head.signature for r in self.rules)

    def validate(self) -> None:
        mixed = self.extensional & self.intensional
        if mixed:
            names = sorted(f"{p}/{a}" for p, a in mixed)
            raise ValidationError(f"relations must be either extensional or intensional: {names}")
        for rule in self.rules:
            if not isinstance(rule.head, Atom) or rule.negative_body:
                raise ValidationError(f"deductive rules are definite: {rule}")
            datalog.check_rule(rule)


EXTENSIONAL, INTENSIONAL = 0, 1


def deductive_db_to_mcs(d: DeductiveDB) -> MultiContextSystem:
    """Context ``E`` holds the facts; context ``I`` derives the view through bridge rules."""
    d.validate()
    rules = tuple(
        BridgeRule(
            INTENSIONAL,
            rule.head,
            tuple(lit(route_atom(d, b), b) for b in rule.body),
        )
        for rule in d.rules
    )
    return MultiContextSystem(
        (
            Context(name="E", logic=RelationalDBLogic(), kb=d.facts),
            Context(name="I", logic=RelationalDBLogic(), bridge_rules=rules),
        )
    )


def route_atom(d: DeductiveDB, a: Atom) -> int:
    return INTENSIONAL if a.signature in d.intensional else EXTENSIONAL


def deductive_ic(d: DeductiveDB, denial: Union[Denial, str]) -> IntegrityConstraint:
    """Constraint over the induced system, each atom routed by its relation."""
    if isinstance(denial, str):
        from app.api.parser import parse_denial

        denial = parse_denial(denial)
    return IntegrityConstraint(
        tuple(lit(route_atom(d, a), a) for a in denial.positive),
        tuple(lit(route_atom(d, b), b, negated=True) for b in denial.negative),
        denial.comparisons,
        denial.label,
    )


def extensional_only_check(ics: Iterable[IntegrityConstraint], extensional: int = EXTENSIONAL) -> bool:
    """True when every constraint only queries the extensional context."""
    return all(l.context == extensional for ic in ics for l in ic.literals())


# -- peer-to-peer systems ------------------------------------------------------------


@dataclass(frozen=True)
class MappingRule:
    """``head <-_source body``: imports from peer ``source``."""

    head: Atom
    source: str
    body: Tuple[Atom, ...]

    def as_rule(self) -> Rule:
        return Rule(self.head, self.body)


@dataclass(frozen=True)
class Peer:
    name: str
    facts: FrozenSet[Atom] = frozenset()
    rules: Tuple[Rule, ...] = ()
    mappings: Tuple[MappingRule, ...] = ()
    ics: Tuple[Denial, ...] = ()

    @property
    def extensional(self) -> FrozenSet[Tuple[str, int]]:
        return frozenset(f.signature for f in self.facts)

    @property
    def intensional(self) -> FrozenSet[Tuple[str, int]]:
        return frozenset(r.head.signature for r in self.rules)

    @property
    def mapped(self) -> FrozenSet[Tuple[str, int]]:
        return frozenset(mr.head.signature for mr in self.mappings)

    @property
    def predicates(self) -> FrozenSet[Tuple[str, int]]:
        return self.extensional | self.intensional | self.mapped


def _check_peers(peers: Sequence[Peer]) -> Dict[Tuple[str, int], str]:
    owner: Dict[Tuple[str, int], str] = {}
    names = {p.name for p in peers}
    if len(names) != len(peers):
        raise ValidationError("peer names must be unique")
    for peer in peers:
        e, i, mp = peer.extensional, peer.intensional, peer.mapped
        if e & i or e & mp or i & mp:
            raise ValidationError(f"peer {peer.name}: extensional, intensional and mapping relations must be disjoint")
        for mr in peer.mappings:
            if mr.source == peer.name:
                raise ValidationError(f"peer {peer.name}: mapping rule {mr.head} imports from its own peer")
            if mr.source not in names:
                raise ValidationError(f"peer {peer.name}: unknown source peer {mr.source}")
        for signature in peer.predicates:
            if signature in owner and owner[signature] != peer.name:
                raise ValidationError(f"relation {signature[0]}/{signature[1]} declared by {owner[signature]} and {peer.name}")
            owner[signature] = peer.name
    return owner


def p2p_to_mcs(peers: Sequence[Peer]) -> Tuple[MultiContextSystem, List[IntegrityConstraint]]:
    peers = list(peers)
    _check_peers(peers)
    index = {p.name: k for k, p in enumerate(peers)}
    contexts = []
    ics: List[IntegrityConstraint] = []
    for k, peer in enumerate(peers):
        rules = [BridgeRule(k, r.head, tuple(lit(k, b) for b in r.body)) for r in peer.rules]
        rules += [BridgeRule(k, mr.head, tuple(lit(index[mr.source], b) for b in mr.body)) for mr in peer.mappings]
        contexts.append(Context(name=peer.name, logic=RelationalDBLogic(), kb=peer.facts, bridge_rules=tuple(rules)))
        for denial in peer.ics:
            ics.append(denial_to_ic(denial, k))
    return MultiContextSystem(tuple(contexts)), ics


def _bindings(body: Sequence[Atom], facts_by_signature: Mapping[Tuple[str, int], Sequence[Atom]]) -> Iterator[Dict[str, str]]:
    def extend(k: int, theta: Dict[str, str]) -> Iterator[Dict[str, str]]:
        if k == len(body):
            yield theta
            return
        pattern = body[k]
        for fact in facts_by_signature.get(pattern.signature, ()):
            extended = match(pattern.substitute(theta), fact, theta)
            if extended is not None:
                yield from extend(k + 1, extended)

    yield from extend(0, {})


def _ground(rule: Rule, facts_by_signature: Mapping[Tuple[str, int], Sequence[Atom]]) -> Iterator[Rule]:
    """Instances of ``rule`` whose body atoms all occur among the given facts."""
    for theta in _bindings(rule.body, facts_by_signature):
        yield Rule(rule.head.substitute(theta), tuple(b.substitute(theta) for b in rule.body))


def _index(atoms: Iterable[Atom]) -> Dict[Tuple[str, int], List[Atom]]:
    result: Dict[Tuple[str, int], List[Atom]] = {}
    for a in atoms:
        result.setdefault(a.signature, []).append(a)
    return result


def _union_program(peers: Sequence[Peer]) -> Tuple[List[Atom], List[Rule], List[Rule]]:
    facts = [f for p in peers for f in p.facts]
    local = [r for p in peers for r in p.rules]
    mappings = [mr.as_rule() for p in peers for mr in p.mappings]
    return facts, local, mappings


def _ground_program(peers: Sequence[Peer]) -> Tuple[List[Atom], List[Rule], List[Rule]]:
    """Ground instances relevant to the least model of the whole system."""
    facts, local, mappings = _union_program(peers)
    everything = datalog.evaluate(facts, local + mappings)
    indexed = _index(a for a in everything if isinstance(a, Atom))
    ground_local = list(dict.fromkeys(i for r in local for i in _ground(r, indexed)))
    ground_mappings = list(dict.fromkeys(i for r in mappings for i in _ground(r, indexed)))
    return facts, ground_local, ground_mappings


def minimal_model(facts: Iterable[Atom], rules: Sequence[Rule]) -> FrozenSet[Atom]:
    return frozenset(a for a in datalog.evaluate(facts, rules) if isinstance(a, Atom))


def p2p_reduced_program(peers: Sequence[Peer], interpretation: Iterable[Atom]) -> List[Rule]:
    """Ground program with mapping instances whose head is not in ``interpretation`` dropped.

    Facts appear as body-less rules.
    """
    interpretation = frozenset(interpretation)
    facts, local, mappings = _ground_program(peers)
    kept = [r for r in mappings if r.head in interpretation]
    return [Rule(f) for f in dict.fromkeys(facts)] + local + kept


def _satisfies_denials(model: FrozenSet[Atom], peers: Sequence[Peer]) -> bool:
    indexed = _index(model)
    for peer in peers:
        for denial in peer.ics:
            for theta in _bindings(denial.positive, indexed):
                if not all(c.substitute(theta).evaluate() for c in denial.comparisons):
                    continue
                if not any(
                    any(match(b.substitute(theta), fact, theta) is not None for fact in indexed.get(b.signature, ()))
                    for b in denial.negative
                ):
                    return False
    return True


def is_weak_model(peers: Sequence[Peer], interpretation: Iterable[Atom]) -> bool:
    """``I = MM(P^I)`` and ``I`` satisfies every peer's constraints."""
    interpretation = frozenset(interpretation)
    reduced = p2p_reduced_program(peers, interpretation)
    return minimal_model((), reduced) == interpretation and _satisfies_denials(interpretation, peers)


def p2p_weak_models(peers: Sequence[Peer]) -> Iterator[FrozenSet[Atom]]:
    """Weak models, found by disabling subsets of ground mapping instances, smallest first."""
    peers = list(peers)
    _check_peers(peers)
    facts, local, mappings = _ground_program(peers)
    log = engine_logger.search("p2p_weak_models", peers=len(peers), mapping_instances=len(mappings))
    seen: Set[FrozenSet[Atom]] = set()
    for size in range(len(mappings) + 1):
        for disabled in combinations(range(len(mappings)), size):
            off = set(disabled)
            enabled = [r for k, r in enumerate(mappings) if k not in off]
            model = minimal_model(facts, local + enabled)
            if model in seen:
                continue
            reduced = [r for r in mappings if r.head in model]
            if minimal_model(facts, local + reduced) != model:
                continue
            if not _satisfies_denials(model, peers):
                continue
            seen.add(model)
            yield model
    log.debug("search finished", weak_models=len(seen))


def split_by_peer(peers: Sequence[Peer], interpretation: Iterable[Atom]) -> Tuple[FrozenSet[Atom], ...]:
    """Route atoms of an interpretation to the peer owning their relation."""
    owner = _check_peers(list(peers))
    order = {p.name: k for k, p in enumerate(peers)}
    parts: List[Set[Atom]] = [set() for _ in peers]
    for a in interpretation:
        name = owner.get(a.signature)
        if name is None:
            raise ValidationError(f"no peer declares {a.predicate}/{a.arity}")
        parts[order[name]].add(a)
    return tuple(frozenset(p) for p in parts)
