"""Semi-naive bottom-up evaluation of positive rules.

Facts are ground atoms or explicit negative literals ``-p(t)``; negative
literals are just another relation here, which is what the closure logic
needs for Horn axioms with negative heads.
"""

from typing import Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Sequence, Set, Tuple, Union

from app.errors import UnsupportedLogicError
from app.models.kernel import Atom, Constant, Negated, Rule, Token

Fact = Union[Atom, Negated]
Key = Tuple[bool, str, int]
Row = Tuple[str, ...]


def _key(literal: Fact) -> Key:
    if isinstance(literal, Negated):
        return (True, literal.atom.predicate, literal.atom.arity)
    return (False, literal.predicate, literal.arity)


def _atom_of(literal: Fact) -> Atom:
    return literal.atom if isinstance(literal, Negated) else literal


def _build(key: Key, row: Row) -> Fact:
    a = Atom(key[1], tuple(Constant(v) for v in row))
    return Negated(a) if key[0] else a


def _unify(pattern: Atom, row: Row, theta: Dict[str, str]) -> Optional[Dict[str, str]]:
    result = theta
    for arg, value in zip(pattern.args, row):
        if isinstance(arg, Constant):
            if arg.name != value:
                return None
            continue
        bound = result.get(arg.name)
        if bound is None:
            if result is theta:
                result = dict(theta)
            result[arg.name] = value
        elif bound != value:
            return None
    return result


def _instantiate(pattern: Atom, theta: Mapping[str, str]) -> Row:
    return tuple(a.name if isinstance(a, Constant) else theta[a.name] for a in pattern.args)


def check_rule(rule: Rule) -> None:
    if rule.negative_body:
        raise UnsupportedLogicError(f"negation as failure is not supported: {rule}")
    body_vars = {v for b in rule.body for v in b.variables()}
    unbound = [v for v in rule.head.variables() if v not in body_vars]
    if unbound:
        raise UnsupportedLogicError(f"unsafe rule {rule}: head variables {unbound} not bound in the body")


def _join(
    body: Sequence[Atom],
    keys: Sequence[Key],
    sources: Sequence[Mapping[Key, Set[Row]]],
) -> Iterator[Dict[str, str]]:
    def extend(position: int, theta: Dict[str, str]) -> Iterator[Dict[str, str]]:
        if position == len(body):
            yield theta
            return
        for row in sources[position].get(keys[position], ()):
            extended = _unify(body[position], row, theta)
            if extended is not None:
                yield from extend(position + 1, extended)

    yield from extend(0, {})


def evaluate(facts: Iterable[Fact], rules: Sequence[Rule]) -> FrozenSet[Fact]:
    """Least model of ``facts`` under the positive ``rules``."""
    for rule in rules:
        check_rule(rule)

    total: Dict[Key, Set[Row]] = {}
    delta: Dict[Key, Set[Row]] = {}

    def add(target: Dict[Key, Set[Row]], key: Key, row: Row) -> None:
        target.setdefault(key, set()).add(row)

    for fact in facts:
        if isinstance(fact, Token):
            continue
        if not _atom_of(fact).is_ground():
            raise UnsupportedLogicError(f"fact {fact} is not ground")
        add(delta, _key(fact), _atom_of(fact).values())

    prepared = [
        (rule, [_atom_of(b) for b in rule.body], [_key(b) for b in rule.body], _key(rule.head), _atom_of(rule.head))
        for rule in rules
    ]
    for rule, body, keys, head_key, head in prepared:
        if not body:
            add(delta, head_key, _instantiate(head, {}))

    while delta:
        for key, rows in delta.items():
            total.setdefault(key, set()).update(rows)
        derived: Dict[Key, Set[Row]] = {}
        for rule, body, keys, head_key, head in prepared:
            for pivot in range(len(body)):
                if keys[pivot] not in delta:
                    continue
                sources = [total] * len(body)
                sources[pivot] = delta
                for theta in _join(body, keys, sources):
                    row = _instantiate(head, theta)
                    if row not in total.get(head_key, ()):
                        add(derived, head_key, row)
        delta = derived

    return frozenset(_build(key, row) for key, rows in total.items() for row in rows)


def immediate_consequence(facts: Iterable[Fact], rules: Sequence[Rule]) -> FrozenSet[Fact]:
    """One application of the rules on top of ``facts``."""
    current: Dict[Key, Set[Row]] = {}
    kept: List[Fact] = []
    for fact in facts:
        if isinstance(fact, Token):
            continue
        kept.append(fact)
        current.setdefault(_key(fact), set()).add(_atom_of(fact).values())
    result = set(kept)
    for rule in rules:
        check_rule(rule)
        body = [_atom_of(b) for b in rule.body]
        keys = [_key(b) for b in rule.body]
        for theta in _join(body, keys, [current] * len(body)):
            result.add(_build(_key(rule.head), _instantiate(_atom_of(rule.head), theta)))
    return frozenset(result)
