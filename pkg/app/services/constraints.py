"""Integrity constraints over multi-context systems.

Satisfaction of a single constraint is evaluated by joining its positive
literals against the belief sets instead of grounding it first. Weak and strong
satisfaction quantify over equilibria; ``encode_weak``/``encode_strong`` reduce
both to plain consistency by appending a flag context, preceded by a projection
context when a constraint reads a variable existentially.
"""

from dataclasses import replace
from typing import Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

from app.errors import NotApplicableError
from app.models.kernel import (
    Atom,
    BeliefSet,
    BeliefState,
    BridgeRule,
    Constant,
    Context,
    ContextLiteral,
    IntegrityConstraint,
    MultiContextSystem,
    Negated,
    Token,
    atom,
    match,
)
from app.models.results import ICCheck, ICViolation, SatisfactionMode, SatisfactionVerdict, Verdict
from app.services.equilibria import enumerate_equilibria
from app.services.grounding import exported_constants, ic_safety, ic_variable_domains
from app.services.logging import engine_logger
from app.services.logics import FLAG_TOKEN, FlagLogic, RelationalDBLogic

FLAG_CONTEXT_NAME = "_flag"
PROJECTION_CONTEXT_NAME = "_exists"


def _candidates(
    literal: ContextLiteral,
    bs: BeliefSet,
    theta: Dict[str, str],
    domains: Optional[Mapping[str, FrozenSet[str]]],
) -> Iterator[Dict[str, str]]:
    belief = literal.belief
    if isinstance(belief, Token):
        if belief in bs:
            yield theta
        return
    if isinstance(belief, Atom):
        for fact in bs.atoms_of(belief.signature):
            extended = match(belief.substitute(theta), fact, theta)
            if extended is not None and _in_domain(extended, theta, domains):
                yield extended
        return
    # explicit negative belief
    pattern = belief.atom.substitute(theta)
    if not bs.closed_world:
        for fact in bs.negative:
            extended = match(pattern, fact, theta)
            if extended is not None and _in_domain(extended, theta, domains):
                yield extended
        return
    free = pattern.variables()
    if not free:
        if Negated(pattern) in bs:
            yield theta
        return
    if domains is None:
        raise NotApplicableError(f"closed-world negative literal {belief} needs variable domains")
    for values in _product(free, domains):
        extended = dict(theta, **values)
        if Negated(pattern.substitute(values)) in bs:
            yield extended


def _product(variables: Sequence[str], domains: Mapping[str, FrozenSet[str]]) -> Iterator[Dict[str, str]]:
    if not variables:
        yield {}
        return
    head, rest = variables[0], variables[1:]
    for value in sorted(domains.get(head, frozenset())):
        for tail in _product(rest, domains):
            yield dict(tail, **{head: value})


def _in_domain(extended: Dict[str, str], theta: Dict[str, str], domains: Optional[Mapping[str, FrozenSet[str]]]) -> bool:
    if domains is None:
        return True
    return all(extended[v] in domains.get(v, frozenset()) for v in extended if v not in theta)


def ic_violations(
    s: BeliefState,
    ic: IntegrityConstraint,
    domains: Optional[Mapping[str, FrozenSet[str]]] = None,
) -> Iterator[Dict[str, str]]:
    """Instantiations of the bound variables that violate ``ic`` in ``s``.

    ``domains`` maps each bound variable to the constants it may take; None
    leaves the bindings to whatever the belief sets contain.
    """
    ic_safety(ic)
    positive = ic.positive

    def extend(k: int, theta: Dict[str, str]) -> Iterator[Dict[str, str]]:
        if k == len(positive):
            if not all(c.substitute(theta).evaluate() for c in ic.comparisons):
                return
            for l in ic.negative:
                if s[l.context].holds(l.belief.substitute(theta) if not isinstance(l.belief, Token) else l.belief):
                    return
            yield theta
            return
        literal = positive[k]
        yield from (
            t for candidate in _candidates(literal, s[literal.context], theta, domains) for t in extend(k + 1, candidate)
        )

    seen = set()
    for theta in extend(0, {}):
        key = tuple(sorted(theta.items()))
        if key not in seen:
            seen.add(key)
            yield theta


def ic_satisfied(
    s: BeliefState,
    ic: IntegrityConstraint,
    domains: Optional[Mapping] = None,
) -> ICCheck:
    """Whether ``s`` satisfies ``ic``; the first violating instantiation otherwise.

    ``domains`` is either per-variable (variable name -> constants) or
    per-context exported constants (context index -> constants).
    """
    variable_domains = _normalise_domains(ic, domains)
    for theta in ic_violations(s, ic, variable_domains):
        return ICCheck(satisfied=False, binding=theta)
    return ICCheck(satisfied=True)


def _normalise_domains(ic: IntegrityConstraint, domains: Optional[Mapping]) -> Optional[Dict[str, FrozenSet[str]]]:
    if domains is None:
        return None
    if all(isinstance(k, int) for k in domains):
        return ic_variable_domains(ic, domains)
    return {k: frozenset(v) for k, v in domains.items()}


def describe_constraint(ic: IntegrityConstraint, index: int) -> str:
    return ic.label or f"ic{index + 1}"


def _first_violation(
    s: BeliefState, ics: Sequence[IntegrityConstraint], domains: Sequence[Mapping[str, FrozenSet[str]]]
) -> Optional[ICViolation]:
    for index, (ic, dom) in enumerate(zip(ics, domains)):
        for theta in ic_violations(s, ic, dom):
            return ICViolation(constraint=describe_constraint(ic, index), binding=theta)
    return None


def _check(
    m: MultiContextSystem,
    ics: Iterable[IntegrityConstraint],
    mode: SatisfactionMode,
    limit: Optional[int],
    fast_path: Optional[bool],
) -> SatisfactionVerdict:
    ics = list(ics)
    log = engine_logger.constraint_check(mode.value, constraints=len(ics), contexts=len(m))
    exported = exported_constants(m)
    domains = [ic_variable_domains(ic, exported) for ic in ics]
    checked = 0
    last_violation: Optional[ICViolation] = None
    first = None
    for state in enumerate_equilibria(m, limit, fast_path=fast_path):
        checked += 1
        if first is None:
            first = state
        violation = _first_violation(state, ics, domains)
        if mode is SatisfactionMode.WEAK and violation is None:
            log.info("verdict", verdict="holds", equilibria=checked)
            return SatisfactionVerdict(mode=mode, verdict=Verdict.HOLDS, consistent=True, witness=state, equilibria_checked=checked)
        if mode is SatisfactionMode.STRONG and violation is not None:
            log.info("verdict", verdict="fails", equilibria=checked)
            return SatisfactionVerdict(
                mode=mode, verdict=Verdict.FAILS, consistent=True, witness=state, violations=[violation], equilibria_checked=checked
            )
        last_violation = violation or last_violation
    consistent = checked > 0
    if mode is SatisfactionMode.STRONG and consistent:
        log.info("verdict", verdict="holds", equilibria=checked)
        return SatisfactionVerdict(mode=mode, verdict=Verdict.HOLDS, consistent=True, witness=first, equilibria_checked=checked)
    log.info("verdict", verdict="fails", equilibria=checked, consistent=consistent)
    return SatisfactionVerdict(
        mode=mode,
        verdict=Verdict.FAILS,
        consistent=consistent,
        violations=[last_violation] if last_violation else [],
        equilibria_checked=checked,
    )


def weak_satisfies(
    m: MultiContextSystem,
    ics: Iterable[IntegrityConstraint],
    *,
    limit: Optional[int] = None,
    fast_path: Optional[bool] = None,
) -> SatisfactionVerdict:
    """Some equilibrium satisfies every constraint; it is the witness."""
    return _check(m, ics, SatisfactionMode.WEAK, limit, fast_path)


def strong_satisfies(
    m: MultiContextSystem,
    ics: Iterable[IntegrityConstraint],
    *,
    limit: Optional[int] = None,
    fast_path: Optional[bool] = None,
) -> SatisfactionVerdict:
    """``m`` is consistent and every equilibrium satisfies every constraint.

    On failure the witness is a violating equilibrium, or absent when ``m``
    has no equilibrium at all.
    """
    return _check(m, ics, SatisfactionMode.STRONG, limit, fast_path)


def satisfies(m: MultiContextSystem, ics: Iterable[IntegrityConstraint], mode, **kwargs) -> SatisfactionVerdict:
    mode = SatisfactionMode(mode)
    if mode is SatisfactionMode.WEAK:
        return weak_satisfies(m, ics, **kwargs)
    return strong_satisfies(m, ics, **kwargs)


def _project_existentials(
    ics: Iterable[IntegrityConstraint], projection: int
) -> Tuple[List[IntegrityConstraint], Tuple[BridgeRule, ...]]:
    """Replace ``not (c:p(X, Y))`` with existential ``Y`` by ``not (projection:exists_n(X))``.

    ``exists_n(X) <- (c:p(X, Y))`` is safe, so the flag rules built from the result are too.
    """
    rewritten: List[IntegrityConstraint] = []
    rules: List[BridgeRule] = []
    for ic in ics:
        existential = ic.existential_variables()
        negative = []
        for l in ic.negative:
            if not existential.intersection(l.variables()):
                negative.append(l)
                continue
            kept = [v for v in dict.fromkeys(l.variables()) if v not in existential]
            head = atom(f"exists_{len(rules)}", *kept)
            rules.append(BridgeRule(projection, head, (ContextLiteral(l.context, l.belief),)))
            negative.append(ContextLiteral(projection, head, negated=True))
        rewritten.append(replace(ic, negative=tuple(negative)))
    return rewritten, tuple(rules)


def _encode(m: MultiContextSystem, ics: Iterable[IntegrityConstraint], variant: str) -> MultiContextSystem:
    ics, projections = _project_existentials(ics, len(m))
    if projections:
        m = m.append(Context(name=PROJECTION_CONTEXT_NAME, logic=RelationalDBLogic(), bridge_rules=projections))
    flag = len(m)
    rules = tuple(BridgeRule(flag, FLAG_TOKEN, ic.positive, ic.negative, ic.comparisons) for ic in ics)
    return m.append(Context(name=FLAG_CONTEXT_NAME, logic=FlagLogic(variant), bridge_rules=rules))


def encode_weak(m: MultiContextSystem, ics: Iterable[IntegrityConstraint]) -> MultiContextSystem:
    """Consistent iff ``m`` weakly satisfies ``ics``."""
    return _encode(m, ics, "weak")


def encode_strong(m: MultiContextSystem, ics: Iterable[IntegrityConstraint]) -> MultiContextSystem:
    """For consistent ``m``: inconsistent iff ``m`` strongly satisfies ``ics``."""
    return _encode(m, ics, "strong")


# -- single-database fast path ---------------------------------------------------------


class _Relations:
    """Tuples per predicate with hash indexes built on demand per bound-position set."""

    def __init__(self, db: Iterable[Atom]):
        self.rows: Dict[Tuple[str, int], set] = {}
        for a in db:
            self.rows.setdefault(a.signature, set()).add(a.values())
        self._indexes: Dict[Tuple[Tuple[str, int], Tuple[int, ...]], Dict[tuple, list]] = {}

    def lookup(self, signature: Tuple[str, int], positions: Tuple[int, ...], values: tuple):
        if not positions:
            return self.rows.get(signature, ())
        if len(positions) == signature[1]:
            return (values,) if values in self.rows.get(signature, ()) else ()
        key = (signature, positions)
        index = self._indexes.get(key)
        if index is None:
            index = {}
            for row in self.rows.get(signature, ()):
                index.setdefault(tuple(row[p] for p in positions), []).append(row)
            self._indexes[key] = index
        return index.get(values, ())


def _probe(relations: _Relations, pattern: Atom, theta: Mapping[str, str]):
    positions, values = [], []
    for p, arg in enumerate(pattern.args):
        if isinstance(arg, Constant):
            positions.append(p)
            values.append(arg.name)
        elif arg.name in theta:
            positions.append(p)
            values.append(theta[arg.name])
    return relations.lookup(pattern.signature, tuple(positions), tuple(values))


def _unify_row(pattern: Atom, row: tuple, theta: Dict[str, str]) -> Optional[Dict[str, str]]:
    result = dict(theta)
    for arg, value in zip(pattern.args, row):
        if isinstance(arg, Constant):
            if arg.name != value:
                return None
        elif result.setdefault(arg.name, value) != value:
            return None
    return result


def _db_violations(relations: _Relations, ic: IntegrityConstraint) -> Iterator[Dict[str, str]]:
    positive = [l.belief for l in ic.positive]
    negative = [l.belief for l in ic.negative]

    def extend(k: int, theta: Dict[str, str]) -> Iterator[Dict[str, str]]:
        if k == len(positive):
            if not all(c.substitute(theta).evaluate() for c in ic.comparisons):
                return
            if any(_has_match(relations, pattern, theta) for pattern in negative):
                return
            yield theta
            return
        pattern = positive[k]
        for row in _probe(relations, pattern, theta):
            extended = _unify_row(pattern, row, theta)
            if extended is not None:
                yield from extend(k + 1, extended)

    yield from extend(0, {})


def _has_match(relations: _Relations, pattern: Atom, theta: Dict[str, str]) -> bool:
    return any(_unify_row(pattern, row, theta) is not None for row in _probe(relations, pattern, theta))


def db_fastpath_check(db: Iterable[Atom], ics: Iterable[IntegrityConstraint]) -> bool:
    """Denial constraints over a single closed-world database, by indexed joins."""
    return next(db_fastpath_violations(db, ics), None) is None


def db_fastpath_violations(db: Iterable[Atom], ics: Iterable[IntegrityConstraint]) -> Iterator[ICViolation]:
    ics = list(ics)
    for ic in ics:
        ic_safety(ic)
        for l in ic.literals():
            if l.context != 0:
                raise NotApplicableError("the database fast path only handles constraints over a single context")
            if not isinstance(l.belief, Atom):
                raise NotApplicableError(f"the database fast path only handles atoms, not {l.belief}")
    relations = _Relations(db)
    for index, ic in enumerate(ics):
        for theta in _db_violations(relations, ic):
            yield ICViolation(constraint=describe_constraint(ic, index), binding=theta)
