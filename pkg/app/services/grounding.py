"""Import domains and grounding of bridge rules and integrity constraints."""

from itertools import product
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

from app.errors import SafetyError
from app.models.kernel import (
    Atom,
    BridgeRule,
    IntegrityConstraint,
    MultiContextSystem,
    Negated,
    Token,
    element_constants,
)
from app.services.logging import engine_logger

Domains = Dict[Tuple[int, int], FrozenSet[str]]


def _kb_constants(m: MultiContextSystem, j: int) -> Set[str]:
    """Constants of kb_j, of its local rules and of its declared universe."""
    ctx = m[j]
    found: Set[str] = set()
    for element in ctx.kb:
        found |= element_constants(element)
    for rule in ctx.logic.rules:
        for literal in (rule.head,) + rule.body + rule.negative_body:
            found |= element_constants(literal)
    if ctx.logic.signature is not None:
        found |= ctx.logic.signature.universe
    return found


def exported_constants(m: MultiContextSystem) -> Dict[int, FrozenSet[str]]:
    """Constants each context exposes: its kb plus the heads its ground rules can derive.

    Head constants are collected to a fixpoint, so a recursive rule whose
    head only uses variables still exports what its instances derive.
    """
    exported: Dict[int, Set[str]] = {j: _kb_constants(m, j) for j in range(len(m))}
    for j, ctx in enumerate(m):
        for rule in ctx.bridge_rules:
            exported[j] |= element_constants(rule.head)

    changed = True
    while changed:
        changed = False
        frozen = {j: frozenset(c) for j, c in exported.items()}
        for j, ctx in enumerate(m):
            for rule in ctx.bridge_rules:
                if rule.is_ground():
                    continue
                domains = _context_view(m, j, frozen)
                for instance in ground_rule(rule, domains):
                    new = element_constants(instance.head) - exported[j]
                    if new:
                        exported[j] |= new
                        changed = True
    return {j: frozenset(c) for j, c in exported.items()}


def _context_view(m: MultiContextSystem, i: int, exported: Mapping[int, FrozenSet[str]]) -> Dict[int, FrozenSet[str]]:
    overrides = m[i].import_domains
    return {j: frozenset(overrides[j]) if j in overrides else exported[j] for j in range(len(m))}


def default_import_domains(m: MultiContextSystem) -> Domains:
    """``D[(i, j)]`` for every ordered pair; explicit per-context overrides win."""
    exported = exported_constants(m)
    domains: Domains = {}
    for i in range(len(m)):
        view = _context_view(m, i, exported)
        for j in range(len(m)):
            domains[(i, j)] = view[j]
    return domains


def _variable_domains(
    literals: Iterable,
    skip: FrozenSet[str],
    domain_of_context: Mapping[int, FrozenSet[str]],
    extra: FrozenSet[str] = frozenset(),
) -> Dict[str, FrozenSet[str]]:
    result: Dict[str, FrozenSet[str]] = {}
    for literal in literals:
        for v in literal.variables():
            if v in skip:
                continue
            dom = domain_of_context.get(literal.context, frozenset()) | extra
            result[v] = result[v] & dom if v in result else dom
    return result


def _substitutions(variables: Sequence[str], domains: Mapping[str, FrozenSet[str]]):
    ordered = [sorted(domains.get(v, frozenset())) for v in variables]
    for values in product(*ordered):
        yield dict(zip(variables, values))


def ground_rule(rule: BridgeRule, domains: Mapping[int, FrozenSet[str]]) -> List[BridgeRule]:
    """Instances of ``rule`` with each variable ranging over the intersection of
    the domains (by context index) of the literals that query it.

    Head-only variables have no domain, so such rules yield nothing.
    """
    if rule.is_ground():
        return [rule] if all(c.evaluate() for c in rule.comparisons) else []
    var_domains = _variable_domains(rule.literals(), frozenset(), domains)
    variables = list(rule.variables())
    if any(v not in var_domains for v in variables):
        return []

    seen: Dict[BridgeRule, None] = {}
    for theta in _substitutions(variables, var_domains):
        instance = rule.substitute(theta)
        if not all(c.evaluate() for c in instance.comparisons):
            continue
        seen.setdefault(BridgeRule(instance.context, instance.head, instance.positive, instance.negative, (), instance.op))
    return list(seen)


def ground_bridge_rules(m: MultiContextSystem, domains: Optional[Domains] = None) -> Tuple[Tuple[BridgeRule, ...], ...]:
    """Ground instances per context, duplicates collapsed, in first-seen order."""
    log = engine_logger.grounding("ground_bridge_rules", contexts=len(m))
    if domains is None:
        domains = default_import_domains(m)
    result = []
    for i, ctx in enumerate(m):
        view = {j: domains.get((i, j), frozenset()) for j in range(len(m))}
        instances: Dict[BridgeRule, None] = {}
        for rule in ctx.bridge_rules:
            for instance in ground_rule(rule, view):
                instances.setdefault(instance)
        result.append(tuple(instances))
    log.debug("grounded", instances=sum(len(r) for r in result))
    return tuple(result)


def ic_safety(ic: IntegrityConstraint) -> FrozenSet[str]:
    """Existential variables of ``ic``; raises SafetyError for other unsafe ones."""
    bound = ic.positive_variables()
    comparison_vars = {v for c in ic.comparisons for v in c.variables()}
    loose = comparison_vars - bound
    if loose:
        raise SafetyError(f"comparison variables {sorted(loose)} do not occur in a positive literal")
    existential = ic.existential_variables()
    unsafe = {v for l in ic.negative for v in l.variables() if v not in bound and v not in existential}
    if unsafe:
        raise SafetyError(f"variables {sorted(unsafe)} occur only under negation and more than once")
    for l in ic.negative:
        if isinstance(l.belief, Negated) and set(l.variables()) & existential:
            raise SafetyError(f"existential variables cannot appear inside a negative belief: {l.belief}")
    for l in ic.literals():
        if isinstance(l.belief, Token):
            raise SafetyError(f"integrity constraints only query relational elements, not {l.belief}")
    return existential


def ic_variable_domains(
    ic: IntegrityConstraint, exported: Mapping[int, FrozenSet[str]]
) -> Dict[str, FrozenSet[str]]:
    """Per-variable domain for an IC: exported constants of the contexts that bind it
    positively, plus the IC's own constants.

    Negated literals never narrow a domain; a tuple missing from the queried
    context is exactly what they detect.
    """
    existential = ic.existential_variables()
    return _variable_domains(ic.positive, existential, exported, ic.body_constants())


def ground_ics(
    m: MultiContextSystem,
    ics: Iterable[IntegrityConstraint],
    exported: Optional[Mapping[int, FrozenSet[str]]] = None,
) -> List[IntegrityConstraint]:
    """Ground every IC in its bound variables; existential ones stay symbolic."""
    if exported is None:
        exported = exported_constants(m)
    result: Dict[IntegrityConstraint, None] = {}
    for ic in ics:
        existential = ic_safety(ic)
        domains = ic_variable_domains(ic, exported)
        variables = [v for v in ic.variables() if v not in existential]
        for theta in _substitutions(variables, domains):
            instance = ic.substitute(theta)
            if all(c.evaluate() for c in instance.comparisons):
                result.setdefault(IntegrityConstraint(instance.positive, instance.negative, (), ic.label))
    return list(result)
