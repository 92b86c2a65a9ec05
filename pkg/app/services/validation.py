"""Structural well-formedness checks for multi-context systems."""

from typing import Dict, Iterable, List, Optional, Set, Tuple

from app.models.kernel import (
    Atom,
    BridgeRule,
    Context,
    IntegrityConstraint,
    MultiContextSystem,
    Negated,
    Signature,
    Token,
)
from app.models.results import ValidationReport, Violation, ViolationKind


def check_safety(rule: BridgeRule) -> bool:
    """Every variable of a negated literal occurs in a positive one."""
    bound = rule.positive_variables()
    return all(v in bound for l in rule.negative for v in l.variables())


def _atom_of(belief) -> Optional[Atom]:
    if isinstance(belief, Atom):
        return belief
    if isinstance(belief, Negated):
        return belief.atom
    return None


def infer_signature(m: MultiContextSystem, j: int) -> Signature:
    """Declared signature of context ``j`` or one read off its kb, rules and queries."""
    ctx = m[j]
    declared = ctx.logic.signature
    kb_preds: Set[Tuple[str, int]] = set()
    belief_preds: Set[Tuple[str, int]] = set()
    universe: Set[str] = set()
    for element in ctx.kb:
        if isinstance(element, Atom):
            kb_preds.add(element.signature)
            universe |= element.constants()
    for rule in ctx.bridge_rules:
        if isinstance(rule.head, Atom):
            kb_preds.add(rule.head.signature)
            universe |= rule.head.constants()
    for rule in ctx.logic.rules:
        belief_preds.add(_atom_of(rule.head).signature)
    for other in m:
        for rule in other.bridge_rules:
            for l in rule.literals():
                a = _atom_of(l.belief)
                if l.context == j and a is not None:
                    belief_preds.add(a.signature)
    if declared is not None:
        kb_preds |= declared.kb_predicates
        belief_preds |= declared.belief_predicates
        universe |= declared.universe
    return Signature(frozenset(kb_preds), frozenset(belief_preds - kb_preds), frozenset(universe))


def _arity_table(m: MultiContextSystem) -> Dict[int, Dict[str, Set[int]]]:
    table: Dict[int, Dict[str, Set[int]]] = {j: {} for j in range(len(m))}
    for j, ctx in enumerate(m):
        heads = [r.head for r in ctx.bridge_rules]
        for element in list(ctx.kb) + heads:
            if isinstance(element, Atom):
                table[j].setdefault(element.predicate, set()).add(element.arity)
        for rule in ctx.logic.rules:
            for a in (rule.head,) + rule.body:
                a = _atom_of(a)
                table[j].setdefault(a.predicate, set()).add(a.arity)
        if ctx.logic.signature is not None:
            for name, arity in ctx.logic.signature.predicates:
                table[j].setdefault(name, set()).add(arity)
    return table


class _Checker:
    def __init__(self, m: MultiContextSystem, ics: Iterable[IntegrityConstraint]):
        self.m = m
        self.ics = list(ics)
        self.violations: List[Violation] = []
        self.arities = _arity_table(m)

    def add(self, kind: ViolationKind, message: str, context: Optional[str] = None, rule: Optional[str] = None):
        self.violations.append(Violation(kind=kind, message=message, context=context, rule=rule))

    def literal_checks(self, literals, owner: str, rendered: str, allow_tokens: bool = True):
        for l in literals:
            if not 0 <= l.context < len(self.m):
                self.add(ViolationKind.DANGLING_CONTEXT, f"literal refers to context index {l.context}", owner, rendered)
                continue
            if isinstance(l.belief, Token):
                if not allow_tokens:
                    self.add(ViolationKind.ORDINARY_IN_CONSTRAINT, f"{l.belief} is not a relational element", owner, rendered)
                continue
            a = _atom_of(l.belief)
            declared = self.arities[l.context].get(a.predicate)
            if declared and a.arity not in declared:
                self.add(
                    ViolationKind.ARITY,
                    f"{a.predicate}/{a.arity} does not match declared arity {sorted(declared)} in {self.m[l.context].name}",
                    owner,
                    rendered,
                )

    def rule_checks(self, ctx: Context, index: int, rule: BridgeRule):
        rendered = f"{ctx.name}: {rule.managed_head} <- ..."
        if rule.context != index:
            self.add(ViolationKind.DANGLING_CONTEXT, f"rule stored in {ctx.name} targets index {rule.context}", ctx.name, rendered)
        if rule.op not in ctx.ops:
            self.add(ViolationKind.UNKNOWN_OPERATION, f"operation {rule.op!r} is not registered", ctx.name, rendered)
        self.literal_checks(rule.literals(), ctx.name, rendered)
        if not check_safety(rule):
            self.add(ViolationKind.UNSAFE_RULE, "negated literal uses variables bound by no positive literal", ctx.name, rendered)
        if isinstance(rule.head, Atom):
            body = {v for l in rule.literals() for v in l.variables()}
            loose = [v for v in rule.head.variables() if v not in body]
            if loose:
                self.add(ViolationKind.UNBOUND_HEAD, f"head variables {loose} occur in no body literal", ctx.name, rendered)

    def run(self) -> ValidationReport:
        for j, ctx in enumerate(self.m):
            signature = infer_signature(self.m, j)
            overlap = sorted(signature.overlap())
            if overlap:
                self.add(ViolationKind.SIGNATURE_OVERLAP, f"symbols used as constant and predicate: {overlap}", ctx.name)
            for source, domain in ctx.import_domains.items():
                if not 0 <= source < len(self.m):
                    self.add(ViolationKind.IMPORT_DOMAIN, f"import domain for unknown context index {source}", ctx.name)
                    continue
                outside = sorted(set(domain) - infer_signature(self.m, source).universe)
                if outside:
                    self.add(
                        ViolationKind.IMPORT_DOMAIN,
                        f"import domain from {self.m[source].name} has constants outside its universe: {outside}",
                        ctx.name,
                    )
            for rule in ctx.bridge_rules:
                self.rule_checks(ctx, j, rule)
        for ic in self.ics:
            rendered = ic.label or "integrity constraint"
            self.literal_checks(ic.literals(), None, rendered, allow_tokens=False)
            bound = ic.positive_variables() | ic.existential_variables()
            if any(v not in bound for l in ic.negative for v in l.variables()):
                self.add(ViolationKind.UNSAFE_RULE, "negated literal uses a variable more than once without binding it", None, rendered)
        return ValidationReport(violations=self.violations)


def validate_mcs(m: MultiContextSystem, ics: Iterable[IntegrityConstraint] = ()) -> ValidationReport:
    """Every structural problem of ``m`` (and optionally its ICs) as report entries."""
    return _Checker(m, ics).run()
