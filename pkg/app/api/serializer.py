"""Canonical ``.mcs`` text and structured (JSON) output.

``serialize_document`` writes declarations in a fixed order so that equal
documents print identically; ``document_from_system`` goes the other way
for systems built in Python (or produced by the encoders).
"""

import re
from typing import Dict, Iterable, List, Mapping, Sequence, Union

from pydantic import BaseModel

from app.api.parser import (
    BodyItem,
    BodyLiteral,
    BridgeDecl,
    ContextDecl,
    Document,
    DomainDecl,
    ICDecl,
    ManageDecl,
)
from app.models.kernel import (
    Atom,
    BeliefSet,
    BeliefState,
    Comparison,
    Constant,
    IntegrityConstraint,
    MultiContextSystem,
    Negated,
    Rule,
    Term,
    Token,
    UpdateAction,
)
from app.models.results import (
    CheckOut,
    EquilibriaOut,
    EquilibriumOut,
    OracleOut,
    RepairOut,
    RepairReport,
    SatisfactionVerdict,
    ValidationOut,
    ValidationReport,
    ViolationOut,
)
from app.services.config import get_settings
from app.services.logics import FlagLogic, HerbrandModelLogic

_PLAIN_CONSTANT = re.compile(r"[a-z][A-Za-z0-9_]*|[0-9]+")


# -- terms, atoms, bodies ---------------------------------------------------------------


def format_constant(name: str) -> str:
    if _PLAIN_CONSTANT.fullmatch(name):
        return name
    escaped = name.replace("\\", "\\\\").replace('"', '\\"')
    return f'"{escaped}"'


def format_term(t: Term) -> str:
    if isinstance(t, Constant):
        return format_constant(t.name)
    return t.name


def format_atom(a: Atom) -> str:
    if not a.args:
        return a.predicate
    return f"{a.predicate}({', '.join(format_term(t) for t in a.args)})"


def format_belief(belief: Union[Atom, Token, Negated]) -> str:
    if isinstance(belief, Token):
        return f"#{belief.name}"
    if isinstance(belief, Negated):
        return f"-{format_atom(belief.atom)}"
    return format_atom(belief)


def format_body_item(item: BodyItem) -> str:
    if isinstance(item, Comparison):
        return f"{format_term(item.left)} {item.op} {format_term(item.right)}"
    prefix = "not " if item.negated else ""
    return f"{prefix}({item.context}:{format_belief(item.belief)})"


def format_rule(rule: Rule) -> str:
    parts = [format_belief(b) for b in rule.body] + [f"not {format_atom(b)}" for b in rule.negative_body]
    head = format_belief(rule.head)
    return f"{head} :- {', '.join(parts)}." if parts else f"{head}."


def format_action(action: UpdateAction, names: Sequence[str]) -> str:
    return f"({names[action.context]}:{action.op}({format_belief(action.element)}))"


# -- documents ------------------------------------------------------------------------


def _context_text(decl: ContextDecl) -> List[str]:
    lines = [f"context {decl.name} kind {decl.kind} {{"]
    if decl.universe:
        lines.append(f"  universe {', '.join(format_constant(c) for c in sorted(set(decl.universe)))}.")
    if decl.predicates:
        lines.append(f"  predicates {', '.join(f'{n}/{a}' for n, a in sorted(set(decl.predicates)))}.")
    for fact in sorted({format_belief(f) for f in decl.facts}):
        lines.append(f"  {fact}.")
    for rule in decl.rules:
        lines.append(f"  {format_rule(rule)}")
    lines.append("}")
    return lines


def _bridge_text(decl: BridgeDecl) -> str:
    head = format_belief(decl.head)
    if decl.op != "add":
        head = f"{decl.op}[{head}]"
    if not decl.body:
        return f"bridge {decl.target}: {head}."
    return f"bridge {decl.target}: {head} :- {', '.join(format_body_item(i) for i in decl.body)}."


def _ic_text(decl: ICDecl) -> str:
    label = f" {decl.label}" if decl.label else ""
    return f"ic{label} :- {', '.join(format_body_item(i) for i in decl.body)}."


def _manage_text(decl: ManageDecl) -> str:
    parts = []
    if decl.ops:
        parts.append(f"ops {', '.join(sorted(set(decl.ops)))};")
    for (name, arity), positions in sorted(decl.keys.items()):
        parts.append(f"key {name}/{arity} : {', '.join(str(p + 1) for p in positions)};")
    return f"manage {decl.context} {{ {' '.join(parts)} }}"


def _domain_text(decl: DomainDecl) -> str:
    return f"domain {decl.target} from {decl.source} : {', '.join(format_constant(c) for c in sorted(set(decl.constants)))}."


def _by_context_order(items: Iterable, key, order: Mapping[str, int]) -> List:
    return sorted(items, key=lambda item: order.get(key(item), len(order)))


def serialize_document(doc: Document) -> str:
    """Canonical text: contexts, bridge rules per target, constraints, management, domains."""
    if doc.is_empty():
        return ""
    order = {d.name: i for i, d in enumerate(doc.contexts)}
    sections: List[List[str]] = []
    for decl in doc.contexts:
        sections.append(_context_text(decl))
    bridges = [_bridge_text(b) for b in _by_context_order(doc.bridges, lambda b: b.target, order)]
    if bridges:
        sections.append(bridges)
    if doc.ics:
        sections.append([_ic_text(ic) for ic in doc.ics])
    manages = [_manage_text(m) for m in _by_context_order(doc.manages, lambda m: m.context, order)]
    if manages:
        sections.append(manages)
    domains = sorted(doc.domains, key=lambda d: (order.get(d.target, len(order)), order.get(d.source, len(order))))
    if domains:
        sections.append([_domain_text(d) for d in domains])
    return "\n\n".join("\n".join(lines) for lines in sections) + "\n"


def _body(names: Sequence[str], rule) -> List[BodyItem]:
    items: List[BodyItem] = [BodyLiteral(names[l.context], l.belief, l.negated) for l in rule.literals()]
    items.extend(rule.comparisons)
    return items


def document_from_system(m: MultiContextSystem, ics: Iterable[IntegrityConstraint] = ()) -> Document:
    names = m.names
    doc = Document()
    for ctx in m:
        logic = ctx.logic
        decl = ContextDecl(name=ctx.name, kind=logic.kind, facts=list(ctx.kb), rules=list(logic.rules))
        if isinstance(logic, HerbrandModelLogic):
            decl.universe = list(logic.universe)
            decl.predicates = list(logic.predicates)
        elif logic.signature is not None and not isinstance(logic, FlagLogic):
            decl.universe = sorted(logic.signature.universe)
            decl.predicates = sorted(logic.signature.predicates)
        doc.contexts.append(decl)

        for rule in ctx.bridge_rules:
            doc.bridges.append(BridgeDecl(target=ctx.name, head=rule.head, body=_body(names, rule), op=rule.op))
        if ctx.ops != {"add"} or ctx.management.keys:
            doc.manages.append(ManageDecl(context=ctx.name, ops=sorted(ctx.ops), keys=dict(ctx.management.keys)))
        for j, constants in sorted(ctx.import_domains.items()):
            doc.domains.append(DomainDecl(target=ctx.name, source=names[j], constants=sorted(constants)))

    for ic in ics:
        doc.ics.append(ICDecl(body=_body(names, ic), label=ic.label))
    return doc


def serialize_system(m: MultiContextSystem, ics: Iterable[IntegrityConstraint] = ()) -> str:
    return serialize_document(document_from_system(m, ics))


# -- structured output --------------------------------------------------------------------


def belief_strings(belief_set: BeliefSet) -> List[str]:
    return sorted(format_belief(b) for b in belief_set.positive) + sorted(
        f"-{format_atom(a)}" for a in belief_set.negative
    )


def equilibrium_out(state: BeliefState, m: MultiContextSystem) -> EquilibriumOut:
    return EquilibriumOut(contexts={name: belief_strings(s) for name, s in zip(m.names, state)})


def check_output(verdict: SatisfactionVerdict, m: MultiContextSystem) -> CheckOut:
    return CheckOut(
        schema_version=get_settings().output_schema_version,
        mode=verdict.mode,
        verdict=verdict.verdict,
        consistent=verdict.consistent,
        witness=equilibrium_out(verdict.witness, m) if verdict.witness is not None else None,
        violations=[ViolationOut(constraint=v.constraint, binding=v.binding) for v in verdict.violations],
    )


def equilibria_output(states: Sequence[BeliefState], m: MultiContextSystem) -> EquilibriaOut:
    return EquilibriaOut(
        schema_version=get_settings().output_schema_version,
        count=len(states),
        equilibria=[equilibrium_out(s, m) for s in states],
    )


def repair_output(report: RepairReport, m: MultiContextSystem) -> RepairOut:
    names = m.names
    return RepairOut(
        schema_version=get_settings().output_schema_version,
        status=report.status,
        mode=report.mode,
        repairs=[[format_action(a, names) for a in r.actions] for r in report.repairs],
    )


def validation_output(report: ValidationReport) -> ValidationOut:
    return ValidationOut(
        schema_version=get_settings().output_schema_version,
        valid=report.valid,
        violations=report.violations,
    )


def oracle_output(checks: Dict[str, bool]) -> OracleOut:
    return OracleOut(schema_version=get_settings().output_schema_version, checks=dict(sorted(checks.items())))


def render_json(model: BaseModel) -> str:
    return model.model_dump_json(indent=2)
