"""Managed systems, update actions and repairs.

A repair is a subset-minimal set of update actions after which the system
satisfies its constraints (weakly by default). Search is breadth-first over
action-set size, so every emitted set is minimal by construction.
"""

import time
from dataclasses import replace
from itertools import combinations, product
from typing import Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Sequence, Set, Tuple, Union

from app.errors import ActionError, NoRepairPossibleError
from app.models.kernel import (
    Atom,
    Constant,
    IntegrityConstraint,
    KBElement,
    Management,
    MultiContextSystem,
    Negated,
    OpHandler,
    Token,
    UpdateAction,
    element_constants,
)
from app.models.results import RepairReport, RepairResult, RepairStatus, SatisfactionMode
from app.services.config import get_settings
from app.services.constraints import satisfies
from app.services.logging import engine_logger
from app.services.validation import infer_signature

BUILTIN_OPS = frozenset({"add", "remove"})


def lift_to_managed(m: MultiContextSystem) -> MultiContextSystem:
    """Every context gains ``add`` and ``remove``; plain heads already mean ``add``."""
    return MultiContextSystem(tuple(replace(ctx, ops=ctx.ops | BUILTIN_OPS) for ctx in m))


def register_operation(
    m: MultiContextSystem, context: Union[int, str], op: str, handler: Optional[OpHandler] = None
) -> MultiContextSystem:
    """Register ``op`` on a context; ``replace`` needs a key, custom ops need a handler."""
    i = _index(m, context)
    ctx = m[i]
    management = ctx.management
    if op not in BUILTIN_OPS | {"replace"}:
        if handler is None:
            raise ActionError(f"operation {op!r} needs a handler")
        management = Management(keys=management.keys, handlers={**management.handlers, op: handler})
    return m.replace_context(i, replace(ctx, ops=ctx.ops | {op}, management=management))


def declare_key(
    m: MultiContextSystem, context: Union[int, str], signature: Tuple[str, int], positions: Sequence[int]
) -> MultiContextSystem:
    """Keyed management: adding a ``signature`` tuple evicts tuples with the same values at ``positions`` (0-based)."""
    i = _index(m, context)
    ctx = m[i]
    management = Management(keys={**ctx.management.keys, signature: tuple(positions)}, handlers=ctx.management.handlers)
    return m.replace_context(i, replace(ctx, management=management))


def _index(m: MultiContextSystem, context: Union[int, str]) -> int:
    return context if isinstance(context, int) else m.index_of(context)


def apply_updates(m: MultiContextSystem, updates: Iterable[UpdateAction]) -> MultiContextSystem:
    """Replace each kb_i by ``mng_i(U_i, kb_i)``; bridge rules are untouched."""
    grouped: Dict[int, List[UpdateAction]] = {}
    for action in updates:
        if not 0 <= action.context < len(m):
            raise ActionError(f"update targets unknown context index {action.context}")
        if action.op not in m[action.context].ops:
            raise ActionError(f"operation {action.op!r} is not registered on {m[action.context].name}")
        grouped.setdefault(action.context, []).append(action)
    result = m
    for i, actions in grouped.items():
        ctx = m[i]
        result = result.replace_context(i, ctx.with_kb(ctx.apply(a.head for a in actions)))
    return result


def consistent_wrt(m: MultiContextSystem, ics: Sequence[IntegrityConstraint], mode: Union[str, SatisfactionMode] = "weak") -> bool:
    return satisfies(m, ics, mode).holds


def is_weak_repair(
    m: MultiContextSystem,
    ics: Sequence[IntegrityConstraint],
    updates: Iterable[UpdateAction],
    mode: Union[str, SatisfactionMode] = "weak",
) -> bool:
    return consistent_wrt(apply_updates(m, updates), ics, mode)


def is_repair(
    m: MultiContextSystem,
    ics: Sequence[IntegrityConstraint],
    updates: Iterable[UpdateAction],
    mode: Union[str, SatisfactionMode] = "weak",
) -> bool:
    """A weak repair none of whose proper subsets is one."""
    updates = tuple(updates)
    if not is_weak_repair(m, ics, updates, mode):
        return False
    for size in range(len(updates)):
        for subset in combinations(updates, size):
            if is_weak_repair(m, ics, subset, mode):
                return False
    return True


def _active_domain(m: MultiContextSystem, ics: Sequence[IntegrityConstraint]) -> FrozenSet[str]:
    found: Set[str] = set()
    for ctx in m:
        for element in ctx.kb:
            found |= element_constants(element)
        for rule in ctx.bridge_rules:
            found |= element_constants(rule.head)
    for ic in ics:
        found |= ic.body_constants()
    return frozenset(found)


def _predicates(m: MultiContextSystem, ics: Sequence[IntegrityConstraint], i: int) -> Set[Tuple[str, int]]:
    signature = infer_signature(m, i)
    derived = {(r.head.atom if isinstance(r.head, Negated) else r.head).signature for r in m[i].logic.rules}
    predicates = set(signature.kb_predicates) | (set(signature.belief_predicates) - derived)
    for ic in ics:
        for l in ic.literals():
            if l.context == i:
                belief = l.belief.atom if isinstance(l.belief, Negated) else l.belief
                if isinstance(belief, Atom):
                    predicates.add(belief.signature)
    return predicates


def _ground_atoms(signature: Tuple[str, int], domain: Sequence[str]) -> Iterator[Atom]:
    name, arity = signature
    for values in product(domain, repeat=arity):
        yield Atom(name, tuple(Constant(v) for v in values))


def candidate_actions(
    m: MultiContextSystem,
    ics: Sequence[IntegrityConstraint],
    allowed_ops: Optional[Mapping[Union[int, str], Iterable[str]]] = None,
) -> List[UpdateAction]:
    """The finite action universe, in canonical order.

    ``add`` for absent and ``remove`` for present elements over each context's
    KB predicates and the active domain; other registered ops for every
    candidate element. ``allowed_ops`` keeps only the listed (context, op) pairs.
    """
    domain = sorted(_active_domain(m, ics))
    allowed: Optional[Dict[int, FrozenSet[str]]] = None
    if allowed_ops is not None:
        allowed = {_index(m, c): frozenset(ops) for c, ops in allowed_ops.items()}

    actions: List[UpdateAction] = []
    for i, ctx in enumerate(m):
        ops = ctx.ops if allowed is None else ctx.ops & allowed.get(i, frozenset())
        if not ops:
            continue
        elements: Set[KBElement] = set()
        for signature in _predicates(m, ics, i):
            elements.update(_ground_atoms(signature, domain))
        elements.update(e for e in ctx.kb if isinstance(e, Token))
        elements.update(r.head for r in ctx.bridge_rules if isinstance(r.head, Token))
        for element in elements:
            present = element in ctx.kb
            for op in ops:
                if op == "add" and present:
                    continue
                if op == "remove" and not present:
                    continue
                if op == "replace" and ctx.management.key_of(element) is None:
                    continue
                actions.append(UpdateAction(i, op, element))
    return sorted(actions, key=UpdateAction.sort_key)


def enumerate_repairs(
    m: MultiContextSystem,
    ics: Sequence[IntegrityConstraint],
    max_size: Optional[int] = None,
    allowed_ops: Optional[Mapping[Union[int, str], Iterable[str]]] = None,
    mode: Union[str, SatisfactionMode] = "weak",
) -> Iterator[RepairResult]:
    """Subset-minimal repairs of size <= ``max_size``, smallest first.

    A system already consistent with ``ics`` yields the single empty repair.
    Raises NoRepairPossibleError when the action universe is empty.
    """
    ics = list(ics)
    mode = SatisfactionMode(mode)
    weak = mode is SatisfactionMode.WEAK
    if max_size is None:
        max_size = get_settings().default_repair_size
    log = engine_logger.repair("enumerate", mode=mode.value, max_size=max_size)

    if consistent_wrt(m, ics, mode):
        log.info("already consistent")
        yield RepairResult(actions=(), weak=weak)
        return

    universe = candidate_actions(m, ics, allowed_ops)
    if not universe:
        raise NoRepairPossibleError("no update action is available for the selected operations")
    log.info("search started", candidates=len(universe))

    found: List[FrozenSet[UpdateAction]] = []
    for size in range(1, min(max_size, len(universe)) + 1):
        for combo in combinations(universe, size):
            chosen = frozenset(combo)
            if any(r <= chosen for r in found):
                continue
            if is_weak_repair(m, ics, combo, mode):
                found.append(chosen)
                yield RepairResult(actions=combo, weak=weak)


def search_repairs(
    m: MultiContextSystem,
    ics: Sequence[IntegrityConstraint],
    max_size: Optional[int] = None,
    allowed_ops: Optional[Mapping[Union[int, str], Iterable[str]]] = None,
    mode: Union[str, SatisfactionMode] = "weak",
) -> RepairReport:
    """Run ``enumerate_repairs`` to completion and classify the outcome."""
    ics = list(ics)
    mode = SatisfactionMode(mode)
    if max_size is None:
        max_size = get_settings().default_repair_size
    started = time.perf_counter()
    universe = candidate_actions(m, ics, allowed_ops)
    try:
        repairs = list(enumerate_repairs(m, ics, max_size, allowed_ops, mode))
    except NoRepairPossibleError:
        return RepairReport(status=RepairStatus.NO_CANDIDATES, mode=mode, max_size=max_size)

    if len(repairs) == 1 and not repairs[0].actions:
        status = RepairStatus.CONSISTENT
    elif repairs:
        status = RepairStatus.REPAIRED
    elif max_size >= len(universe):
        status = RepairStatus.UNREPAIRABLE
    else:
        status = RepairStatus.BUDGET_EXHAUSTED
    engine_logger.performance("search_repairs", time.perf_counter() - started, status=status.value, repairs=len(repairs)).info(
        "repair search finished"
    )
    return RepairReport(status=status, mode=mode, max_size=max_size, candidates=len(universe), repairs=repairs)
