"""Equilibrium semantics: applicability, equilibrium checks, enumeration, consistency.

Search runs over the strongly connected components of the context dependency
graph, dependencies first. Inside a component the free choice is which ground
heads are applicable; every selection is checked against ``app_i`` of the
belief sets its managed knowledge bases accept. Components of singleton,
monotone logics with positive internal rules and plain ``add`` heads are solved
by least fixpoint instead, provided that under the beliefs already fixed no belief
of the component can support itself; otherwise they are guessed as well.
"""

import time
from dataclasses import dataclass
from itertools import combinations, product
from typing import FrozenSet, Iterator, List, Optional, Sequence, Tuple

import networkx as nx

from app.errors import CapabilityError, EnumerationLimitError
from app.models.kernel import (
    BeliefSet,
    BeliefState,
    BridgeRule,
    ContextLiteral,
    KBElement,
    ManagedHead,
    MultiContextSystem,
)
from app.models.results import ConsistencyResult
from app.services.cache import cached_acc
from app.services.config import get_settings
from app.services.grounding import Domains, ground_bridge_rules
from app.services.logging import engine_logger


@dataclass(frozen=True)
class GroundSystem:
    mcs: MultiContextSystem
    rules: Tuple[Tuple[BridgeRule, ...], ...]

    @property
    def heads(self) -> Tuple[Tuple[ManagedHead, ...], ...]:
        return tuple(
            tuple(sorted({r.managed_head for r in rules}, key=str)) for rules in self.rules
        )


def ground_system(m: MultiContextSystem, domains: Optional[Domains] = None) -> GroundSystem:
    return GroundSystem(m, ground_bridge_rules(m, domains))


def literal_holds(literal: ContextLiteral, state: BeliefState) -> bool:
    return state[literal.context].holds(literal.belief)


def rule_applicable(rule: BridgeRule, state: BeliefState) -> bool:
    return all(literal_holds(l, state) for l in rule.positive) and not any(
        literal_holds(l, state) for l in rule.negative
    )


def applicable_actions(rules: Sequence[BridgeRule], state: BeliefState) -> FrozenSet[ManagedHead]:
    return frozenset(r.managed_head for r in rules if rule_applicable(r, state))


def applicable_heads(
    m: MultiContextSystem, s: BeliefState, i: int, ground: Optional[GroundSystem] = None
) -> FrozenSet[KBElement]:
    """``app_i(S)``: heads of the applicable ground rules of context ``i``."""
    ground = ground or ground_system(m)
    return frozenset(a.element for a in applicable_actions(ground.rules[i], s))


def is_equilibrium(m: MultiContextSystem, s: BeliefState, ground: Optional[GroundSystem] = None) -> bool:
    if len(s) != len(m):
        return False
    ground = ground or ground_system(m)
    for i, ctx in enumerate(m):
        kb = ctx.apply(applicable_actions(ground.rules[i], s))
        if s[i] not in cached_acc(ctx.logic, kb):
            return False
    return True


def dependency_graph(m: MultiContextSystem, ground: GroundSystem) -> nx.DiGraph:
    """Edge ``j -> i`` when a ground bridge rule of context ``i`` queries context ``j``."""
    graph = nx.DiGraph()
    graph.add_nodes_from(range(len(m)))
    graph.add_edges_from((l.context, i) for i in range(len(m)) for r in ground.rules[i] for l in r.literals())
    return graph


def _dependency_components(m: MultiContextSystem, ground: GroundSystem) -> List[Tuple[int, ...]]:
    """Strongly connected components, each listed after the components it queries."""
    dag = nx.condensation(dependency_graph(m, ground))
    members = nx.get_node_attributes(dag, "members")
    order = nx.lexicographical_topological_sort(dag, key=lambda c: min(members[c]))
    return [tuple(sorted(members[c])) for c in order]


def _solvable_by_fixpoint(m: MultiContextSystem, ground: GroundSystem, component: Tuple[int, ...]) -> bool:
    members = set(component)
    for i in component:
        ctx = m[i]
        if not (ctx.logic.singleton and ctx.logic.monotone):
            return False
        for rule in ground.rules[i]:
            if rule.op != "add" or ctx.management.key_of(rule.head) is not None:
                return False
            if any(l.context in members for l in rule.negative):
                return False
    return True


def _passes_kb_through(logic) -> bool:
    return not getattr(logic, "rules", ())


def _support_is_acyclic(
    m: MultiContextSystem, ground: GroundSystem, component: Tuple[int, ...], state: BeliefState
) -> bool:
    """Whether no belief of ``component`` can support itself through rules still live under ``state``.

    Beliefs of a context whose logic accepts exactly its knowledge base are tracked one by
    one; any other context is a single node. Without a cycle the least fixpoint is the only
    solution of the component.
    """
    members = set(component)

    def node(i: int, element) -> tuple:
        return (i, element) if _passes_kb_through(m[i].logic) else (i,)

    support = nx.DiGraph()
    for i in component:
        for rule in ground.rules[i]:
            inside = [l for l in rule.positive if l.context in members]
            outside = [l for l in rule.positive if l.context not in members]
            if not all(literal_holds(l, state) for l in outside):
                continue
            if any(literal_holds(l, state) for l in rule.negative):
                continue
            head = node(i, rule.head)
            support.add_node(head)
            support.add_edges_from((head, node(l.context, l.belief)) for l in inside)
    return nx.is_directed_acyclic_graph(support)


def _ordered_subsets(heads: Sequence[ManagedHead]) -> Iterator[FrozenSet[ManagedHead]]:
    for size in range(len(heads) + 1):
        for chosen in combinations(heads, size):
            yield frozenset(chosen)


_EMPTY = BeliefSet()


class _Search:
    def __init__(self, m: MultiContextSystem, ground: GroundSystem, fast_path: bool, budget: Optional[int] = None):
        self.m = m
        self.ground = ground
        self.components = _dependency_components(m, ground)
        self.fast = [fast_path and _solvable_by_fixpoint(m, ground, c) for c in self.components]
        self.heads = ground.heads
        self.budget = budget

    def guessed_heads(self) -> int:
        return sum(len(self.heads[i]) for c, fast in zip(self.components, self.fast) if not fast for i in c)

    def _fall_back(self, component: Tuple[int, ...]) -> None:
        if self.budget is None:
            return
        guessed = self.guessed_heads() + sum(len(self.heads[i]) for i in component)
        if guessed > self.budget:
            raise EnumerationLimitError(guessed, self.budget)

    def _state(self, partial: List[Optional[BeliefSet]]) -> BeliefState:
        return BeliefState(tuple(b if b is not None else _EMPTY for b in partial))

    def _least(self, component: Tuple[int, ...], partial: List[Optional[BeliefSet]]) -> bool:
        selection = {i: frozenset() for i in component}
        while True:
            for i in component:
                candidates = cached_acc(self.m[i].logic, self.m[i].apply(selection[i]))
                if not candidates:
                    return False
                partial[i] = candidates[0]
            state = self._state(partial)
            updated = {i: applicable_actions(self.ground.rules[i], state) for i in component}
            if updated == selection:
                return True
            selection = updated

    def _guess(self, component: Tuple[int, ...], partial: List[Optional[BeliefSet]]) -> Iterator[None]:
        per_context = [list(_ordered_subsets(self.heads[i])) for i in component]
        for selections in product(*per_context):
            candidates = [
                cached_acc(self.m[i].logic, self.m[i].apply(sel)) for i, sel in zip(component, selections)
            ]
            for combo in product(*candidates):
                for i, belief_set in zip(component, combo):
                    partial[i] = belief_set
                state = self._state(partial)
                if all(
                    applicable_actions(self.ground.rules[i], state) == sel
                    for i, sel in zip(component, selections)
                ):
                    yield None
            for i in component:
                partial[i] = None

    def _solutions(self, k: int, partial: List[Optional[BeliefSet]]) -> Iterator[None]:
        """Fill ``partial`` with each solution of component ``k`` in turn."""
        component = self.components[k]
        if self.fast[k] and _support_is_acyclic(self.m, self.ground, component, self._state(partial)):
            if self._least(component, partial):
                yield None
            for i in component:
                partial[i] = None
            return
        if self.fast[k]:
            self._fall_back(component)
        yield from self._guess(component, partial)

    def solve(self) -> Iterator[BeliefState]:
        partial: List[Optional[BeliefSet]] = [None] * len(self.m)
        if not self.components:
            yield BeliefState(())
            return
        levels = [self._solutions(0, partial)]
        while levels:
            if next(levels[-1], StopIteration) is StopIteration:
                levels.pop()
            elif len(levels) == len(self.components):
                yield BeliefState(tuple(partial))
            else:
                levels.append(self._solutions(len(levels), partial))


def enumerate_equilibria(
    m: MultiContextSystem,
    limit: Optional[int] = None,
    *,
    fast_path: Optional[bool] = None,
    ground: Optional[GroundSystem] = None,
) -> Iterator[BeliefState]:
    """Yield every equilibrium of ``m`` once, up to ``limit``."""
    settings = get_settings()
    if fast_path is None:
        fast_path = settings.fast_path
    for ctx in m:
        if not ctx.logic.enumerable:
            raise CapabilityError(f"logic of context {ctx.name} ({ctx.logic.kind}) cannot be enumerated")

    ground = ground or ground_system(m)
    budget = settings.max_unbounded_heads if limit is None else None
    search = _Search(m, ground, fast_path, budget)
    guessed = search.guessed_heads()
    if budget is not None and guessed > budget:
        raise EnumerationLimitError(guessed, budget)

    log = engine_logger.search("enumerate", contexts=len(m), components=len(search.components), guessed_heads=guessed)
    log.debug("search started")
    started = time.perf_counter()
    count = 0
    if limit is not None and limit <= 0:
        return
    for state in search.solve():
        count += 1
        yield state
        if limit is not None and count >= limit:
            break
    engine_logger.performance("enumerate_equilibria", time.perf_counter() - started, equilibria=count).debug("search finished")


def is_consistent(m: MultiContextSystem, *, fast_path: Optional[bool] = None) -> ConsistencyResult:
    """Whether ``m`` has an equilibrium; the first one found is the witness."""
    for state in enumerate_equilibria(m, limit=1, fast_path=fast_path):
        return ConsistencyResult(consistent=True, witness=state)
    return ConsistencyResult(consistent=False)
