"""Brute-force reference implementations used to cross-check the engine."""

from itertools import chain, combinations, product
from typing import Dict, FrozenSet, Iterable, List, Sequence, Set

from app.models.kernel import (
    Atom,
    BeliefSet,
    BeliefState,
    Constant,
    IntegrityConstraint,
    MultiContextSystem,
    Rule,
)
from app.services import datalog
from app.services.cache import cached_acc
from app.services.constraints import (
    db_fastpath_check,
    encode_strong,
    encode_weak,
    ic_violations,
    strong_satisfies,
    weak_satisfies,
)
from app.services.encoders import Peer, ctx_of_db, is_weak_model, minimal_model
from app.services.equilibria import enumerate_equilibria, ground_system, is_consistent, is_equilibrium
from app.services.grounding import ground_ics
from app.services.logging import engine_logger
from app.services.repair import candidate_actions, is_repair


def _subsets(items: Sequence) -> Iterable[tuple]:
    return chain.from_iterable(combinations(items, r) for r in range(len(items) + 1))


def brute_force_equilibria(m: MultiContextSystem) -> Set[BeliefState]:
    """Every belief-state tuple built from acceptable sets of any head subset, filtered by ``is_equilibrium``."""
    ground = ground_system(m)
    per_context: List[List[BeliefSet]] = []
    for i, ctx in enumerate(m):
        heads = sorted({r.managed_head for r in ground.rules[i]}, key=str)
        options: Dict[BeliefSet, None] = {}
        for subset in _subsets(heads):
            for bs in cached_acc(ctx.logic, ctx.apply(subset)):
                options.setdefault(bs)
        per_context.append(list(options))
    return {
        BeliefState(tuple(combo))
        for combo in product(*per_context)
        if is_equilibrium(m, BeliefState(tuple(combo)), ground)
    }


def brute_force_minimal_model(facts: Iterable[Atom], rules: Sequence[Rule]) -> FrozenSet[Atom]:
    """Smallest subset of the Herbrand base that contains the facts and is closed under the rules."""
    facts = frozenset(facts)
    constants = sorted({c for f in facts for c in f.constants()} | {c for r in rules for a in (r.head,) + r.body for c in a.constants()})
    predicates = sorted({f.signature for f in facts} | {a.signature for r in rules for a in (r.head,) + r.body})
    base = [
        Atom(name, tuple(Constant(v) for v in values))
        for name, arity in predicates
        for values in product(constants, repeat=arity)
    ]
    free = [a for a in base if a not in facts]
    for extra in _subsets(free):
        candidate = facts | frozenset(extra)
        if datalog.immediate_consequence(candidate, rules) <= candidate:
            return candidate
    raise AssertionError("the full Herbrand base is always a model")


def naive_saturation(kb: Iterable, axioms: Sequence[Rule]) -> FrozenSet:
    current = frozenset(kb)
    while True:
        following = datalog.immediate_consequence(current, axioms)
        if following == current:
            return current
        current = following


def ground_and_check(db: Iterable[Atom], ics: Sequence[IntegrityConstraint]) -> bool:
    """Ground every constraint over the database constants and test each instance."""
    db = frozenset(db)
    m = ctx_of_db(db)
    state = BeliefState((BeliefSet(db),))
    for ground in ground_ics(m, ics):
        for _ in ic_violations(state, ground):
            return False
    return True


def exhaustive_repairs(
    m: MultiContextSystem,
    ics: Sequence[IntegrityConstraint],
    max_size: int,
    mode: str = "weak",
    allowed_ops=None,
) -> List[FrozenSet]:
    universe = candidate_actions(m, ics, allowed_ops)
    return [
        frozenset(subset)
        for size in range(1, max_size + 1)
        for subset in combinations(universe, size)
        if is_repair(m, ics, subset, mode)
    ]


def brute_force_weak_models(peers: Sequence[Peer]) -> Set[FrozenSet[Atom]]:
    """Weak models among all subsets of the least model of the whole system."""
    facts = [f for p in peers for f in p.facts]
    rules = [r for p in peers for r in p.rules] + [mr.as_rule() for p in peers for mr in p.mappings]
    everything = sorted(minimal_model(facts, rules), key=str)
    return {frozenset(s) for s in _subsets(everything) if is_weak_model(peers, s)}


def run_oracles(m: MultiContextSystem, ics: Sequence[IntegrityConstraint]) -> Dict[str, bool]:
    """Cross-check the search against brute force on one (small) system."""
    ics = list(ics)
    log = engine_logger.search("oracle", contexts=len(m), constraints=len(ics))
    checks: Dict[str, bool] = {}

    searched = set(enumerate_equilibria(m, fast_path=False))
    checks["equilibria-match-brute-force"] = searched == brute_force_equilibria(m)

    weak = weak_satisfies(m, ics, fast_path=False)
    strong = strong_satisfies(m, ics, fast_path=False)
    checks["strong-implies-weak"] = not strong.holds or weak.holds
    checks["weak-encoding"] = is_consistent(encode_weak(m, ics), fast_path=False).consistent == weak.holds
    if weak.consistent:
        checks["strong-encoding"] = strong.holds != is_consistent(encode_strong(m, ics), fast_path=False).consistent

    if len(m) == 1 and m[0].logic.kind == "db" and not m[0].bridge_rules:
        db = [e for e in m[0].kb if isinstance(e, Atom)]
        direct = ground_and_check(db, ics)
        checks["database-fast-path"] = db_fastpath_check(db, ics) == direct == weak.holds == strong.holds

    log.info("oracle finished", failed=sorted(k for k, ok in checks.items() if not ok))
    return checks
