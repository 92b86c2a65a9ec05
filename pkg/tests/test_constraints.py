import pytest

from app.errors import NotApplicableError
from app.models.kernel import (
    BeliefSet,
    Context,
    MultiContextSystem,
    Negated,
    atom,
    belief_state,
    constraint,
    ground_atom,
    lit,
)
from app.models.results import SatisfactionMode, Verdict
from app.services.constraints import (
    FLAG_CONTEXT_NAME,
    PROJECTION_CONTEXT_NAME,
    db_fastpath_check,
    db_fastpath_violations,
    encode_strong,
    encode_weak,
    ic_satisfied,
    ic_violations,
    satisfies,
    strong_satisfies,
    weak_satisfies,
)
from app.services.equilibria import is_consistent
from app.services.logics import FLAG_TOKEN, FlagLogic, RelationalDBLogic
from app.services.validation import check_safety
from builders import CLOSED, closure_equilibrium, closure_system, odd_loop_system

R = lambda x, y: ground_atom("R", x, y)  # noqa: E731
Rt = lambda x, y: ground_atom("Rt", x, y)  # noqa: E731


class TestSingleState:
    def test_violating_binding(self):
        check = ic_satisfied(closure_equilibrium(), CLOSED)
        assert not check.satisfied and not check
        assert check.binding == {"X": "a", "Y": "c"}

    def test_closed_relation_satisfies(self):
        closed = belief_state({R("a", "b"), R("b", "c"), R("a", "c")}, {Rt("a", "b"), Rt("b", "c"), Rt("a", "c")})
        assert ic_satisfied(closed, CLOSED).satisfied

    def test_context_domains_are_accepted(self):
        check = ic_satisfied(closure_equilibrium(), CLOSED, {0: frozenset("abc"), 1: frozenset("abc")})
        assert check.binding == {"X": "a", "Y": "c"}

    def test_closed_world_negative_belief_needs_domains(self):
        state = belief_state({ground_atom("q", "a"), ground_atom("q", "b"), ground_atom("p", "a")})
        ic = constraint(lit(0, atom("q", "X")), lit(0, Negated(atom("p", "X"))))
        assert list(ic_violations(state, ic, {"X": frozenset({"a", "b"})})) == [{"X": "b"}]

    def test_unbound_negative_belief_without_domains(self):
        state = belief_state({ground_atom("p", "a")})
        ic = constraint(lit(0, Negated(atom("p", "X"))))
        with pytest.raises(NotApplicableError):
            list(ic_violations(state, ic))

    def test_existential_negation(self):
        state = belief_state({ground_atom("person", "alice"), ground_atom("person", "bob"), ground_atom("hasCPR", "alice", "1")})
        ic = constraint(lit(0, atom("person", "X")), lit(0, atom("hasCPR", "X", "Y"), negated=True))
        assert list(ic_violations(state, ic)) == [{"X": "bob"}]


class TestWeakAndStrong:
    def test_transitive_closure_fails_both(self):
        m = closure_system()
        weak = weak_satisfies(m, [CLOSED])
        strong = strong_satisfies(m, [CLOSED])
        assert weak.verdict == Verdict.FAILS and weak.consistent
        assert strong.verdict == Verdict.FAILS and strong.witness == closure_equilibrium()
        assert strong.violations[0].constraint == "closed"
        assert strong.violations[0].binding == {"X": "a", "Y": "c"}

    def test_closed_input_satisfies_both(self):
        m = closure_system(pairs=(("a", "b"), ("b", "c"), ("a", "c")))
        assert weak_satisfies(m, [CLOSED]).holds
        assert strong_satisfies(m, [CLOSED]).holds

    def test_models_context_separates_the_modes(self, load):
        m, ics = load("closure_models")
        strong = strong_satisfies(m, ics)
        assert not strong.holds
        assert strong.witness[0].positive == {R("a", "b"), R("b", "c")}
        assert strong.violations[0].binding == {"X": "a", "Y": "c"}

        weak = weak_satisfies(m, ics)
        assert weak.holds
        assert weak.witness[0].positive == {R("a", "b"), R("a", "c"), R("b", "c")}
        assert weak.equilibria_checked == 3

    def test_inconsistent_system(self):
        m = odd_loop_system()
        strong = strong_satisfies(m, [])
        weak = weak_satisfies(m, [])
        assert not strong.holds and not strong.consistent and strong.witness is None
        assert not weak.holds and not weak.consistent

    def test_empty_constraint_set(self):
        assert weak_satisfies(closure_system(), []).holds
        assert strong_satisfies(closure_system(), []).holds

    def test_mode_dispatch(self):
        assert satisfies(closure_system(), [CLOSED], "weak").mode is SatisfactionMode.WEAK
        assert satisfies(closure_system(), [CLOSED], SatisfactionMode.STRONG).mode is SatisfactionMode.STRONG

    @pytest.mark.parametrize(
        "fixture, holds",
        [("isa_sub", True), ("isa_cycle", False), ("closure", True), ("transitive_closure", False)],
    )
    def test_fixtures(self, load, fixture, holds):
        m, ics = load(fixture)
        assert weak_satisfies(m, ics).holds is holds


class TestEncodings:
    def test_weak_encoding_shape(self):
        encoded = encode_weak(closure_system(), [CLOSED])
        assert len(encoded) == 3
        flag = encoded[2]
        assert flag.name == FLAG_CONTEXT_NAME
        assert isinstance(flag.logic, FlagLogic) and flag.logic.variant == "weak"
        (rule,) = flag.bridge_rules
        assert rule.head == FLAG_TOKEN
        assert rule.positive == CLOSED.positive and rule.negative == CLOSED.negative

    def test_weak_encoding_tracks_weak_satisfaction(self, load):
        m, ics = load("closure_models")
        assert is_consistent(encode_weak(m, ics)).consistent
        assert not is_consistent(encode_weak(closure_system(), [CLOSED])).consistent

    def test_strong_encoding_tracks_strong_satisfaction(self, load):
        m, ics = load("closure_models")
        assert is_consistent(encode_strong(m, ics)).consistent
        closed = closure_system(pairs=(("a", "b"), ("b", "c"), ("a", "c")))
        assert not is_consistent(encode_strong(closed, [CLOSED])).consistent

    def test_flag_context_witness(self, load):
        m, ics = load("closure_models")
        witness = is_consistent(encode_strong(m, ics)).witness
        assert witness[2] == BeliefSet({FLAG_TOKEN})

    @pytest.mark.parametrize("cpr_of_bob, holds", [(False, False), (True, True)])
    def test_existential_constraint_is_projected(self, cpr_of_bob, holds):
        kb = {ground_atom("person", "alice"), ground_atom("person", "bob"), ground_atom("hasCPR", "alice", "1")}
        if cpr_of_bob:
            kb.add(ground_atom("hasCPR", "bob", "2"))
        m = MultiContextSystem((Context("O", RelationalDBLogic(), frozenset(kb)),))
        ic = constraint(lit(0, atom("person", "X")), lit(0, atom("hasCPR", "X", "Y"), negated=True))
        encoded = encode_weak(m, [ic])
        assert [c.name for c in encoded] == ["O", PROJECTION_CONTEXT_NAME, FLAG_CONTEXT_NAME]
        assert all(check_safety(r) for c in encoded for r in c.bridge_rules)
        assert weak_satisfies(m, [ic]).holds is holds
        assert is_consistent(encode_weak(m, [ic])).consistent is holds
        assert is_consistent(encode_strong(m, [ic])).consistent is not holds


class TestDatabaseFastPath:
    EMP = constraint(lit(0, atom("emp", "X", "D")), lit(0, atom("dept", "D"), negated=True), label="fk")

    def test_foreign_key(self):
        db = [ground_atom("emp", "ann", "sales"), ground_atom("dept", "sales")]
        assert db_fastpath_check(db, [self.EMP])
        broken = db + [ground_atom("emp", "bob", "hr")]
        assert not db_fastpath_check(broken, [self.EMP])
        (violation,) = list(db_fastpath_violations(broken, [self.EMP]))
        assert violation.constraint == "fk"
        assert violation.binding == {"X": "bob", "D": "hr"}

    def test_agrees_with_equilibrium_check(self):
        db = frozenset({ground_atom("emp", "ann", "sales"), ground_atom("emp", "bob", "hr"), ground_atom("dept", "hr")})
        m = MultiContextSystem((Context("db", RelationalDBLogic(), db),))
        assert db_fastpath_check(db, [self.EMP]) == weak_satisfies(m, [self.EMP]).holds == strong_satisfies(m, [self.EMP]).holds

    def test_only_single_context(self):
        ic = constraint(lit(0, atom("p", "X")), lit(1, atom("q", "X")))
        with pytest.raises(NotApplicableError):
            db_fastpath_check([], [ic])
