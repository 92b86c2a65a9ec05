import pytest

from app.errors import ParseError, SchemaError, ValidationError
from app.models.kernel import Comparison, Rule, Variable, atom, ground_atom, lit
from app.services.constraints import db_fastpath_check, strong_satisfies, weak_satisfies
from app.services.encoders import (
    EXTENSIONAL,
    INTENSIONAL,
    DeductiveDB,
    Denial,
    MappingRule,
    Peer,
    ctx_of_db,
    deductive_db_to_mcs,
    deductive_ic,
    denial_to_ic,
    distributed_db,
    exclusion_ics,
    extensional_only_check,
    is_weak_model,
    minimal_model,
    p2p_reduced_program,
    p2p_to_mcs,
    p2p_weak_models,
    split_by_peer,
)
from app.services.equilibria import enumerate_equilibria
from app.services.oracle import brute_force_weak_models

SUB_RULES = (
    Rule(atom("sub", "A", "B"), (atom("isa", "A", "B"),)),
    Rule(atom("sub", "A", "C"), (atom("isa", "A", "B"), atom("sub", "B", "C"))),
)


class TestSingleDatabase:
    def test_ctx_of_db(self):
        db = [ground_atom("emp", "ann", "sales")]
        m = ctx_of_db(db)
        assert m.names == ("db",)
        assert m[0].kb == set(db)
        assert m[0].logic.kind == "db"

    def test_denial_text(self):
        ic = denial_to_ic("forall(emp(X, D) & ~dept(D) & X != D -> false)")
        assert [l.belief for l in ic.positive] == [atom("emp", "X", "D")]
        assert [l.belief for l in ic.negative] == [atom("dept", "D")]
        assert all(l.context == 0 for l in ic.literals())
        assert ic.comparisons == (Comparison(Variable("X"), "!=", Variable("D")),)

    def test_denial_value(self):
        ic = denial_to_ic(Denial(positive=(atom("r", "X", "X"),), label="irreflexive"), context=2)
        assert ic.positive == (lit(2, atom("r", "X", "X")),)
        assert ic.label == "irreflexive"

    def test_non_denial_is_rejected(self):
        with pytest.raises(ParseError, match="not a denial"):
            denial_to_ic("forall(emp(X, D) -> dept(D))")

    def test_encoded_checks_agree(self):
        db = [ground_atom("emp", "ann", "sales"), ground_atom("dept", "sales")]
        ics = [denial_to_ic("emp(X, D) & ~dept(D) -> false")]
        m = ctx_of_db(db)
        assert db_fastpath_check(db, ics) is True
        assert weak_satisfies(m, ics).holds and strong_satisfies(m, ics).holds


class TestDistributed:
    def test_replica_constraints(self):
        sites = {
            "north": [ground_atom("emp", "ann", "sales")],
            "south": [ground_atom("emp", "ann", "sales")],
        }
        m, ics = distributed_db(sites, {"emp": 2})
        assert m.names == ("north", "south")
        assert len(ics) == 2
        assert weak_satisfies(m, ics).holds

    def test_missing_replica_tuple(self):
        sites = {
            "north": [ground_atom("emp", "ann", "sales"), ground_atom("emp", "bob", "hr")],
            "south": [ground_atom("emp", "ann", "sales")],
        }
        m, ics = distributed_db(sites, {"emp": 2})
        verdict = weak_satisfies(m, ics)
        assert not verdict.holds
        assert verdict.violations[0].constraint == "emp:north->south"

    def test_declared_relation_without_facts(self):
        m, ics = distributed_db({"north": [ground_atom("emp", "ann", "sales")], "south": []}, {"emp": 2}, {"south": ["emp"]})
        assert len(ics) == 2
        assert not weak_satisfies(m, ics).holds

    def test_arity_disagreement(self):
        with pytest.raises(SchemaError):
            distributed_db({"north": [ground_atom("emp", "ann")], "south": [ground_atom("emp", "ann", "sales")]}, {"emp": 2})

    def test_schema_is_required(self):
        sites = {"north": [ground_atom("emp", "ann", "sales")], "south": []}
        with pytest.raises(TypeError):
            distributed_db(sites)
        with pytest.raises(SchemaError, match="emp"):
            distributed_db(sites, {"dept": 1})

    def test_exclusion(self, load):
        m, _ = load("cpr")
        (ic,) = exclusion_ics(m, "Skborg", "voter", 1, ["Skborg", "Aarhus"])
        assert [l.context for l in ic.positive] == [m.index_of("Skborg"), m.index_of("Aarhus")]
        assert weak_satisfies(m, [ic]).holds


class TestDeductive:
    def test_view_is_least_model(self):
        d = DeductiveDB(frozenset({ground_atom("isa", "array", "list"), ground_atom("isa", "list", "collection")}), SUB_RULES)
        m = deductive_db_to_mcs(d)
        (state,) = list(enumerate_equilibria(m))
        derived = state[INTENSIONAL].atoms()
        assert derived == minimal_model(d.facts, d.rules) - d.facts
        assert ground_atom("sub", "array", "collection") in derived

    def test_acyclicity(self):
        facts = {ground_atom("isa", "array", "list"), ground_atom("isa", "list", "collection")}
        acyclic = DeductiveDB(frozenset(facts), SUB_RULES)
        cyclic = DeductiveDB(frozenset(facts | {ground_atom("isa", "collection", "array")}), SUB_RULES)
        denial = "forall(sub(A, A) -> false)"
        assert weak_satisfies(deductive_db_to_mcs(acyclic), [deductive_ic(acyclic, denial)]).holds
        assert not weak_satisfies(deductive_db_to_mcs(cyclic), [deductive_ic(cyclic, denial)]).holds

    def test_no_rules_means_empty_view(self):
        d = DeductiveDB(frozenset({ground_atom("isa", "a", "b")}))
        (state,) = list(enumerate_equilibria(deductive_db_to_mcs(d)))
        assert not state[INTENSIONAL].positive

    def test_routing(self):
        d = DeductiveDB(frozenset({ground_atom("isa", "a", "b")}), SUB_RULES)
        ic = deductive_ic(d, "forall(sub(A, B) & ~isa(A, B) -> false)")
        assert ic.positive[0].context == INTENSIONAL
        assert ic.negative[0].context == EXTENSIONAL
        assert not extensional_only_check([ic])
        assert extensional_only_check([deductive_ic(d, "forall(isa(A, A) -> false)")])

    def test_mixed_relation_is_rejected(self):
        d = DeductiveDB(frozenset({ground_atom("sub", "a", "b")}), SUB_RULES)
        with pytest.raises(ValidationError):
            deductive_db_to_mcs(d)


def _peers():
    a = Peer("A", frozenset({ground_atom("ae", "x"), ground_atom("ae", "y")}))
    b = Peer(
        "B",
        frozenset({ground_atom("be", "x")}),
        mappings=(MappingRule(atom("bm", "X"), "A", (atom("ae", "X"),)),),
        ics=(Denial(positive=(atom("bm", "X"),), negative=(atom("be", "X"),)),),
    )
    return [a, b]


class TestPeerToPeer:
    def test_mcs_encoding(self):
        m, ics = p2p_to_mcs(_peers())
        (state,) = list(enumerate_equilibria(m))
        assert state[1].atoms() == {ground_atom("be", "x"), ground_atom("bm", "x"), ground_atom("bm", "y")}
        assert len(ics) == 1 and not weak_satisfies(m, ics).holds

    def test_weak_models_drop_offending_imports(self):
        models = list(p2p_weak_models(_peers()))
        base = {ground_atom("ae", "x"), ground_atom("ae", "y"), ground_atom("be", "x")}
        # importing bm(y) always violates the denial; importing nothing is allowed too
        assert models == [frozenset(base | {ground_atom("bm", "x")}), frozenset(base)]
        assert set(models) == brute_force_weak_models(_peers())

    def test_reduced_program(self):
        interpretation = {ground_atom("ae", "x"), ground_atom("ae", "y"), ground_atom("be", "x"), ground_atom("bm", "x")}
        reduced = p2p_reduced_program(_peers(), interpretation)
        assert Rule(ground_atom("bm", "x"), (ground_atom("ae", "x"),)) in reduced
        assert Rule(ground_atom("bm", "y"), (ground_atom("ae", "y"),)) not in reduced
        assert Rule(ground_atom("be", "x")) in reduced
        assert is_weak_model(_peers(), interpretation)

    def test_split_by_peer(self):
        parts = split_by_peer(_peers(), {ground_atom("ae", "x"), ground_atom("bm", "x")})
        assert parts == (frozenset({ground_atom("ae", "x")}), frozenset({ground_atom("bm", "x")}))
        with pytest.raises(ValidationError):
            split_by_peer(_peers(), {ground_atom("zz", "x")})

    @pytest.mark.parametrize(
        "peers",
        [
            [Peer("A", mappings=(MappingRule(atom("am", "X"), "A", (atom("ae", "X"),)),))],
            [Peer("A", mappings=(MappingRule(atom("am", "X"), "Z", (atom("ze", "X"),)),))],
            [Peer("A", frozenset({ground_atom("r", "x")})), Peer("B", frozenset({ground_atom("r", "y")}))],
            [Peer("A"), Peer("A")],
        ],
    )
    def test_malformed_systems(self, peers):
        with pytest.raises(ValidationError):
            p2p_to_mcs(peers)
