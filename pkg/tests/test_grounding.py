import pytest

from app.errors import SafetyError
from app.models.kernel import (
    Comparison,
    Context,
    MultiContextSystem,
    Token,
    Variable,
    atom,
    bridge,
    constraint,
    ground_atom,
    lit,
)
from app.services.grounding import (
    default_import_domains,
    exported_constants,
    ground_bridge_rules,
    ground_ics,
    ground_rule,
    ic_safety,
)
from app.services.logics import RelationalDBLogic
from builders import closure_system

ABC = frozenset({"a", "b", "c"})


class TestDomains:
    def test_exported_constants(self):
        exported = exported_constants(closure_system())
        assert exported[0] == ABC
        assert exported[1] == ABC

    def test_default_import_domains_cover_every_pair(self):
        domains = default_import_domains(closure_system())
        assert set(domains) == {(0, 0), (0, 1), (1, 0), (1, 1)}
        assert domains[(1, 0)] == ABC

    def test_explicit_import_domain_wins(self):
        m = closure_system()
        m = m.replace_context(1, Context("C2", m[1].logic, bridge_rules=m[1].bridge_rules, import_domains={0: frozenset({"a"})}))
        domains = default_import_domains(m)
        assert domains[(1, 0)] == {"a"}
        assert domains[(0, 0)] == ABC


class TestGroundRule:
    def test_instances_range_over_domains(self):
        rule = bridge(1, atom("Rt", "X", "Y"), lit(0, atom("R", "X", "Y")))
        assert len(ground_rule(rule, {0: ABC, 1: ABC})) == 9

    def test_comparisons_filter_instances(self):
        rule = bridge(1, atom("Rt", "X", "Y"), lit(0, atom("R", "X", "Y")), Comparison(Variable("X"), "!=", Variable("Y")))
        instances = ground_rule(rule, {0: ABC, 1: ABC})
        assert len(instances) == 6
        assert all(not i.comparisons for i in instances)

    def test_head_only_variable_yields_nothing(self):
        rule = bridge(0, atom("q", "X", "Y"), lit(0, atom("p", "X")))
        assert ground_rule(rule, {0: ABC}) == []

    def test_variable_domain_is_intersection(self):
        rule = bridge(0, atom("q", "X"), lit(0, atom("p", "X")), lit(1, atom("r", "X")))
        instances = ground_rule(rule, {0: ABC, 1: frozenset({"b", "z"})})
        assert [i.head for i in instances] == [ground_atom("q", "b")]

    def test_negated_only_variable_is_grounded(self):
        rule = bridge(0, atom("q", "X"), lit(0, atom("p", "X")), lit(1, atom("r", "X", "Y"), negated=True))
        instances = ground_rule(rule, {0: ABC, 1: ABC})
        assert len(instances) == 9
        assert instances[0].negative[0].belief == ground_atom("r", "a", "a")

    def test_whole_system(self):
        rules = ground_bridge_rules(closure_system())
        assert rules[0] == ()
        # 9 instances of the base rule, 27 of the recursive one
        assert len(rules[1]) == 36


class TestConstraintGrounding:
    def test_safety(self):
        ic = constraint(lit(0, atom("person", "X")), lit(0, atom("hasCPR", "X", "Y"), negated=True))
        assert ic_safety(ic) == {"Y"}

    def test_unbound_comparison(self):
        ic = constraint(lit(0, atom("p", "X")), Comparison(Variable("Y"), "=", Variable("X")))
        with pytest.raises(SafetyError):
            ic_safety(ic)

    def test_repeated_negative_variable(self):
        ic = constraint(lit(0, atom("p", "X")), lit(0, atom("r", "Y", "Y"), negated=True))
        with pytest.raises(SafetyError):
            ic_safety(ic)

    def test_tokens_are_not_relational(self):
        with pytest.raises(SafetyError):
            ic_safety(constraint(lit(0, Token("t"))))

    def test_ground_ics_keep_existentials(self):
        m = MultiContextSystem(
            (Context("P", RelationalDBLogic(), frozenset({ground_atom("person", "alice"), ground_atom("person", "bob")})),)
        )
        ic = constraint(lit(0, atom("person", "X")), lit(0, atom("hasCPR", "X", "Y"), negated=True))
        grounded = ground_ics(m, [ic])
        assert len(grounded) == 2
        assert {g.positive[0].belief for g in grounded} == {ground_atom("person", "alice"), ground_atom("person", "bob")}
        assert all(g.negative[0].belief.variables() == ("Y",) for g in grounded)
