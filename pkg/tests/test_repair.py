import pytest

from app.errors import ActionError, NoRepairPossibleError
from app.models.kernel import Atom, UpdateAction, ground_atom
from app.models.results import RepairStatus
from app.services.oracle import exhaustive_repairs
from app.services.repair import (
    apply_updates,
    candidate_actions,
    declare_key,
    enumerate_repairs,
    is_repair,
    is_weak_repair,
    lift_to_managed,
    register_operation,
    search_repairs,
)
from builders import toy_system

ADD_P = UpdateAction(0, "add", Atom("p"))
ADD_Q = UpdateAction(1, "add", Atom("q"))


@pytest.fixture
def toy():
    m, ics = toy_system()
    return lift_to_managed(m), ics


class TestUpdates:
    def test_lift_adds_builtin_operations(self):
        m, _ = toy_system()
        assert all(ctx.ops == {"add"} for ctx in m)
        assert all(ctx.ops == {"add", "remove"} for ctx in lift_to_managed(m))

    def test_apply_updates(self, toy):
        m, _ = toy
        updated = apply_updates(m, [ADD_P])
        assert updated[0].kb == {Atom("p")}
        assert updated[1].bridge_rules == m[1].bridge_rules
        assert apply_updates(updated, [UpdateAction(0, "remove", Atom("p"))])[0].kb == frozenset()

    def test_unregistered_operation(self, toy):
        m, _ = toy
        with pytest.raises(ActionError, match="not registered"):
            apply_updates(m, [UpdateAction(0, "replace", Atom("p"))])
        with pytest.raises(ActionError):
            apply_updates(m, [UpdateAction(5, "add", Atom("p"))])

    def test_custom_operation_needs_handler(self, toy):
        m, _ = toy
        with pytest.raises(ActionError, match="handler"):
            register_operation(m, "E", "toggle")

        def toggle(kb, element):
            return kb - {element} if element in kb else kb | {element}

        m = register_operation(m, "E", "toggle", toggle)
        assert "toggle" in m[0].ops
        assert apply_updates(m, [UpdateAction(0, "toggle", Atom("p"))])[0].kb == {Atom("p")}

    def test_keyed_replace(self, load):
        m, _ = load("cpr")
        cpr = m.index_of("CPR")
        moved = ground_atom("person", "1111111118", "old_lady", "gjern")
        assert apply_updates(m, [UpdateAction(cpr, "replace", moved)])[cpr].kb == {moved}

    def test_declare_key(self, toy):
        m, _ = toy
        m = declare_key(register_operation(m, 0, "replace"), "E", ("r", 2), [0])
        m = apply_updates(m, [UpdateAction(0, "add", ground_atom("r", "a", "1"))])
        m = apply_updates(m, [UpdateAction(0, "replace", ground_atom("r", "a", "2"))])
        assert m[0].kb == {ground_atom("r", "a", "2")}


class TestRepairs:
    def test_candidate_universe(self, toy):
        m, ics = toy
        assert candidate_actions(m, ics) == [ADD_P, ADD_Q]
        assert candidate_actions(m, ics, {"E": ["add"]}) == [ADD_P]

    def test_toy_repairs(self, toy):
        m, ics = toy
        repairs = [r.actions for r in enumerate_repairs(m, ics)]
        assert repairs == [(ADD_P,), (ADD_Q,)]

    def test_restricted_operations(self, toy):
        m, ics = toy
        assert [r.actions for r in enumerate_repairs(m, ics, allowed_ops={"E": ["add"]})] == [(ADD_P,)]

    def test_minimality(self, toy):
        m, ics = toy
        assert is_repair(m, ics, [ADD_P])
        assert is_weak_repair(m, ics, [ADD_P, ADD_Q])
        assert not is_repair(m, ics, [ADD_P, ADD_Q])
        assert not is_weak_repair(m, ics, [])

    def test_matches_exhaustive_search(self, toy):
        m, ics = toy
        found = {frozenset(r.actions) for r in enumerate_repairs(m, ics, max_size=2)}
        assert found == set(exhaustive_repairs(m, ics, 2))

    def test_consistent_system_needs_nothing(self, toy):
        m, ics = toy
        fixed = apply_updates(m, [ADD_P])
        assert [r.actions for r in enumerate_repairs(fixed, ics)] == [()]
        assert search_repairs(fixed, ics).status is RepairStatus.CONSISTENT

    def test_no_candidates(self, toy):
        m, ics = toy
        with pytest.raises(NoRepairPossibleError):
            list(enumerate_repairs(m, ics, allowed_ops={}))
        assert search_repairs(m, ics, allowed_ops={}).status is RepairStatus.NO_CANDIDATES

    def test_budget_exhausted(self, toy):
        m, ics = toy
        report = search_repairs(m, ics, max_size=0)
        assert report.status is RepairStatus.BUDGET_EXHAUSTED
        assert report.candidates == 2

    def test_strong_mode(self, toy):
        m, ics = toy
        report = search_repairs(m, ics, mode="strong")
        assert report.status is RepairStatus.REPAIRED
        assert all(not r.weak for r in report.repairs)


class TestFixtures:
    def test_removal_repair(self, load):
        m, ics = load("unsurmountable")
        report = search_repairs(lift_to_managed(m), ics)
        assert report.status is RepairStatus.REPAIRED
        assert [r.actions for r in report.repairs] == [(UpdateAction(0, "remove", Atom("a")),)]

    def test_unsurmountable(self, load):
        m, ics = load("unsurmountable")
        report = search_repairs(lift_to_managed(m), ics, allowed_ops={"B": ["add", "remove"]})
        assert report.status is RepairStatus.UNREPAIRABLE
        assert report.repairs == []

    def test_electoral_register(self, load):
        m, ics = load("cpr")
        m = lift_to_managed(m)
        skborg, cpr = m.index_of("Skborg"), m.index_of("CPR")
        report = search_repairs(m, ics, max_size=1)
        assert report.status is RepairStatus.REPAIRED
        singletons = {r.actions[0] for r in report.repairs}
        assert UpdateAction(skborg, "add", ground_atom("address", "odense")) in singletons
        assert UpdateAction(skborg, "remove", ground_atom("voter", "1111111118")) in singletons
        assert UpdateAction(cpr, "add", ground_atom("person", "1111111118", "old_lady", "gjern")) in singletons
        assert UpdateAction(cpr, "replace", ground_atom("person", "1111111118", "old_lady", "gjern")) in singletons
        assert UpdateAction(cpr, "remove", ground_atom("person", "1111111118", "old_lady", "odense")) not in singletons
