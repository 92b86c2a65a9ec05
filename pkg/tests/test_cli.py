import json
from io import StringIO

import pytest

from app.api.cli import CommandError, cli, parse_ops


@pytest.fixture
def run(fixture_path):
    def _run(*argv, name=None):
        out, err = StringIO(), StringIO()
        args = list(argv)
        if name is not None:
            args.insert(1, fixture_path(name))
        status = cli(args, out, err)
        return status, out.getvalue(), err.getvalue()

    return _run


class TestCheck:
    def test_strong_fails_weak_holds(self, run):
        status, out, _ = run("check", "--mode", "strong", name="closure_models")
        assert status == 1
        assert out.splitlines()[0] == "strong: fails"
        assert "violated: closed [X=a, Y=c]" in out

        status, out, _ = run("check", "--mode", "weak", name="closure_models")
        assert status == 0
        assert out.splitlines()[0] == "weak: holds"

    def test_default_mode_is_weak(self, run):
        status, out, _ = run("check", name="isa_sub")
        assert status == 0 and out.startswith("weak: holds")

    def test_json(self, run):
        status, out, _ = run("check", "--mode", "strong", "--json", name="closure_models")
        assert status == 1
        document = json.loads(out)
        assert document["verdict"] == "fails"
        assert document["violations"] == [{"constraint": "closed", "binding": {"X": "a", "Y": "c"}}]

    def test_without_fast_path(self, run):
        status, _, _ = run("check", "--no-fast-path", name="transitive_closure")
        assert status == 1

    def test_bad_mode(self, run):
        status, _, _ = run("check", "--mode", "sometimes", name="transitive_closure")
        assert status == 2

    def test_missing_file(self, run, tmp_path):
        status, _, err = run("check", str(tmp_path / "absent.mcs"))
        assert status == 2 and err

    def test_parse_error(self, run, tmp_path):
        path = tmp_path / "broken.mcs"
        path.write_text("context C kind db {\n  p(a)\n}\n", encoding="utf-8")
        status, out, err = run("check", str(path))
        assert status == 2
        assert out == ""
        assert "expected '.'" in err


class TestEquilibria:
    def test_json(self, run):
        status, out, _ = run("equilibria", "--json", name="transitive_closure")
        assert status == 0
        document = json.loads(out)
        assert document["count"] == 1
        assert document["equilibria"][0]["contexts"]["C2"] == ["Rt(a, b)", "Rt(a, c)", "Rt(b, c)"]

    def test_text_and_limit(self, run):
        status, out, _ = run("equilibria", "--limit", "2", name="closure_models")
        assert status == 0
        assert out.rstrip().endswith("2 equilibria")

    def test_negative_limit(self, run):
        status, _, err = run("equilibria", "--limit", "-1", name="transitive_closure")
        assert status == 2 and "must not be negative" in err


class TestRepair:
    def test_toy(self, run):
        status, out, _ = run("repair", name="toy_repair")
        assert status == 0
        assert out.splitlines() == ["status: repaired", "{(E:add(p))}", "{(I:add(q))}"]

    def test_restricted_operations(self, run):
        status, out, _ = run("repair", "--ops", "E:add", name="toy_repair")
        assert status == 0
        assert out.splitlines() == ["status: repaired", "{(E:add(p))}"]

    def test_unsurmountable(self, run):
        status, out, _ = run("repair", "--ops", "B:add,B:remove", name="unsurmountable")
        assert status == 1
        assert out.splitlines() == ["status: unrepairable"]

    @pytest.mark.parametrize("ops", ["E", "Z:add", ":add"])
    def test_bad_ops(self, run, ops):
        status, _, err = run("repair", "--ops", ops, name="toy_repair")
        assert status == 2 and "--ops" in err

    def test_json(self, run):
        status, out, _ = run("repair", "--json", name="toy_repair")
        assert status == 0
        assert json.loads(out)["repairs"] == [["(E:add(p))"], ["(I:add(q))"]]


def test_parse_ops():
    assert parse_ops("E:add, E:remove,I:add") == {"E": ["add", "remove"], "I": ["add"]}
    with pytest.raises(CommandError) as info:
        parse_ops("E:")
    assert info.value.status_code == 2


class TestOtherCommands:
    def test_encode_to_file(self, run, tmp_path):
        target = tmp_path / "encoded.mcs"
        status, out, _ = run("encode", "--construction", "thm1", "-o", str(target), name="transitive_closure")
        assert status == 0 and out == ""
        assert "context _flag kind flag-weak {" in target.read_text(encoding="utf-8")
        # the closure constraint fails weakly, so the encoded system has no equilibrium
        status, out, _ = run("equilibria", str(target))
        assert status == 1 and out.strip() == "0 equilibria"

    def test_encode_to_stdout(self, run):
        status, out, _ = run("encode", "--construction", "thm2", name="transitive_closure")
        assert status == 0
        assert "context _flag kind flag-strong {" in out

    @pytest.mark.parametrize("construction, alias", [("thm1", "weak"), ("thm2", "strong")])
    def test_encode_aliases(self, run, construction, alias):
        _, named, _ = run("encode", "--construction", construction, name="transitive_closure")
        _, aliased, _ = run("encode", "--construction", alias, name="transitive_closure")
        assert named == aliased and f"kind flag-{alias}" in named

    def test_encode_needs_construction(self, run):
        status, _, _ = run("encode", name="transitive_closure")
        assert status == 2

    def test_oracle(self, run):
        status, out, _ = run("oracle", name="transitive_closure")
        assert status == 0
        assert "ok  equilibria-match-brute-force" in out
        assert "FAILED" not in out

    def test_validate(self, run, tmp_path):
        status, out, _ = run("validate", name="transitive_closure")
        assert status == 0 and out.strip() == "valid"

        path = tmp_path / "unsafe.mcs"
        path.write_text("context C kind db { q(a). }\nbridge C: p(X) :- (C:q(Y)).\n", encoding="utf-8")
        status, out, _ = run("validate", "--json", str(path))
        assert status == 1
        document = json.loads(out)
        assert document["valid"] is False
        assert "unbound-head-variable" in [v["kind"] for v in document["violations"]]

    def test_version(self, run, capsys):
        status, _, _ = run("--version")
        assert status == 0
        assert capsys.readouterr().out.startswith("mcs ")

    def test_no_arguments(self, run):
        status, _, _ = run()
        assert status == 2
