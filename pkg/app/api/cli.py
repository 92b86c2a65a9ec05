"""Command router for the ``mcs`` command line.

Every command is a handler registered on ``router``; handlers print results
on stdout and return an exit status. Engine errors are turned into status 2
with the message on stderr, much like an HTTP layer maps service errors to
status codes.

    0  constraints satisfied / command succeeded
    1  constraints violated (or no equilibrium, failed oracle, invalid system)
    2  usage, parse or engine error
"""

import argparse
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, TextIO

from app import __version__
from app.api.parser import load_system
from app.api.serializer import (
    belief_strings,
    check_output,
    equilibria_output,
    format_action,
    oracle_output,
    render_json,
    repair_output,
    serialize_system,
    validation_output,
)
from app.errors import MCSError, ParseError
from app.models.results import RepairStatus, SatisfactionMode
from app.services.config import get_settings
from app.services.constraints import encode_strong, encode_weak, satisfies
from app.services.equilibria import enumerate_equilibria
from app.services.logging import engine_logger
from app.services.oracle import run_oracles
from app.services.repair import lift_to_managed, search_repairs
from app.services.validation import validate_mcs

EXIT_OK = 0
EXIT_VIOLATED = 1
EXIT_ERROR = 2


class CommandError(Exception):
    """Raised by handlers to end a command with a given status."""

    def __init__(self, status_code: int, detail: str):
        self.status_code = status_code
        self.detail = detail
        super().__init__(detail)


Handler = Callable[[argparse.Namespace, TextIO], int]


@dataclass
class Command:
    name: str
    help: str
    handler: Handler
    configure: Callable[[argparse.ArgumentParser], None]


class Router:
    def __init__(self) -> None:
        self.commands: Dict[str, Command] = {}

    def command(self, name: str, help: str, configure: Callable[[argparse.ArgumentParser], None]):
        def register(handler: Handler) -> Handler:
            self.commands[name] = Command(name, help, handler, configure)
            return handler

        return register

    def build_parser(self) -> argparse.ArgumentParser:
        parser = argparse.ArgumentParser(prog="mcs", description="Integrity constraints over multi-context systems")
        parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
        sub = parser.add_subparsers(dest="command", metavar="COMMAND")
        sub.required = True
        for command in self.commands.values():
            child = sub.add_parser(command.name, help=command.help)
            child.add_argument("file", metavar="FILE", type=Path, help="system description (.mcs)")
            command.configure(child)
        return parser

    def dispatch(self, argv: Sequence[str], out: TextIO, err: TextIO) -> int:
        parser = self.build_parser()
        try:
            args = parser.parse_args(list(argv))
        except SystemExit as e:
            return EXIT_OK if e.code in (0, None) else EXIT_ERROR

        log = engine_logger.command(args.command, file=str(args.file))
        started = time.perf_counter()
        try:
            status = self.commands[args.command].handler(args, out)
        except CommandError as e:
            print(f"mcs {args.command}: {e.detail}", file=err)
            log.warning("command rejected", detail=e.detail)
            return e.status_code
        except ParseError as e:
            print(str(e), file=err)
            return EXIT_ERROR
        except OSError as e:
            print(f"mcs {args.command}: {e}", file=err)
            return EXIT_ERROR
        except MCSError as e:
            print(f"mcs {args.command}: {type(e).__name__}: {e}", file=err)
            log.error("engine error", error=str(e), error_type=type(e).__name__)
            return EXIT_ERROR
        engine_logger.performance(args.command, time.perf_counter() - started, status=status).info("command finished")
        return status


router = Router()


# -- argument groups --------------------------------------------------------------------


def _mode_option(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--mode",
        choices=[m.value for m in SatisfactionMode],
        default=None,
        help="weak: some equilibrium satisfies the constraints; strong: every equilibrium does",
    )


def _json_option(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--json", action="store_true", help="emit structured output")


def _configure_check(parser: argparse.ArgumentParser) -> None:
    _mode_option(parser)
    _json_option(parser)
    parser.add_argument("--no-fast-path", action="store_true", help="guess every component instead of using fixpoints")


def _configure_equilibria(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--limit", type=int, default=None, metavar="N", help="stop after N equilibria")
    _json_option(parser)


def _configure_repair(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--max-size", type=int, default=None, metavar="K", help="largest update set tried")
    parser.add_argument("--ops", default=None, metavar="CTX:OP,...", help="restrict update actions to these pairs")
    _mode_option(parser)
    _json_option(parser)


ENCODINGS = {"thm1": encode_weak, "thm2": encode_strong, "weak": encode_weak, "strong": encode_strong}


def _configure_encode(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--construction",
        choices=list(ENCODINGS),
        required=True,
        help="thm1 (alias weak): consistent iff weakly satisfied; thm2 (alias strong): consistent iff strongly violated",
    )
    parser.add_argument("-o", "--output", default="-", metavar="OUT", help="output file (default: stdout)")


def _configure_plain(parser: argparse.ArgumentParser) -> None:
    _json_option(parser)


def _mode(args: argparse.Namespace) -> SatisfactionMode:
    return SatisfactionMode(args.mode or get_settings().default_mode)


def parse_ops(text: str) -> Dict[str, List[str]]:
    """``"E:add,E:remove,I:add"`` to ``{"E": ["add", "remove"], "I": ["add"]}``."""
    allowed: Dict[str, List[str]] = {}
    for item in filter(None, (part.strip() for part in text.split(","))):
        context, sep, op = item.partition(":")
        if not sep or not context or not op:
            raise CommandError(EXIT_ERROR, f"malformed --ops entry {item!r}; expected CTX:OP")
        allowed.setdefault(context, []).append(op)
    return allowed


# -- commands ---------------------------------------------------------------------------


@router.command("check", "decide weak or strong constraint satisfaction", _configure_check)
def check(args: argparse.Namespace, out: TextIO) -> int:
    m, ics = load_system(args.file)
    verdict = satisfies(m, ics, _mode(args), fast_path=False if args.no_fast_path else None)
    if args.json:
        print(render_json(check_output(verdict, m)), file=out)
    else:
        print(f"{verdict.mode.value}: {verdict.verdict.value}", file=out)
        if not verdict.consistent:
            print("system has no equilibrium", file=out)
        if verdict.witness is not None:
            label = "witness" if verdict.holds else "violating equilibrium"
            print(f"{label}:", file=out)
            for name, beliefs in zip(m.names, verdict.witness):
                print(f"  {name}: {{{', '.join(belief_strings(beliefs))}}}", file=out)
        for v in verdict.violations:
            binding = ", ".join(f"{k}={val}" for k, val in sorted(v.binding.items()))
            print(f"violated: {v.constraint}" + (f" [{binding}]" if binding else ""), file=out)
    return EXIT_OK if verdict.holds else EXIT_VIOLATED


@router.command("equilibria", "enumerate equilibria", _configure_equilibria)
def equilibria(args: argparse.Namespace, out: TextIO) -> int:
    m, _ = load_system(args.file)
    if args.limit is not None and args.limit < 0:
        raise CommandError(EXIT_ERROR, "--limit must not be negative")
    states = list(enumerate_equilibria(m, args.limit))
    if args.json:
        print(render_json(equilibria_output(states, m)), file=out)
    else:
        for n, state in enumerate(states, 1):
            print(f"equilibrium {n}:", file=out)
            for name, beliefs in zip(m.names, state):
                print(f"  {name}: {{{', '.join(belief_strings(beliefs))}}}", file=out)
        print(f"{len(states)} equilibria", file=out)
    return EXIT_OK if states else EXIT_VIOLATED


@router.command("repair", "enumerate minimal repairs", _configure_repair)
def repair(args: argparse.Namespace, out: TextIO) -> int:
    m, ics = load_system(args.file)
    m = lift_to_managed(m)
    if args.max_size is not None and args.max_size < 0:
        raise CommandError(EXIT_ERROR, "--max-size must not be negative")
    allowed = parse_ops(args.ops) if args.ops else None
    if allowed is not None:
        unknown = sorted(set(allowed) - set(m.names))
        if unknown:
            raise CommandError(EXIT_ERROR, f"--ops names unknown contexts {unknown}")
    report = search_repairs(m, ics, args.max_size, allowed, _mode(args))
    if args.json:
        print(render_json(repair_output(report, m)), file=out)
    else:
        print(f"status: {report.status.value}", file=out)
        for r in report.repairs:
            if r.actions:
                print("{" + ", ".join(format_action(a, m.names) for a in r.actions) + "}", file=out)
    return EXIT_OK if report.status in (RepairStatus.CONSISTENT, RepairStatus.REPAIRED) else EXIT_VIOLATED


@router.command("encode", "append the flag context of a constraint encoding", _configure_encode)
def encode(args: argparse.Namespace, out: TextIO) -> int:
    m, ics = load_system(args.file)
    encoded = ENCODINGS[args.construction](m, ics)
    text = serialize_system(encoded)
    if args.output == "-":
        out.write(text)
    else:
        Path(args.output).write_text(text, encoding="utf-8")
    return EXIT_OK


@router.command("oracle", "cross-check the engine against brute force", _configure_plain)
def oracle(args: argparse.Namespace, out: TextIO) -> int:
    m, ics = load_system(args.file)
    checks = run_oracles(m, ics)
    if args.json:
        print(render_json(oracle_output(checks)), file=out)
    else:
        for name, ok in sorted(checks.items()):
            print(f"{'ok' if ok else 'FAILED'}  {name}", file=out)
    return EXIT_OK if all(checks.values()) else EXIT_VIOLATED


@router.command("validate", "report structural problems", _configure_plain)
def validate(args: argparse.Namespace, out: TextIO) -> int:
    m, ics = load_system(args.file, check=False)
    report = validate_mcs(m, ics)
    if args.json:
        print(render_json(validation_output(report)), file=out)
    else:
        for v in report.violations:
            where = f" ({v.context})" if v.context else ""
            print(f"{v.kind.value}{where}: {v.message}", file=out)
        print("valid" if report.valid else f"{len(report.violations)} problems", file=out)
    return EXIT_OK if report.valid else EXIT_VIOLATED


def cli(argv: Optional[Sequence[str]] = None, out: Optional[TextIO] = None, err: Optional[TextIO] = None) -> int:
    return router.dispatch(sys.argv[1:] if argv is None else argv, out or sys.stdout, err or sys.stderr)
