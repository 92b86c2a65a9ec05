"""Reader for the ``.mcs`` text format.

A document is a sequence of declarations::

    context C kind datalog { p(a). q(X) :- p(X). }
    bridge D: r(X) :- (C:q(X)), not (D:s(X)).
    ic no_loops :- (D:r(X)), X = a.
    manage D { ops add, remove, replace; key r/1 : 1; }
    domain D from C : a, b.

Parsing produces a ``Document`` that still refers to contexts by name;
``Document.to_system`` resolves the names and builds the engine values.
"""

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from app.api.diagnostics import Issuer, Location, Position
from app.errors import MCSError, ParseError
from app.models.kernel import (
    Atom,
    BridgeRule,
    Comparison,
    Constant,
    Context,
    ContextLiteral,
    IntegrityConstraint,
    KBElement,
    Management,
    MultiContextSystem,
    Negated,
    Rule,
    Signature,
    Term,
    Token,
    term,
)
from app.services.encoders import Denial
from app.services.logging import engine_logger
from app.services.logics import create_logic
from app.services.validation import validate_mcs

BUILTIN_OPS = ("add", "remove", "replace")

_OPERATORS = (":-", "!=", "->", "{", "}", "(", ")", "[", "]", ",", ".", ":", ";", "=", "-", "/", "#", "~", "&", "*")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_INTEGER = re.compile(r"[0-9]+")


# -- document ------------------------------------------------------------------------


@dataclass
class BodyLiteral:
    context: str
    belief: Union[Atom, Token, Negated]
    negated: bool = False
    loc: Optional[Location] = None


BodyItem = Union[BodyLiteral, Comparison]


@dataclass
class ContextDecl:
    name: str
    kind: str
    facts: List[KBElement] = field(default_factory=list)
    rules: List[Rule] = field(default_factory=list)
    universe: List[str] = field(default_factory=list)
    predicates: List[Tuple[str, int]] = field(default_factory=list)
    loc: Optional[Location] = None


@dataclass
class BridgeDecl:
    target: str
    head: KBElement
    body: List[BodyItem] = field(default_factory=list)
    op: str = "add"
    loc: Optional[Location] = None


@dataclass
class ICDecl:
    body: List[BodyItem] = field(default_factory=list)
    label: Optional[str] = None
    loc: Optional[Location] = None


@dataclass
class ManageDecl:
    context: str
    ops: List[str] = field(default_factory=list)
    keys: Dict[Tuple[str, int], Tuple[int, ...]] = field(default_factory=dict)
    loc: Optional[Location] = None


@dataclass
class DomainDecl:
    target: str
    source: str
    constants: List[str] = field(default_factory=list)
    loc: Optional[Location] = None


@dataclass
class Document:
    source: str = "<string>"
    contexts: List[ContextDecl] = field(default_factory=list)
    bridges: List[BridgeDecl] = field(default_factory=list)
    ics: List[ICDecl] = field(default_factory=list)
    manages: List[ManageDecl] = field(default_factory=list)
    domains: List[DomainDecl] = field(default_factory=list)

    def is_empty(self) -> bool:
        return not (self.contexts or self.bridges or self.ics or self.manages or self.domains)

    def to_system(self, check: bool = True) -> Tuple[MultiContextSystem, List[IntegrityConstraint]]:
        """Resolve context names and build the system and its constraints.

        With ``check`` the result is also run through ``validate_mcs`` and
        every violation becomes a diagnostic.
        """
        return _Resolver(self).build(check)


# -- lexer ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Lexeme:
    kind: str  # IDENTIFIER, INTEGER, STRING, OPERATOR, END
    value: str
    loc: Location


class Lexer:
    def __init__(self, text: str, source: str, issuer: Issuer):
        self.text = text
        self.source = source
        self.issuer = issuer
        self.offset = 0
        self.line = 1
        self.column = 1

    def _loc(self) -> Location:
        return Location(self.source, Position(self.line, self.column))

    def _skip(self, count: int) -> None:
        for ch in self.text[self.offset:self.offset + count]:
            if ch == "\n":
                self.line += 1
                self.column = 1
            else:
                self.column += 1
        self.offset += count

    def tokens(self) -> List[Lexeme]:
        result: List[Lexeme] = []
        text = self.text
        while True:
            while self.offset < len(text):
                ch = text[self.offset]
                if ch.isspace():
                    self._skip(1)
                elif ch == "%":
                    end = text.find("\n", self.offset)
                    self._skip((len(text) if end < 0 else end) - self.offset)
                else:
                    break
            if self.offset >= len(text):
                result.append(Lexeme("END", "", self._loc()))
                return result

            loc = self._loc()
            ch = text[self.offset]
            found = _IDENT.match(text, self.offset)
            if found:
                result.append(Lexeme("IDENTIFIER", found.group(), loc))
                self._skip(found.end() - self.offset)
                continue
            found = _INTEGER.match(text, self.offset)
            if found:
                result.append(Lexeme("INTEGER", found.group(), loc))
                self._skip(found.end() - self.offset)
                continue
            if ch == '"':
                result.append(self._string(loc))
                continue
            for op in _OPERATORS:
                if text.startswith(op, self.offset):
                    result.append(Lexeme("OPERATOR", op, loc))
                    self._skip(len(op))
                    break
            else:
                self.issuer.error(loc, f"unexpected character {ch!r}")
                self._skip(1)

    def _string(self, loc: Location) -> Lexeme:
        chars: List[str] = []
        self._skip(1)
        while self.offset < len(self.text):
            ch = self.text[self.offset]
            if ch == "\\" and self.offset + 1 < len(self.text):
                chars.append(self.text[self.offset + 1])
                self._skip(2)
            elif ch == '"':
                self._skip(1)
                return Lexeme("STRING", "".join(chars), loc)
            elif ch == "\n":
                break
            else:
                chars.append(ch)
                self._skip(1)
        self.issuer.error(loc, "unterminated string")
        return Lexeme("STRING", "".join(chars), loc)


def describe(token: Lexeme) -> str:
    if token.kind == "END":
        return "end of file"
    if token.kind == "OPERATOR":
        return f"'{token.value}'"
    return f"{token.kind.lower()} {token.value}"


# -- parser --------------------------------------------------------------------------


class Parser:
    def __init__(self, text: str, source: str = "<string>"):
        self.source = source
        self.issuer = Issuer()
        self.toks = Lexer(text, source, self.issuer).tokens()
        if self.issuer.has_errors():
            raise ParseError(self.issuer.get_diagnostics(), source)
        self.pos = 0
        self.ct: Optional[Lexeme] = None
        self.nt: Lexeme = self.toks[0]

    # token handling

    def error(self, token: Lexeme, message: str):
        self.issuer.error(token.loc, message)
        raise ParseError(self.issuer.get_diagnostics(), self.source)

    def advance(self) -> Lexeme:
        self.ct = self.nt
        if self.pos < len(self.toks) - 1:
            self.pos += 1
        self.nt = self.toks[self.pos]
        return self.ct

    def lookahead(self, offset: int) -> Lexeme:
        return self.toks[min(self.pos + offset, len(self.toks) - 1)]

    def peek(self, kind: str, value: Optional[str] = None, offset: int = 0) -> bool:
        token = self.lookahead(offset)
        return token.kind == kind and (value is None or token.value == value)

    def peek_op(self, value: str, offset: int = 0) -> bool:
        return self.peek("OPERATOR", value, offset)

    def peek_kw(self, value: str, offset: int = 0) -> bool:
        return self.peek("IDENTIFIER", value, offset)

    def match(self, kind: str, value: Optional[str] = None) -> Lexeme:
        if not self.peek(kind, value):
            expected = f"'{value}'" if kind == "OPERATOR" else (value or kind.lower())
            self.error(self.nt, f"expected {expected}, encountered {describe(self.nt)} instead")
        return self.advance()

    def match_op(self, value: str) -> Lexeme:
        return self.match("OPERATOR", value)

    def match_kw(self, value: str) -> Lexeme:
        return self.match("IDENTIFIER", value)

    def match_eof(self) -> None:
        if self.nt.kind != "END":
            self.error(self.nt, f"expected end of file, encountered {describe(self.nt)} instead")

    def name(self) -> str:
        return self.match("IDENTIFIER").value

    def integer(self) -> int:
        return int(self.match("INTEGER").value)

    # terms and atoms

    def parse_term(self) -> Term:
        if self.peek("IDENTIFIER"):
            return term(self.advance().value)
        if self.peek("INTEGER") or self.peek("STRING"):
            return Constant(self.advance().value)
        self.error(self.nt, f"expected term, encountered {describe(self.nt)} instead")

    def parse_constant(self) -> str:
        if self.peek("INTEGER") or self.peek("STRING"):
            return self.advance().value
        token = self.match("IDENTIFIER")
        t = term(token.value)
        if not isinstance(t, Constant):
            self.error(token, f"expected constant, encountered variable {token.value} instead")
        return t.name

    def parse_atom(self) -> Atom:
        predicate = self.name()
        args: List[Term] = []
        if self.peek_op("("):
            self.advance()
            args.append(self.parse_term())
            while self.peek_op(","):
                self.advance()
                args.append(self.parse_term())
            self.match_op(")")
        return Atom(predicate, tuple(args))

    def parse_element(self) -> KBElement:
        if self.peek_op("#"):
            self.advance()
            if self.peek_op("*"):
                return Token(self.advance().value)
            if self.peek("IDENTIFIER") or self.peek("INTEGER"):
                return Token(self.advance().value)
            self.error(self.nt, f"expected token name, encountered {describe(self.nt)} instead")
        return self.parse_atom()

    def parse_belief(self) -> Union[Atom, Token, Negated]:
        if self.peek_op("-"):
            self.advance()
            return Negated(self.parse_atom())
        return self.parse_element()

    # bodies

    def parse_queried_belief(self) -> Union[Atom, Token, Negated]:
        """The part after the context name; 'C:-p' lexes as C, ':-', p."""
        if self.peek_op(":-"):
            self.advance()
            return Negated(self.parse_atom())
        self.match_op(":")
        return self.parse_belief()

    def parse_body_item(self) -> BodyItem:
        negated = False
        if self.peek_kw("not") and not (self.peek_op(":", offset=1) or self.peek_op(":-", offset=1)):
            self.advance()
            negated = True
        if self.peek_op("("):
            start = self.advance()
            context = self.name()
            belief = self.parse_queried_belief()
            self.match_op(")")
            return BodyLiteral(context, belief, negated, start.loc)
        if self.peek("IDENTIFIER") and (self.peek_op(":", offset=1) or self.peek_op(":-", offset=1)):
            start = self.advance()
            return BodyLiteral(start.value, self.parse_queried_belief(), negated, start.loc)
        if negated:
            self.error(self.nt, f"expected context literal after not, encountered {describe(self.nt)} instead")
        left = self.parse_term()
        if self.peek_op("=") or self.peek_op("!="):
            op = self.advance().value
        else:
            self.error(self.nt, f"expected ':', '=' or '!=', encountered {describe(self.nt)} instead")
        return Comparison(left, op, self.parse_term())

    def parse_body(self) -> List[BodyItem]:
        items = [self.parse_body_item()]
        while self.peek_op(","):
            self.advance()
            items.append(self.parse_body_item())
        return items

    # declarations

    def parse_document(self) -> Document:
        doc = Document(source=self.source)
        while not self.peek("END"):
            if self.peek_kw("context"):
                doc.contexts.append(self.parse_context())
            elif self.peek_kw("bridge"):
                doc.bridges.append(self.parse_bridge())
            elif self.peek_kw("ic"):
                doc.ics.append(self.parse_ic())
            elif self.peek_kw("manage"):
                doc.manages.append(self.parse_manage())
            elif self.peek_kw("domain"):
                doc.domains.append(self.parse_domain())
            else:
                self.error(
                    self.nt,
                    f"expected context, bridge, ic, manage or domain, encountered {describe(self.nt)} instead",
                )
        self.match_eof()
        return doc

    def parse_kind(self) -> str:
        parts = [self.name()]
        while self.peek_op("-"):
            self.advance()
            parts.append(self.name())
        return "-".join(parts)

    def _is_declaration(self, keyword: str) -> bool:
        return self.peek_kw(keyword) and self.lookahead(1).kind in ("IDENTIFIER", "INTEGER", "STRING")

    def parse_context(self) -> ContextDecl:
        start = self.match_kw("context")
        decl = ContextDecl(name=self.name(), kind="", loc=start.loc)
        self.match_kw("kind")
        decl.kind = self.parse_kind()
        self.match_op("{")
        while not self.peek_op("}"):
            if self.peek("END"):
                self.error(self.nt, f"expected '}}', encountered {describe(self.nt)} instead")
            if self._is_declaration("universe"):
                self.advance()
                decl.universe.append(self.parse_constant())
                while self.peek_op(","):
                    self.advance()
                    decl.universe.append(self.parse_constant())
                self.match_op(".")
            elif self._is_declaration("predicates"):
                self.advance()
                decl.predicates.append(self.parse_predicate())
                while self.peek_op(","):
                    self.advance()
                    decl.predicates.append(self.parse_predicate())
                self.match_op(".")
            else:
                self.parse_statement(decl)
        self.match_op("}")
        return decl

    def parse_predicate(self) -> Tuple[str, int]:
        name = self.name()
        self.match_op("/")
        return (name, self.integer())

    def parse_statement(self, decl: ContextDecl) -> None:
        """A fact, a token, or a local rule ``head :- l1, ..., not ln.``"""
        if self.peek_op("#"):
            decl.facts.append(self.parse_element())
            self.match_op(".")
            return
        head: Union[Atom, Negated] = self.parse_belief()  # type: ignore[assignment]
        if not self.peek_op(":-"):
            self.match_op(".")
            if isinstance(head, Negated):
                decl.rules.append(Rule(head))
            else:
                decl.facts.append(head)
            return
        self.advance()
        body: List[Union[Atom, Negated]] = []
        negative: List[Atom] = []
        while True:
            if self.peek_kw("not") and self.peek("IDENTIFIER", offset=1):
                self.advance()
                negative.append(self.parse_atom())
            else:
                literal = self.parse_belief()
                if isinstance(literal, Token):
                    self.error(self.ct, "ordinary elements cannot appear in rule bodies")
                body.append(literal)
            if not self.peek_op(","):
                break
            self.advance()
        self.match_op(".")
        decl.rules.append(Rule(head, tuple(body), tuple(negative)))

    def parse_bridge(self) -> BridgeDecl:
        start = self.match_kw("bridge")
        decl = BridgeDecl(target=self.name(), head=Token("_"), loc=start.loc)
        self.match_op(":")
        if self.peek("IDENTIFIER") and self.peek_op("[", offset=1):
            decl.op = self.advance().value
            self.advance()
            decl.head = self.parse_element()
            self.match_op("]")
        else:
            decl.head = self.parse_element()
        if self.peek_op(":-"):
            self.advance()
            decl.body = self.parse_body()
        self.match_op(".")
        return decl

    def parse_ic(self) -> ICDecl:
        start = self.match_kw("ic")
        decl = ICDecl(loc=start.loc)
        if not self.peek_op(":-"):
            decl.label = self.name()
        self.match_op(":-")
        decl.body = self.parse_body()
        self.match_op(".")
        return decl

    def parse_manage(self) -> ManageDecl:
        start = self.match_kw("manage")
        decl = ManageDecl(context=self.name(), loc=start.loc)
        self.match_op("{")
        while not self.peek_op("}"):
            if self.peek_kw("ops"):
                self.advance()
                decl.ops.append(self.name())
                while self.peek_op(","):
                    self.advance()
                    decl.ops.append(self.name())
            elif self.peek_kw("key"):
                key_token = self.advance()
                signature = self.parse_predicate()
                self.match_op(":")
                positions = [self.integer()]
                while self.peek_op(","):
                    self.advance()
                    positions.append(self.integer())
                if any(not 1 <= p <= signature[1] for p in positions):
                    self.error(key_token, f"key positions of {signature[0]}/{signature[1]} must lie in 1..{signature[1]}")
                decl.keys[signature] = tuple(p - 1 for p in positions)
            else:
                self.error(self.nt, f"expected ops or key, encountered {describe(self.nt)} instead")
            self.match_op(";")
        self.match_op("}")
        return decl

    def parse_domain(self) -> DomainDecl:
        start = self.match_kw("domain")
        decl = DomainDecl(target=self.name(), source="", loc=start.loc)
        self.match_kw("from")
        decl.source = self.name()
        self.match_op(":")
        if not self.peek_op("."):
            decl.constants.append(self.parse_constant())
            while self.peek_op(","):
                self.advance()
                decl.constants.append(self.parse_constant())
        self.match_op(".")
        return decl

    def parse_denial(self) -> Denial:
        closing = False
        if self.peek_kw("forall"):
            self.advance()
            self.match_op("(")
            closing = True
        positive: List[Atom] = []
        negative: List[Atom] = []
        comparisons: List[Comparison] = []
        while True:
            if self.peek_op("~"):
                self.advance()
                negative.append(self.parse_atom())
            elif self.peek_op("=", offset=1) or self.peek_op("!=", offset=1):
                left = self.parse_term()
                op = self.advance().value
                comparisons.append(Comparison(left, op, self.parse_term()))
            else:
                positive.append(self.parse_atom())
            if not self.peek_op("&"):
                break
            self.advance()
        self.match_op("->")
        if not self.peek_kw("false"):
            self.error(self.nt, f"not a denial: expected false, encountered {describe(self.nt)} instead")
        self.advance()
        if closing:
            self.match_op(")")
        self.match_eof()
        return Denial(tuple(positive), tuple(negative), tuple(comparisons))


# -- name resolution -------------------------------------------------------------------


class _Resolver:
    def __init__(self, doc: Document):
        self.doc = doc
        self.issuer = Issuer()
        self.index: Dict[str, int] = {}

    def context_index(self, name: str, loc: Optional[Location]) -> int:
        if name not in self.index:
            self.issuer.error(loc, f"unknown context {name}")
            return -1
        return self.index[name]

    def literals(self, body: Sequence[BodyItem]):
        positive, negative, comparisons = [], [], []
        for item in body:
            if isinstance(item, Comparison):
                comparisons.append(item)
                continue
            literal = ContextLiteral(self.context_index(item.context, item.loc), item.belief, item.negated)
            (negative if item.negated else positive).append(literal)
        return tuple(positive), tuple(negative), tuple(comparisons)

    def build(self, check: bool) -> Tuple[MultiContextSystem, List[IntegrityConstraint]]:
        doc = self.doc
        for decl in doc.contexts:
            if decl.name in self.index:
                self.issuer.error(decl.loc, f"context {decl.name} is declared twice")
            else:
                self.index[decl.name] = len(self.index)

        ops: Dict[str, set] = {d.name: {"add"} for d in doc.contexts}
        keys: Dict[str, Dict[Tuple[str, int], Tuple[int, ...]]] = {d.name: {} for d in doc.contexts}
        for decl in doc.manages:
            if self.context_index(decl.context, decl.loc) < 0:
                continue
            for op in decl.ops:
                if op not in BUILTIN_OPS:
                    self.issuer.error(decl.loc, f"operation {op} has no built-in meaning; register a handler from Python")
            ops[decl.context] |= set(decl.ops)
            keys[decl.context].update(decl.keys)

        bridges: Dict[str, List[BridgeRule]] = {d.name: [] for d in doc.contexts}
        for decl in doc.bridges:
            target = self.context_index(decl.target, decl.loc)
            positive, negative, comparisons = self.literals(decl.body)
            if target < 0:
                continue
            if decl.op not in ops[decl.target]:
                self.issuer.error(decl.loc, f"operation {decl.op} is not registered on {decl.target}")
            if decl.op == "replace" and isinstance(decl.head, Atom) and decl.head.signature not in keys[decl.target]:
                self.issuer.error(decl.loc, f"replace needs a key for {decl.head.predicate}/{decl.head.arity}")
            bridges[decl.target].append(BridgeRule(target, decl.head, positive, negative, comparisons, decl.op))

        domains: Dict[str, Dict[int, frozenset]] = {d.name: {} for d in doc.contexts}
        for decl in doc.domains:
            target = self.context_index(decl.target, decl.loc)
            source = self.context_index(decl.source, decl.loc)
            if target >= 0 and source >= 0:
                domains[decl.target][source] = frozenset(decl.constants)

        contexts: List[Context] = []
        for decl in doc.contexts:
            try:
                logic = create_logic(
                    decl.kind,
                    rules=tuple(decl.rules),
                    signature=_declared_signature(decl),
                    predicates=decl.predicates,
                    universe=decl.universe,
                )
            except MCSError as e:
                self.issuer.error(decl.loc, str(e))
                continue
            contexts.append(
                Context(
                    name=decl.name,
                    logic=logic,
                    kb=frozenset(decl.facts),
                    bridge_rules=tuple(bridges.get(decl.name, ())),
                    import_domains=domains.get(decl.name, {}),
                    ops=frozenset(ops.get(decl.name, {"add"})),
                    management=Management(keys=keys.get(decl.name, {})),
                )
            )

        ics: List[IntegrityConstraint] = []
        for decl in doc.ics:
            positive, negative, comparisons = self.literals(decl.body)
            ics.append(IntegrityConstraint(positive, negative, comparisons, decl.label))

        if self.issuer.has_errors():
            raise ParseError(self.issuer.get_diagnostics(), doc.source)
        m = MultiContextSystem(tuple(contexts))
        if check:
            report = validate_mcs(m, ics)
            locations = {d.name: d.loc for d in doc.contexts}
            for violation in report.violations:
                where = f" in {violation.rule}" if violation.rule else ""
                self.issuer.error(locations.get(violation.context), f"{violation.kind.value}: {violation.message}{where}")
            if self.issuer.has_errors():
                raise ParseError(self.issuer.get_diagnostics(), doc.source)
        return m, ics


def _declared_signature(decl: ContextDecl) -> Optional[Signature]:
    if not (decl.universe or decl.predicates):
        return None
    return Signature(kb_predicates=frozenset(decl.predicates), universe=frozenset(decl.universe))


# -- entry points ------------------------------------------------------------------------


def parse(text: str, source: str = "<string>") -> Document:
    log = engine_logger.parse(source)
    try:
        doc = Parser(text, source).parse_document()
    except ParseError as e:
        log.warning("parse failed", diagnostics=len(e.diagnostics))
        raise
    log.debug("parsed", contexts=len(doc.contexts), bridges=len(doc.bridges), ics=len(doc.ics))
    return doc


def parse_file(path: Union[str, Path]) -> Document:
    path = Path(path)
    return parse(path.read_text(encoding="utf-8"), str(path))


def parse_denial(text: str, source: str = "<denial>") -> Denial:
    """Read ``forall(A1 & ... & ~B1 & ... -> false)`` into a ``Denial``."""
    return Parser(text, source).parse_denial()


def load_system(path: Union[str, Path], check: bool = True) -> Tuple[MultiContextSystem, List[IntegrityConstraint]]:
    return parse_file(path).to_system(check)
