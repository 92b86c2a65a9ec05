"""Exception hierarchy shared by every engine service."""

from typing import Iterable, Optional


class MCSError(Exception):
    """Base class for all engine errors."""


class ValidationError(MCSError):
    """A structure violates a well-formedness rule."""


class SafetyError(MCSError):
    """A rule or constraint uses a variable that cannot be bound."""


class UnsupportedLogicError(MCSError):
    """Input that a context logic cannot evaluate (negation in Datalog, non-Horn axioms, ...)."""


class CapabilityError(MCSError):
    """A logic cannot be enumerated within the configured bounds."""


class EnumerationLimitError(CapabilityError):
    """Too many guessed heads for an unbounded enumeration."""

    def __init__(self, heads: int, maximum: int):
        self.heads = heads
        self.maximum = maximum
        super().__init__(
            f"{heads} guessed ground heads exceed {maximum}; pass an explicit limit"
        )


class NotApplicableError(MCSError):
    """An operation was called outside its preconditions."""


class SchemaError(MCSError):
    """Relations disagree on their arity."""


class ActionError(MCSError):
    """An update action uses an operation its context does not register."""


class NoRepairPossibleError(MCSError):
    """The candidate action universe is empty."""


class ParseError(MCSError):
    """DSL text could not be parsed; carries positioned diagnostics."""

    def __init__(self, diagnostics: Iterable["object"], source: Optional[str] = None):
        self.diagnostics = list(diagnostics)
        self.source = source
        super().__init__("\n".join(str(d) for d in self.diagnostics) or "parse error")
