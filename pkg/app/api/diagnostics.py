from dataclasses import dataclass
from typing import Iterable, List, Optional


@dataclass(frozen=True)
class Position:
    line: int
    column: int


@dataclass(frozen=True)
class Location:
    source: str
    start: Position

    def __str__(self) -> str:
        return f"{self.source}:{self.start.line}:{self.start.column}"


@dataclass(frozen=True)
class Diagnostic:
    loc: Optional[Location]
    msg: str

    def __str__(self) -> str:
        where = str(self.loc) if self.loc else "<unknown location>"
        return f"{where}: error: {self.msg}"


class Issuer:
    """Collects diagnostics while a document is read."""

    def __init__(self) -> None:
        self._diagnostics: List[Diagnostic] = []

    def issue(self, diagnostic: Diagnostic) -> None:
        self._diagnostics.append(diagnostic)

    def error(self, loc: Optional[Location], msg: str) -> None:
        self.issue(Diagnostic(loc, msg))

    def has_errors(self) -> bool:
        return bool(self._diagnostics)

    def get_diagnostics(self) -> Iterable[Diagnostic]:
        return list(self._diagnostics)
