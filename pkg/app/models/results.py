from pydantic import BaseModel, ConfigDict, Field
from typing import Dict, List, Optional, Tuple
from enum import Enum

from app.models.kernel import BeliefState, UpdateAction


class SatisfactionMode(str, Enum):
    WEAK = "weak"
    STRONG = "strong"


class Verdict(str, Enum):
    HOLDS = "holds"
    FAILS = "fails"


class RepairStatus(str, Enum):
    CONSISTENT = "consistent"          # nothing to repair
    REPAIRED = "repaired"
    NO_CANDIDATES = "no-candidates"    # empty action universe
    UNREPAIRABLE = "unrepairable"      # exhausted the full universe
    BUDGET_EXHAUSTED = "budget-exhausted"


class ViolationKind(str, Enum):
    ARITY = "arity-mismatch"
    DANGLING_CONTEXT = "dangling-context"
    SIGNATURE_OVERLAP = "signature-overlap"
    UNSAFE_RULE = "unsafe-rule"
    UNBOUND_HEAD = "unbound-head-variable"
    UNKNOWN_OPERATION = "unknown-operation"
    IMPORT_DOMAIN = "import-domain"
    ORDINARY_IN_CONSTRAINT = "ordinary-in-constraint"


class Violation(BaseModel):
    kind: ViolationKind
    message: str
    context: Optional[str] = Field(default=None, description="Name of the context the problem belongs to")
    rule: Optional[str] = Field(default=None, description="Rendered rule or constraint")

    model_config = ConfigDict(frozen=True)


class ValidationReport(BaseModel):
    violations: List[Violation] = Field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations

    def of_kind(self, kind: ViolationKind) -> List[Violation]:
        return [v for v in self.violations if v.kind == kind]


class ConsistencyResult(BaseModel):
    consistent: bool
    witness: Optional[BeliefState] = None

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    def __bool__(self) -> bool:
        return self.consistent


class ICCheck(BaseModel):
    """Outcome of checking one constraint against one belief state."""

    satisfied: bool
    binding: Optional[Dict[str, str]] = Field(default=None, description="Violating instantiation when not satisfied")

    model_config = ConfigDict(frozen=True)

    def __bool__(self) -> bool:
        return self.satisfied


class ICViolation(BaseModel):
    constraint: str = Field(description="Label or rendering of the violated constraint")
    binding: Dict[str, str] = Field(default_factory=dict)


class SatisfactionVerdict(BaseModel):
    mode: SatisfactionMode
    verdict: Verdict
    consistent: bool = Field(description="Whether the system has any equilibrium at all")
    witness: Optional[BeliefState] = Field(
        default=None,
        description="Satisfying equilibrium (weak) or violating equilibrium (strong)",
    )
    violations: List[ICViolation] = Field(default_factory=list)
    equilibria_checked: int = 0

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @property
    def holds(self) -> bool:
        return self.verdict == Verdict.HOLDS

    def __bool__(self) -> bool:
        return self.holds


class RepairResult(BaseModel):
    actions: Tuple[UpdateAction, ...]
    weak: bool = Field(description="True when only some equilibrium needs to satisfy the constraints")

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @property
    def size(self) -> int:
        return len(self.actions)


class RepairReport(BaseModel):
    status: RepairStatus
    mode: SatisfactionMode
    max_size: int
    candidates: int = Field(default=0, description="Size of the candidate action universe")
    repairs: List[RepairResult] = Field(default_factory=list)

    model_config = ConfigDict(arbitrary_types_allowed=True)


# Structured (JSON) output models

class EquilibriumOut(BaseModel):
    contexts: Dict[str, List[str]]


class ViolationOut(BaseModel):
    constraint: str
    binding: Dict[str, str] = Field(default_factory=dict)


class CheckOut(BaseModel):
    schema_version: str
    mode: SatisfactionMode
    verdict: Verdict
    consistent: bool
    witness: Optional[EquilibriumOut] = None
    violations: List[ViolationOut] = Field(default_factory=list)


class EquilibriaOut(BaseModel):
    schema_version: str
    count: int
    equilibria: List[EquilibriumOut] = Field(default_factory=list)


class RepairOut(BaseModel):
    schema_version: str
    status: RepairStatus
    mode: SatisfactionMode
    repairs: List[List[str]] = Field(default_factory=list)


class ValidationOut(BaseModel):
    schema_version: str
    valid: bool
    violations: List[Violation] = Field(default_factory=list)


class OracleOut(BaseModel):
    schema_version: str
    checks: Dict[str, bool]
