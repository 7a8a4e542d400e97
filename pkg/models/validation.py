from enum import Enum
from typing import List

from pydantic import BaseModel, Field


class Severity(str, Enum):
    ERROR = "error"
    WARNING = "warning"


class Violation(BaseModel):
    rule: str
    component: str
    message: str
    severity: Severity = Severity.ERROR


class ValidationReport(BaseModel):
    violations: List[Violation] = Field(default_factory=list)

    @property
    def errors(self) -> List[Violation]:
        return [v for v in self.violations if v.severity == Severity.ERROR]

    @property
    def warnings(self) -> List[Violation]:
        return [v for v in self.violations if v.severity == Severity.WARNING]

    @property
    def valid(self) -> bool:
        return not self.errors

    def rules(self) -> List[str]:
        return [v.rule for v in self.violations]
