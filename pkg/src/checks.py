"""Certified-inequality records shared by every verification report."""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List


@dataclass(frozen=True)
class Check:
    """One inequality: ``measured <= bound`` (sense "le") or ``measured >= bound`` (sense "ge")."""

    name: str
    measured: float
    bound: float
    sense: str = "le"
    tol: float = 0.0

    def __post_init__(self):
        if self.sense not in ("le", "ge"):
            raise ValueError(f"check sense must be 'le' or 'ge', got {self.sense!r}")

    @property
    def margin(self) -> float:
        if self.sense == "le":
            return self.bound + self.tol - self.measured
        return self.measured - (self.bound - self.tol)

    @property
    def passed(self) -> bool:
        return not math.isnan(self.measured) and self.margin >= 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "measured": self.measured,
            "bound": self.bound,
            "sense": self.sense,
            "tol": self.tol,
            "margin": self.margin,
            "passed": self.passed,
        }


@dataclass
class CheckList:
    checks: List[Check] = field(default_factory=list)

    def add(self, name: str, measured: float, bound: float, sense: str = "le", tol: float = 0.0) -> Check:
        check = Check(name=name, measured=float(measured), bound=float(bound), sense=sense, tol=tol)
        self.checks.append(check)
        return check

    def extend(self, checks: Iterable[Check], prefix: str = "") -> None:
        for check in checks:
            if prefix:
                check = Check(f"{prefix}{check.name}", check.measured, check.bound, check.sense, check.tol)
            self.checks.append(check)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def failed(self) -> List[Check]:
        return [check for check in self.checks if not check.passed]

    def __iter__(self):
        return iter(self.checks)

    def __len__(self) -> int:
        return len(self.checks)
