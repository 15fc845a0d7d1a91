"""Class-level expected-weight pool.

Each confirmed student contributes the reference mean for their (age, gender)
group; the running expected total is compared against the measured class total
and deviations beyond tolerance become instructor-facing anomaly reports. Only
group means ever enter the pool, never a measured weight.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime

from .errors import ConflictError, DomainError, NoReferenceError, NotFoundError
from .refstats import ReferenceTable
from .roster import Student

DEFAULT_TOLERANCE = 0.10
# Anomaly rule when nobody has checked in (relative deviation undefined).
DEFAULT_EMPTY_THRESHOLD_KG = 20.0


@dataclass(frozen=True)
class AnomalyReport:
    expected_kg: float
    actual_kg: float
    deviation_kg: float
    relative_deviation: float | None
    at: datetime

    def to_json(self) -> dict:
        return {
            "expected_kg": self.expected_kg,
            "actual_kg": self.actual_kg,
            "deviation_kg": self.deviation_kg,
            "relative_deviation": self.relative_deviation,
            "at": self.at.isoformat(timespec="seconds"),
        }


class WeightPool:
    """Running sum of reference means for students who have checked in."""

    def __init__(
        self,
        tolerance: float = DEFAULT_TOLERANCE,
        empty_threshold_kg: float = DEFAULT_EMPTY_THRESHOLD_KG,
    ) -> None:
        if tolerance <= 0:
            raise DomainError("tolerance must be positive")
        self.tolerance = tolerance
        self.empty_threshold_kg = empty_threshold_kg
        # uid -> contributed reference mean, in insertion order. The total is
        # re-summed over this sequence so add-then-remove restores it exactly.
        self._members: dict[str, float] = {}
        self.expected_total_kg = 0.0

    @property
    def members(self) -> list[tuple[str, float]]:
        return list(self._members.items())

    def __len__(self) -> int:
        return len(self._members)

    def _resum(self) -> None:
        total = 0.0
        for mean in self._members.values():
            total += mean
        self.expected_total_kg = total

    def add_member(self, student: Student, table: ReferenceTable) -> None:
        if student.uid in self._members:
            raise ConflictError(f"{student.uid} already in pool")
        cell = table.cell(student.age, student.gender)
        if cell is None:
            raise NoReferenceError(
                f"no reference mean for age {student.age} {student.gender.value}"
            )
        self._members[student.uid] = cell.mean_kg
        self._resum()

    def remove_member(self, uid: str) -> None:
        if uid not in self._members:
            raise NotFoundError(f"{uid} not in pool")
        del self._members[uid]
        self._resum()

    def compare(self, actual_total_kg: float, now: datetime) -> AnomalyReport | None:
        """Anomaly report when the measured class total strays past tolerance."""
        if actual_total_kg < 0:
            raise DomainError("actual total cannot be negative")
        expected = self.expected_total_kg
        deviation = actual_total_kg - expected
        if expected > 0:
            if abs(deviation) <= self.tolerance * expected:
                return None
            relative = deviation / expected
            return AnomalyReport(expected, actual_total_kg, deviation, relative, now)
        if actual_total_kg <= self.empty_threshold_kg:
            return None
        return AnomalyReport(expected, actual_total_kg, deviation, None, now)
