"""Two-stage scan verification.

Stage one answers "is this a legitimate scan": card registered, student
enrolled in the active course, time inside the slot, checked in that order
with the first failure winning. Stage two answers "is a plausible body in the
chair": the seated weight must fall inside the student's reference band. The
measured weight is compared and discarded; no decision value ever carries it.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from typing import Callable, Union

from .refstats import ReferenceTable
from .roster import WEEKDAYS, RosterStore, Student
from .seat import SEATED_MIN_KG, ChairState, Seated


class StageOne(Enum):
    WELCOME = "Welcome"
    NOT_FOUND = "NotFound"
    WRONG_COURSE = "WrongCourse"
    WRONG_TIME = "WrongTime"


@dataclass(frozen=True)
class StageOneResult:
    outcome: StageOne
    student: Student | None = None


class Presence(Enum):
    CONFIRMED = "Confirmed"
    NOT_SEATED = "NotSeated"
    OUT_OF_BAND = "OutOfBand"
    NO_REFERENCE_BAND = "NoReferenceBand"


class LcdCode(Enum):
    SYSTEM_READY = "SystemReady"
    WELCOME = "Welcome"
    STUDENT_NOT_FOUND = "StudentNotFound"
    WRONG_TIME = "WrongTime"
    WRONG_COURSE = "WrongCourse"
    ATTENDANCE_CONFIRMED = "AttendanceConfirmed"


# Device display strings; ASCII, at most 16 chars per line of the 16x2 panel.
LCD_TEXT = {
    LcdCode.SYSTEM_READY: "SISTEM HAZIR",
    LcdCode.WELCOME: "HOS GELDINIZ",
    LcdCode.STUDENT_NOT_FOUND: "OGRENCI YOK",
    LcdCode.WRONG_TIME: "YANLIS SAAT",
    LcdCode.WRONG_COURSE: "YANLIS DERS",
    LcdCode.ATTENDANCE_CONFIRMED: "YOKLAMA ALINDI",
}


@dataclass(frozen=True)
class PresencePolicy:
    """Band construction: mean +/- k*sigma, fixed half-width for degenerate cells."""

    k_sigma: float = 2.0
    fallback_halfwidth_kg: float = 15.0
    require_seated: bool = True

    def __post_init__(self) -> None:
        if self.k_sigma <= 0 or self.fallback_halfwidth_kg <= 0:
            raise ValueError("k_sigma and fallback_halfwidth_kg must be positive")


@dataclass(frozen=True)
class ScanContext:
    uid: str
    now: datetime
    chair_id: str
    active_course: str | None


@dataclass(frozen=True)
class ScanDecision:
    """Outcome of one scan. Carries no weight field, by design."""

    stage_one: StageOne
    presence: Presence | None
    lcd: LcdCode
    record_created: bool


_STAGE_ONE_LCD = {
    StageOne.NOT_FOUND: LcdCode.STUDENT_NOT_FOUND,
    StageOne.WRONG_TIME: LcdCode.WRONG_TIME,
    StageOne.WRONG_COURSE: LcdCode.WRONG_COURSE,
}


def verify_stage_one(ctx: ScanContext, roster: RosterStore) -> StageOneResult:
    """Registered -> enrolled -> in-slot, first failure determining the outcome.

    A scan with no active course (no open session) reads as WrongTime: the
    device cannot distinguish "no session" from "outside the slot".
    """
    student = roster.find_by_uid(ctx.uid)
    if student is None:
        return StageOneResult(StageOne.NOT_FOUND)
    if ctx.active_course is None:
        return StageOneResult(StageOne.WRONG_TIME)
    if not roster.is_enrolled(ctx.active_course, ctx.uid):
        return StageOneResult(StageOne.WRONG_COURSE)
    course = roster.courses.get(ctx.active_course)
    if course is None:
        return StageOneResult(StageOne.WRONG_COURSE)
    weekday = WEEKDAYS[ctx.now.weekday()]
    if not course.covers(weekday, ctx.now.time()):
        return StageOneResult(StageOne.WRONG_TIME)
    return StageOneResult(StageOne.WELCOME, student)


def reference_band(
    student: Student, table: ReferenceTable, policy: PresencePolicy
) -> tuple[float, float] | None:
    """Expected weight interval for the student, or None without a table cell.

    Degenerate cells (sigma 0 or a single sample) widen to the fallback
    half-width. With require_seated the lower edge never drops below the
    seated threshold, since sub-threshold weights read as not seated anyway.
    """
    cell = table.cell(student.age, student.gender)
    if cell is None:
        return None
    if cell.std_kg > 0 and cell.count >= 2:
        half = policy.k_sigma * cell.std_kg
    else:
        half = policy.fallback_halfwidth_kg
    lo = cell.mean_kg - half
    hi = cell.mean_kg + half
    if policy.require_seated:
        lo = max(lo, SEATED_MIN_KG)
    return lo, hi


def verify_presence(
    chair_state: ChairState,
    band: tuple[float, float] | None,
    policy: PresencePolicy,
) -> Presence:
    if not isinstance(chair_state, Seated):
        return Presence.NOT_SEATED
    if band is None:
        return Presence.NO_REFERENCE_BAND
    lo, hi = band
    if lo <= chair_state.kg <= hi:
        return Presence.CONFIRMED
    return Presence.OUT_OF_BAND


ChairReader = Union[ChairState, Callable[[], ChairState]]


def decide(
    ctx: ScanContext,
    roster: RosterStore,
    table: ReferenceTable,
    chair_state: ChairReader,
    policy: PresencePolicy,
) -> ScanDecision:
    """Compose both stages into one decision.

    ``chair_state`` may be a callable so the chair is only read once stage one
    has passed; failed identity checks never touch the weight signal.
    """
    stage_one = verify_stage_one(ctx, roster)
    if stage_one.outcome is not StageOne.WELCOME:
        return ScanDecision(
            stage_one=stage_one.outcome,
            presence=None,
            lcd=_STAGE_ONE_LCD[stage_one.outcome],
            record_created=False,
        )

    state = chair_state() if callable(chair_state) else chair_state
    assert stage_one.student is not None
    band = reference_band(stage_one.student, table, policy)
    presence = verify_presence(state, band, policy)
    confirmed = presence is Presence.CONFIRMED
    return ScanDecision(
        stage_one=StageOne.WELCOME,
        presence=presence,
        lcd=LcdCode.ATTENDANCE_CONFIRMED if confirmed else LcdCode.WELCOME,
        record_created=confirmed,
    )
