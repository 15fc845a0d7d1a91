"""Students, courses, and enrollments with CSV-backed persistence.

Four flat files keep the store portable: students.csv, courses.csv,
enrollments.csv (attendance.csv is owned by the session layer). All mutations
go through a single store instance; persistence is explicit via save().
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, replace
from datetime import time
from pathlib import Path

from .errors import AmbiguityError, ConflictError, NotFoundError, ValidationError
from .refstats import MAX_AGE, MIN_AGE, Gender

UID_RE = re.compile(r"^[0-9A-F]{8}$")

WEEKDAYS = ("MON", "TUE", "WED", "THU", "FRI", "SAT", "SUN")


def normalize_uid(text: str) -> str:
    """Canonical card uid: 8 uppercase hex chars (4-byte id)."""
    uid = text.strip().upper()
    if not UID_RE.match(uid):
        raise ValidationError(f"malformed card uid: {text!r} (want 8 hex chars)")
    return uid


def parse_weekday(token: str) -> str:
    day = token.strip().upper()
    if day not in WEEKDAYS:
        raise ValidationError(f"unknown weekday: {token!r}")
    return day


def parse_hhmm(token: str) -> time:
    match = re.match(r"^(\d{2}):(\d{2})$", token.strip())
    if not match:
        raise ValidationError(f"bad time (want HH:MM): {token!r}")
    hour, minute = int(match.group(1)), int(match.group(2))
    if hour > 23 or minute > 59:
        raise ValidationError(f"time out of range: {token!r}")
    return time(hour, minute)


@dataclass(frozen=True)
class Student:
    uid: str
    name: str
    surname: str
    class_label: str
    age: int
    gender: Gender

    def __post_init__(self) -> None:
        object.__setattr__(self, "uid", normalize_uid(self.uid))
        if self.age < 0:
            raise ValidationError(f"negative age: {self.age}")

    @property
    def in_reference_range(self) -> bool:
        """False means no reference band exists; verification will flag it."""
        return MIN_AGE <= self.age <= MAX_AGE


@dataclass(frozen=True)
class Course:
    course_id: str
    title: str
    weekday: str
    start: time
    end: time

    def __post_init__(self) -> None:
        if not self.course_id or "," in self.course_id:
            raise ValidationError(f"bad course id: {self.course_id!r}")
        if self.weekday not in WEEKDAYS:
            raise ValidationError(f"unknown weekday: {self.weekday!r}")
        if self.start >= self.end:
            raise ValidationError(
                f"course {self.course_id}: start {self.start} not before end {self.end}"
            )

    def covers(self, weekday: str, at: time) -> bool:
        """Slot membership is inclusive of start, exclusive of end."""
        return self.weekday == weekday and self.start <= at < self.end


STUDENTS_CSV = "students.csv"
COURSES_CSV = "courses.csv"
ENROLLMENTS_CSV = "enrollments.csv"

_GENDER_SHORT = {Gender.MALE: "M", Gender.FEMALE: "F"}
_GENDER_FROM_SHORT = {"M": Gender.MALE, "F": Gender.FEMALE}


class RosterStore:
    """Single-writer store over students, courses, and enrollments."""

    def __init__(self) -> None:
        self.students: dict[str, Student] = {}
        self.courses: dict[str, Course] = {}
        self.enrollments: set[tuple[str, str]] = set()

    # -- students ----------------------------------------------------------

    def add_student(self, student: Student) -> None:
        if student.uid in self.students:
            raise ConflictError(f"student {student.uid} already exists")
        self.students[student.uid] = student

    def find_by_uid(self, uid: str) -> Student | None:
        return self.students.get(uid)

    def update_student(self, uid: str, /, **changes) -> set[str]:
        """Apply a partial update; returns the set of field names that changed."""
        student = self.students.get(uid)
        if student is None:
            raise NotFoundError(f"no student {uid}")
        if "uid" in changes:
            raise ValidationError("uid is immutable")
        allowed = {"name", "surname", "class_label", "age", "gender"}
        unknown = set(changes) - allowed
        if unknown:
            raise ValidationError(f"unknown student fields: {sorted(unknown)}")
        modified = {
            name for name, value in changes.items() if getattr(student, name) != value
        }
        if modified:
            self.students[uid] = replace(student, **changes)
        return modified

    def delete_student(self, uid: str) -> None:
        """Remove the student and every enrollment that references them."""
        if uid not in self.students:
            raise NotFoundError(f"no student {uid}")
        del self.students[uid]
        self.enrollments = {(c, u) for (c, u) in self.enrollments if u != uid}

    # -- courses -----------------------------------------------------------

    def add_course(self, course: Course) -> None:
        if course.course_id in self.courses:
            raise ConflictError(f"course {course.course_id} already exists")
        self._reject_overlap(course)
        self.courses[course.course_id] = course

    def delete_course(self, course_id: str) -> None:
        if course_id not in self.courses:
            raise NotFoundError(f"no course {course_id}")
        del self.courses[course_id]
        self.enrollments = {(c, u) for (c, u) in self.enrollments if c != course_id}

    def _reject_overlap(self, course: Course) -> None:
        # A unique active course per instant requires pairwise-disjoint slots.
        for other in self.courses.values():
            if other.weekday != course.weekday:
                continue
            if course.start < other.end and other.start < course.end:
                raise AmbiguityError(
                    f"course {course.course_id} overlaps {other.course_id} "
                    f"on {course.weekday}"
                )

    def course_active_at(self, weekday: str, at: time) -> Course | None:
        for course in self.courses.values():
            if course.covers(weekday, at):
                return course
        return None

    # -- enrollments -------------------------------------------------------

    def enroll(self, course_id: str, uid: str) -> None:
        if course_id not in self.courses:
            raise NotFoundError(f"no course {course_id}")
        if uid not in self.students:
            raise NotFoundError(f"no student {uid}")
        key = (course_id, uid)
        if key in self.enrollments:
            raise ConflictError(f"{uid} already enrolled in {course_id}")
        self.enrollments.add(key)

    def remove_from_course(self, course_id: str, uid: str) -> None:
        key = (course_id, uid)
        if key not in self.enrollments:
            raise NotFoundError(f"{uid} not enrolled in {course_id}")
        self.enrollments.remove(key)

    def is_enrolled(self, course_id: str, uid: str) -> bool:
        return (course_id, uid) in self.enrollments

    def students_in_course(self, course_id: str) -> list[Student]:
        if course_id not in self.courses:
            raise NotFoundError(f"no course {course_id}")
        uids = sorted(u for (c, u) in self.enrollments if c == course_id)
        return [self.students[u] for u in uids]

    # -- persistence -------------------------------------------------------

    def save(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        with open(directory / STUDENTS_CSV, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["uid", "name", "surname", "class", "age", "gender"])
            for student in sorted(self.students.values(), key=lambda s: s.uid):
                writer.writerow(
                    [
                        student.uid,
                        student.name,
                        student.surname,
                        student.class_label,
                        student.age,
                        _GENDER_SHORT[student.gender],
                    ]
                )
        with open(directory / COURSES_CSV, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["course_id", "title", "weekday", "start", "end"])
            for course in sorted(self.courses.values(), key=lambda c: c.course_id):
                writer.writerow(
                    [
                        course.course_id,
                        course.title,
                        course.weekday,
                        course.start.strftime("%H:%M"),
                        course.end.strftime("%H:%M"),
                    ]
                )
        with open(directory / ENROLLMENTS_CSV, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["course_id", "uid"])
            for course_id, uid in sorted(self.enrollments):
                writer.writerow([course_id, uid])

    @classmethod
    def load(cls, directory: str | Path) -> "RosterStore":
        directory = Path(directory)
        store = cls()
        students_path = directory / STUDENTS_CSV
        if students_path.exists():
            for row in _read_csv(students_path, 6):
                gender = _GENDER_FROM_SHORT.get(row[5].strip().upper())
                if gender is None:
                    raise ValidationError(f"bad gender {row[5]!r} in {STUDENTS_CSV}")
                store.add_student(
                    Student(row[0], row[1], row[2], row[3], _int_field(row[4]), gender)
                )
        courses_path = directory / COURSES_CSV
        if courses_path.exists():
            for row in _read_csv(courses_path, 5):
                store.add_course(
                    Course(
                        row[0],
                        row[1],
                        parse_weekday(row[2]),
                        parse_hhmm(row[3]),
                        parse_hhmm(row[4]),
                    )
                )
        enrollments_path = directory / ENROLLMENTS_CSV
        if enrollments_path.exists():
            for row in _read_csv(enrollments_path, 2):
                try:
                    store.enroll(row[0], row[1])
                except (NotFoundError, ConflictError) as exc:
                    # A dangling or duplicate enrollment is a bad file, not a
                    # runtime condition.
                    raise ValidationError(f"{ENROLLMENTS_CSV}: {exc}") from None
        return store


def _read_csv(path: Path, width: int) -> list[list[str]]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        rows = list(reader)
    if not rows:
        return []
    body = rows[1:]  # header row
    for index, row in enumerate(body):
        if len(row) != width:
            raise ValidationError(f"{path.name}: row {index + 1} has {len(row)} fields")
    return body


def _int_field(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ValidationError(f"bad integer field: {text!r}") from None
