"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field

from .refstats import Gender
from .roster import Course, Student


class StudentIn(BaseModel):
    uid: str
    name: str
    surname: str
    class_label: str
    age: int = Field(ge=0)
    gender: Gender

    def to_domain(self) -> Student:
        return Student(
            uid=self.uid,
            name=self.name,
            surname=self.surname,
            class_label=self.class_label,
            age=self.age,
            gender=self.gender,
        )


class StudentPatch(BaseModel):
    name: str | None = None
    surname: str | None = None
    class_label: str | None = None
    age: int | None = Field(default=None, ge=0)
    gender: Gender | None = None


class StudentOut(BaseModel):
    uid: str
    name: str
    surname: str
    class_label: str
    age: int
    gender: Gender
    outside_reference_range: bool

    @classmethod
    def from_domain(cls, student: Student) -> "StudentOut":
        return cls(
            uid=student.uid,
            name=student.name,
            surname=student.surname,
            class_label=student.class_label,
            age=student.age,
            gender=student.gender,
            outside_reference_range=not student.in_reference_range,
        )


class CourseIn(BaseModel):
    course_id: str
    title: str
    weekday: str
    start: str
    end: str


class CourseOut(BaseModel):
    course_id: str
    title: str
    weekday: str
    start: str
    end: str
    active: bool

    @classmethod
    def from_domain(cls, course: Course, active: bool) -> "CourseOut":
        return cls(
            course_id=course.course_id,
            title=course.title,
            weekday=course.weekday,
            start=course.start.strftime("%H:%M"),
            end=course.end.strftime("%H:%M"),
            active=active,
        )


class EnrollmentIn(BaseModel):
    course_id: str
    uid: str


class SessionIn(BaseModel):
    course_id: str


class SessionOut(BaseModel):
    session_id: str
    course_id: str
    opened_at: str
    state: str
    checked_in: int


class SessionStatusOut(BaseModel):
    session: SessionOut | None
    now: str
    active_course_id: str | None


class UpdateOut(BaseModel):
    uid: str
    modified_fields: list[str]


class AttendanceRowOut(BaseModel):
    timestamp: str
    course_id: str
    uid: str
    status: str
    student: str | None


class MessageOut(BaseModel):
    detail: str
