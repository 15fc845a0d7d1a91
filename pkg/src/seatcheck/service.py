"""HTTP/JSON service: roster management, session control, reports, events.

The FastAPI app wraps one SessionManager (and optionally one simulated
classroom). All mutation goes through the manager's serialized path; reads
serve snapshots. `GET /events` is a server-sent-event stream with
monotonically increasing ids so consoles can resume after a reconnect.
"""

from __future__ import annotations

import asyncio
import json
import logging
from contextlib import asynccontextmanager
from dataclasses import replace
from datetime import datetime
from pathlib import Path

from fastapi import FastAPI, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, StreamingResponse

from . import schemas
from .errors import (
    ConflictError,
    DomainError,
    NotFoundError,
    SeatcheckError,
    TransportBusyError,
    ValidationError,
    WrongTimeError,
)
from .refstats import ReferenceTable, table_from_csv, table_to_json
from .roster import WEEKDAYS, Course, RosterStore, parse_hhmm, parse_weekday
from .runtime import ClassroomRuntime
from .session import (
    ATTENDANCE_CSV,
    AttendanceLog,
    EventKind,
    EventStream,
    Session,
    SessionManager,
    SessionState,
)
from .sim import load_scenario
from .verify import PresencePolicy
from .wire import EventToken

logger = logging.getLogger(__name__)

REFERENCE_TABLE_CSV = "table.csv"


class ServiceContext:
    """Everything the routes need, owned by the app instance."""

    def __init__(
        self,
        roster_dir: str | Path,
        data_dir: str | Path | None = None,
        scenario_path: str | Path | None = None,
        seed: int | None = None,
        table_path: str | Path | None = None,
        policy: PresencePolicy | None = None,
        pace_hz: float = 10.0,
    ) -> None:
        self.roster_dir = Path(roster_dir)
        self.data_dir = Path(data_dir) if data_dir is not None else self.roster_dir
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.pace_hz = pace_hz

        self.roster = RosterStore.load(self.roster_dir)
        self.table = self._load_table(table_path)
        self.events = EventStream()
        self.runtime: ClassroomRuntime | None = None

        if scenario_path is not None:
            scenario = load_scenario(Path(scenario_path))
            if seed is not None:
                scenario = replace(scenario, seed=seed)
            self.runtime = ClassroomRuntime(
                roster=self.roster,
                table=self.table,
                scenario=scenario,
                data_dir=self.data_dir,
                policy=policy,
                events=self.events,
            )
            self.manager = self.runtime.manager
        else:
            self.manager = SessionManager(
                roster=self.roster,
                table=self.table,
                log=AttendanceLog(self.data_dir / ATTENDANCE_CSV),
                events=self.events,
                policy=policy,
            )

    def _load_table(self, table_path: str | Path | None) -> ReferenceTable:
        path = Path(table_path) if table_path else self.roster_dir / REFERENCE_TABLE_CSV
        if path.exists():
            return table_from_csv(path.read_text(encoding="utf-8"))
        logger.warning("no reference table at %s; presence bands unavailable", path)
        return ReferenceTable()

    def now(self) -> datetime:
        if self.runtime is not None:
            return self.runtime.clock.now
        return datetime.now()

    def save_roster(self) -> None:
        self.roster.save(self.roster_dir)

    def active_course_id(self) -> str | None:
        now = self.now()
        course = self.roster.course_active_at(WEEKDAYS[now.weekday()], now.time())
        return course.course_id if course else None


def _session_out(session: Session) -> schemas.SessionOut:
    return schemas.SessionOut(
        session_id=session.session_id,
        course_id=session.course_id,
        opened_at=session.opened_at.isoformat(timespec="seconds"),
        state=session.state.value,
        checked_in=len(session.seen_uids),
    )


def create_app(
    roster_dir: str | Path,
    data_dir: str | Path | None = None,
    scenario_path: str | Path | None = None,
    seed: int | None = None,
    table_path: str | Path | None = None,
    policy: PresencePolicy | None = None,
    pace_hz: float = 10.0,
) -> FastAPI:
    ctx = ServiceContext(
        roster_dir=roster_dir,
        data_dir=data_dir,
        scenario_path=scenario_path,
        seed=seed,
        table_path=table_path,
        policy=policy,
        pace_hz=pace_hz,
    )

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        task = None
        if ctx.runtime is not None and ctx.pace_hz > 0:
            task = asyncio.create_task(_pace_simulation(ctx))
        yield
        if task is not None:
            task.cancel()
            try:
                await task
            except asyncio.CancelledError:
                pass

    app = FastAPI(title="seatcheck", lifespan=lifespan)
    app.state.ctx = ctx
    # The console is served separately during development; the API carries no
    # credentials, so a permissive policy is fine here.
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    _register_error_handlers(app)
    _register_routes(app, ctx)
    return app


async def _pace_simulation(ctx: ServiceContext) -> None:
    """Advance the virtual classroom one tick per wall-clock tick period."""
    assert ctx.runtime is not None
    period = 1.0 / ctx.pace_hz
    while True:
        ctx.runtime.tick()
        await asyncio.sleep(period)


_ERROR_STATUS = (
    (NotFoundError, 404),
    (ConflictError, 409),
    (WrongTimeError, 409),
    (TransportBusyError, 503),
    (ValidationError, 400),
    (DomainError, 400),
    (SeatcheckError, 500),
)


def _register_error_handlers(app: FastAPI) -> None:
    async def handle(request: Request, exc: SeatcheckError) -> JSONResponse:
        status = 500
        for klass, code in _ERROR_STATUS:
            if isinstance(exc, klass):
                status = code
                break
        return JSONResponse(status_code=status, content={"detail": str(exc)})

    app.add_exception_handler(SeatcheckError, handle)


def _register_routes(app: FastAPI, ctx: ServiceContext) -> None:
    # -- sessions ----------------------------------------------------------

    @app.post("/sessions", response_model=schemas.SessionOut, status_code=201)
    def start_session(body: schemas.SessionIn):
        session = ctx.manager.start_session(body.course_id, ctx.now())
        return _session_out(session)

    @app.delete("/sessions/current", response_model=schemas.SessionOut)
    def close_session():
        session = ctx.manager.close_session(ctx.now())
        return _session_out(session)

    @app.get("/sessions/current", response_model=schemas.SessionStatusOut)
    def session_status():
        session = ctx.manager.session
        out = None
        if session is not None and session.state is SessionState.OPEN:
            out = _session_out(session)
        return schemas.SessionStatusOut(
            session=out,
            now=ctx.now().isoformat(timespec="seconds"),
            active_course_id=ctx.active_course_id(),
        )

    # -- students ----------------------------------------------------------

    @app.get("/students", response_model=list[schemas.StudentOut])
    def list_students():
        students = sorted(ctx.roster.students.values(), key=lambda s: s.uid)
        return [schemas.StudentOut.from_domain(s) for s in students]

    @app.post("/students", response_model=schemas.StudentOut, status_code=201)
    def add_student(body: schemas.StudentIn):
        student = body.to_domain()
        ctx.roster.add_student(student)
        ctx.save_roster()
        ctx.events.emit(
            EventKind.ROSTER_CHANGE,
            ctx.now(),
            {"op": "student_added", "uid": student.uid, "token": None},
        )
        return schemas.StudentOut.from_domain(student)

    @app.patch("/students/{uid}", response_model=schemas.UpdateOut)
    def update_student(uid: str, body: schemas.StudentPatch):
        changes = {k: v for k, v in body.model_dump().items() if v is not None}
        modified = ctx.roster.update_student(uid, **changes)
        if modified:
            ctx.save_roster()
            ctx.events.emit(
                EventKind.ROSTER_CHANGE,
                ctx.now(),
                {
                    "op": "student_updated",
                    "uid": uid,
                    "token": EventToken.OGRENCI_BILGILERI_GUNCELLENDI.value,
                    "modified_fields": sorted(modified),
                },
            )
        return schemas.UpdateOut(uid=uid, modified_fields=sorted(modified))

    @app.delete("/students/{uid}", response_model=schemas.MessageOut)
    def delete_student(uid: str):
        ctx.roster.delete_student(uid)
        ctx.save_roster()
        ctx.events.emit(
            EventKind.ROSTER_CHANGE,
            ctx.now(),
            {"op": "student_deleted", "uid": uid, "token": None},
        )
        return schemas.MessageOut(detail=f"student {uid} deleted")

    # -- enrollments ---------------------------------------------------------

    @app.post("/enrollments", response_model=schemas.MessageOut, status_code=201)
    def enroll(body: schemas.EnrollmentIn):
        ctx.roster.enroll(body.course_id, body.uid)
        ctx.save_roster()
        ctx.events.emit(
            EventKind.ROSTER_CHANGE,
            ctx.now(),
            {
                "op": "enrolled",
                "course_id": body.course_id,
                "uid": body.uid,
                "token": EventToken.DERS_KAYIT.value,
            },
        )
        return schemas.MessageOut(detail=f"{body.uid} enrolled in {body.course_id}")

    @app.delete("/enrollments", response_model=schemas.MessageOut)
    def unenroll(course_id: str = Query(...), uid: str = Query(...)):
        ctx.roster.remove_from_course(course_id, uid)
        ctx.save_roster()
        ctx.events.emit(
            EventKind.ROSTER_CHANGE,
            ctx.now(),
            {"op": "unenrolled", "course_id": course_id, "uid": uid, "token": None},
        )
        return schemas.MessageOut(detail=f"{uid} removed from {course_id}")

    # -- courses ---------------------------------------------------------------

    @app.get("/courses", response_model=list[schemas.CourseOut])
    def list_courses():
        active_id = ctx.active_course_id()
        courses = sorted(ctx.roster.courses.values(), key=lambda c: c.course_id)
        return [
            schemas.CourseOut.from_domain(c, active=c.course_id == active_id)
            for c in courses
        ]

    @app.post("/courses", response_model=schemas.CourseOut, status_code=201)
    def add_course(body: schemas.CourseIn):
        course = Course(
            course_id=body.course_id,
            title=body.title,
            weekday=parse_weekday(body.weekday),
            start=parse_hhmm(body.start),
            end=parse_hhmm(body.end),
        )
        ctx.roster.add_course(course)
        ctx.save_roster()
        ctx.events.emit(
            EventKind.ROSTER_CHANGE,
            ctx.now(),
            {"op": "course_added", "course_id": course.course_id, "token": None},
        )
        return schemas.CourseOut.from_domain(
            course, active=course.course_id == ctx.active_course_id()
        )

    @app.get("/courses/{course_id}/students", response_model=list[schemas.StudentOut])
    def course_students(course_id: str):
        students = ctx.roster.students_in_course(course_id)
        return [schemas.StudentOut.from_domain(s) for s in students]

    @app.delete("/courses/{course_id}", response_model=schemas.MessageOut)
    def delete_course(course_id: str):
        ctx.roster.delete_course(course_id)
        ctx.save_roster()
        ctx.events.emit(
            EventKind.ROSTER_CHANGE,
            ctx.now(),
            {
                "op": "course_deleted",
                "course_id": course_id,
                "token": EventToken.DERS_SILINDI.value,
            },
        )
        return schemas.MessageOut(detail=f"course {course_id} deleted")

    # -- reports ------------------------------------------------------------

    @app.get("/reports/attendance", response_model=list[schemas.AttendanceRowOut])
    def attendance_report(course: str = Query(...)):
        return [schemas.AttendanceRowOut(**row) for row in ctx.manager.report(course)]

    # -- reference table -------------------------------------------------------

    @app.get("/reference/table")
    def reference_table():
        return table_to_json(ctx.table)

    # -- event stream ------------------------------------------------------

    @app.get("/events")
    async def events(
        request: Request, after: int | None = None, limit: int | None = None
    ):
        """Server-push event stream (SSE). Resumes past ``after`` or the
        Last-Event-ID header; with ``limit`` the stream closes after that many
        events instead of tailing forever."""
        start_after = after
        if start_after is None:
            header = request.headers.get("last-event-id")
            if header is not None and header.isdigit():
                start_after = int(header)
        if start_after is None:
            start_after = 0

        async def generate():
            queue = ctx.events.subscribe()
            last_sent = start_after
            sent = 0
            try:
                if limit is not None and limit <= 0:
                    return
                for event in ctx.events.since(start_after):
                    last_sent = event.event_id
                    yield _sse(event)
                    sent += 1
                    if limit is not None and sent >= limit:
                        return
                while True:
                    if await request.is_disconnected():
                        break
                    try:
                        event = await asyncio.wait_for(queue.get(), timeout=0.5)
                    except asyncio.TimeoutError:
                        yield ": keep-alive\n\n"
                        continue
                    if event.event_id <= last_sent:
                        continue
                    last_sent = event.event_id
                    yield _sse(event)
                    sent += 1
                    if limit is not None and sent >= limit:
                        return
            finally:
                ctx.events.unsubscribe(queue)

        return StreamingResponse(
            generate(),
            media_type="text/event-stream",
            headers={"Cache-Control": "no-cache", "X-Accel-Buffering": "no"},
        )


def _sse(event) -> str:
    data = json.dumps(event.to_json(), separators=(",", ":"), sort_keys=True)
    return f"id: {event.event_id}\nevent: {event.kind.value}\ndata: {data}\n\n"
