"""Session lifecycle, attendance persistence, and the host event stream.

The manager is the single serialized mutation path: device frames and API
commands funnel through it in arrival order. Confirmed attendance appends one
CSV row (`timestamp,course_id,uid,status`), the pool gains the student's
reference mean, and subscribers see a stream event; nothing else is persisted.
Measured weights stay in memory for the comparison and are dropped.
"""

from __future__ import annotations

import asyncio
import csv
import io
import logging
import os
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from pathlib import Path

from .errors import ConflictError, NoReferenceError, NotFoundError, WrongTimeError
from .pool import WeightPool
from .refstats import ReferenceTable
from .roster import WEEKDAYS, RosterStore
from .seat import EMPTY_MAX_KG, SEATED_MIN_KG, ChairState, Empty, Seated, Transient
from .verify import (
    LCD_TEXT,
    LcdCode,
    Presence,
    PresencePolicy,
    ScanContext,
    StageOne,
    decide,
)
from .wire import (
    Ack,
    EventToken,
    Frame,
    LcdCommand,
    ScanEvent,
    WeightEvent,
)

logger = logging.getLogger(__name__)

ATTENDANCE_CSV = "attendance.csv"
ATTENDANCE_HEADER = ["timestamp", "course_id", "uid", "status"]
STATUS_ATTENDED = EventToken.KATILDI.english  # "ATTENDED"


@dataclass(frozen=True)
class AttendanceRecord:
    """One confirmed check-in. Deliberately has no weight field."""

    timestamp: datetime
    course_id: str
    uid: str
    status: str = STATUS_ATTENDED

    def csv_row(self) -> list[str]:
        return [
            self.timestamp.isoformat(timespec="seconds"),
            self.course_id,
            self.uid,
            self.status,
        ]


class AttendanceLog:
    """Append-only CSV log with line-atomic flushes.

    Each record is written as one complete line and flushed to disk before the
    call returns, so a crash can lose at most a partial final line; reload
    drops such a tail with a warning and keeps every prior row.
    """

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self.records: list[AttendanceRecord] = []
        self._recovered_warnings = 0
        fresh = not self.path.exists() or self.path.stat().st_size == 0
        if not fresh:
            self._recover()
            # Recovery may have truncated everything (file was one partial line).
            fresh = self.path.stat().st_size == 0
        self._fh = open(self.path, "a", encoding="utf-8", newline="")
        if fresh:
            self._write_line(ATTENDANCE_HEADER)

    def _recover(self) -> None:
        raw = self.path.read_bytes()
        if raw and not raw.endswith(b"\n"):
            keep = raw.rfind(b"\n") + 1
            tail = raw[keep:]
            self._recovered_warnings += 1
            logger.warning(
                "%s: discarding truncated final line %r", self.path.name, tail[:80]
            )
            with open(self.path, "r+b") as fh:
                fh.truncate(keep)
            raw = raw[:keep]
        records, warnings = _parse_attendance_rows(raw, self.path.name)
        self.records.extend(records)
        self._recovered_warnings += warnings

    @property
    def recovered_warnings(self) -> int:
        return self._recovered_warnings

    def append(self, record: AttendanceRecord) -> None:
        self._write_line(record.csv_row())
        self.records.append(record)

    def _write_line(self, fields: list[str]) -> None:
        buffer = io.StringIO()
        csv.writer(buffer, lineterminator="\n").writerow(fields)
        self._fh.write(buffer.getvalue())
        self._fh.flush()
        os.fsync(self._fh.fileno())

    def rows_for_course(self, course_id: str) -> list[AttendanceRecord]:
        rows = [r for r in self.records if r.course_id == course_id]
        rows.sort(key=lambda r: r.timestamp)
        return rows

    def close(self) -> None:
        self._fh.close()


def _parse_attendance_rows(
    raw: bytes, source_name: str
) -> tuple[list[AttendanceRecord], int]:
    records: list[AttendanceRecord] = []
    warnings = 0
    for index, line in enumerate(raw.decode("utf-8").splitlines()):
        if index == 0 and line == ",".join(ATTENDANCE_HEADER):
            continue
        fields = next(csv.reader(io.StringIO(line)), None)
        if not fields or len(fields) != len(ATTENDANCE_HEADER):
            warnings += 1
            logger.warning("%s: skipping malformed row %r", source_name, line[:80])
            continue
        try:
            record = AttendanceRecord(
                timestamp=datetime.fromisoformat(fields[0]),
                course_id=fields[1],
                uid=fields[2],
                status=fields[3],
            )
        except ValueError:
            warnings += 1
            logger.warning("%s: skipping malformed row %r", source_name, line[:80])
            continue
        records.append(record)
    return records, warnings


def read_attendance(path: str | Path) -> list[AttendanceRecord]:
    """Read an attendance CSV without taking a writer handle.

    Tolerates a truncated final line (ignored), matching AttendanceLog recovery.
    """
    path = Path(path)
    if not path.exists():
        return []
    raw = path.read_bytes()
    if raw and not raw.endswith(b"\n"):
        raw = raw[: raw.rfind(b"\n") + 1]
    records, _ = _parse_attendance_rows(raw, path.name)
    return records


class EventKind(str, Enum):
    SCAN_DECISION = "scan_decision"
    ANOMALY = "anomaly"
    SEAT_TRANSITION = "seat_transition"
    LCD_MIRROR = "lcd_mirror"
    SESSION_CHANGE = "session_change"
    ROSTER_CHANGE = "roster_change"


@dataclass(frozen=True)
class StreamEvent:
    event_id: int
    kind: EventKind
    at: str
    payload: dict

    def to_json(self) -> dict:
        return {
            "event_id": self.event_id,
            "kind": self.kind.value,
            "at": self.at,
            "payload": self.payload,
        }


class EventStream:
    """Fan-out event log with monotonically increasing ids.

    Subscribers get at-least-once delivery within a connection; consumers
    de-duplicate on event_id. The full history is kept so a reconnecting
    console can resume from its last seen id.
    """

    def __init__(self) -> None:
        self.events: list[StreamEvent] = []
        self._next_id = 1
        self._queues: list[asyncio.Queue] = []

    def emit(self, kind: EventKind, at: datetime, payload: dict) -> StreamEvent:
        event = StreamEvent(
            event_id=self._next_id,
            kind=kind,
            at=at.isoformat(timespec="seconds"),
            payload=payload,
        )
        self._next_id += 1
        self.events.append(event)
        for queue in list(self._queues):
            queue.put_nowait(event)
        return event

    def since(self, after_id: int) -> list[StreamEvent]:
        return [e for e in self.events if e.event_id > after_id]

    def subscribe(self) -> asyncio.Queue:
        queue: asyncio.Queue = asyncio.Queue()
        self._queues.append(queue)
        return queue

    def unsubscribe(self, queue: asyncio.Queue) -> None:
        if queue in self._queues:
            self._queues.remove(queue)


class SessionState(str, Enum):
    OPEN = "Open"
    CLOSED = "Closed"


@dataclass
class Session:
    session_id: str
    course_id: str
    opened_at: datetime
    state: SessionState = SessionState.OPEN
    pool: WeightPool = field(default_factory=WeightPool)
    seen_uids: set[str] = field(default_factory=set)


@dataclass
class _HostChairView:
    """What the host knows about a chair, reconstructed from weight events."""

    kg: float = 0.0
    state: ChairState = field(default_factory=Empty)


class SessionManager:
    """Serialized orchestration of roster, verification, pool, and the log."""

    def __init__(
        self,
        roster: RosterStore,
        table: ReferenceTable,
        log: AttendanceLog,
        events: EventStream | None = None,
        policy: PresencePolicy | None = None,
        pool_tolerance: float = 0.10,
        scan_chair: str | None = None,
        known_chairs: set[str] | None = None,
    ) -> None:
        self.roster = roster
        self.table = table
        self.log = log
        self.events = events if events is not None else EventStream()
        self.policy = policy if policy is not None else PresencePolicy()
        self.pool_tolerance = pool_tolerance
        # The chair checked on a scan. Defaults to the only chair seen so far;
        # multi-chair deployments set it explicitly (one reader per station).
        self.scan_chair = scan_chair
        # When set, weight frames for undeclared chairs are warned and dropped.
        self.known_chairs = known_chairs
        self.session: Session | None = None
        self.chairs: dict[str, _HostChairView] = {}
        self._session_counter = 0
        self._last_anomaly_key: tuple[float, float] | None = None

    # -- session lifecycle ---------------------------------------------------

    def start_session(self, course_id: str, now: datetime) -> Session:
        if self.session is not None and self.session.state is SessionState.OPEN:
            raise ConflictError(f"session {self.session.session_id} already open")
        course = self.roster.courses.get(course_id)
        if course is None:
            raise NotFoundError(f"no course {course_id}")
        active = self.roster.course_active_at(WEEKDAYS[now.weekday()], now.time())
        if active is None or active.course_id != course_id:
            raise WrongTimeError(
                f"course {course_id} is not in its time slot at {now.isoformat()}"
            )
        self._session_counter += 1
        self.session = Session(
            session_id=f"S{self._session_counter:04d}",
            course_id=course_id,
            opened_at=now,
            pool=WeightPool(tolerance=self.pool_tolerance),
        )
        self._last_anomaly_key = None
        self.events.emit(
            EventKind.SESSION_CHANGE,
            now,
            {
                "state": "open",
                "session_id": self.session.session_id,
                "course_id": course_id,
            },
        )
        return self.session

    def close_session(self, now: datetime) -> Session:
        if self.session is None or self.session.state is not SessionState.OPEN:
            raise NotFoundError("no open session")
        self.session.state = SessionState.CLOSED
        self.events.emit(
            EventKind.SESSION_CHANGE,
            now,
            {
                "state": "closed",
                "session_id": self.session.session_id,
                "course_id": self.session.course_id,
            },
        )
        return self.session

    # -- frame handling --------------------------------------------------------

    def handle_frame(self, frame: Frame, now: datetime) -> list[Frame]:
        """Process one device frame; returns the host's reply frames."""
        if isinstance(frame, ScanEvent):
            replies = self._handle_scan(frame.uid, now)
            replies.append(Ack(seq=frame.seq))
            return replies
        if isinstance(frame, WeightEvent):
            self._handle_weight(frame.chair_id, frame.grams, now)
            return [Ack(seq=frame.seq)]
        # Acks/commands from the device side carry no host state.
        return []

    def _chair_for_scan(self) -> str | None:
        if self.scan_chair is not None:
            return self.scan_chair
        if len(self.chairs) == 1:
            return next(iter(self.chairs))
        return None

    def _read_chair(self, chair_id: str | None) -> ChairState:
        if chair_id is None:
            return Empty()
        view = self.chairs.get(chair_id)
        return view.state if view is not None else Empty()

    def _handle_scan(self, uid: str, now: datetime) -> list[Frame]:
        if self.session is None or self.session.state is not SessionState.OPEN:
            # Out-of-session reads as wrong time from the device's viewpoint.
            self.events.emit(
                EventKind.SCAN_DECISION,
                now,
                {
                    "uid": uid,
                    "stage_one": StageOne.WRONG_TIME.value,
                    "presence": None,
                    "lcd": LcdCode.WRONG_TIME.value,
                    "record_created": False,
                    "duplicate": False,
                    "token": EventToken.YANLIS_SAAT.value,
                    "reason": "session_closed",
                },
            )
            return [self._lcd(LcdCode.WRONG_TIME, now=now)]

        session = self.session
        chair_id = self._chair_for_scan()

        def chair_reader() -> ChairState:
            return self._read_chair(chair_id)

        ctx = ScanContext(
            uid=uid, now=now, chair_id=chair_id or "", active_course=session.course_id
        )
        decision = decide(ctx, self.roster, self.table, chair_reader, self.policy)

        duplicate = decision.record_created and uid in session.seen_uids
        created = decision.record_created and not duplicate
        token: EventToken | None = None
        student = self.roster.find_by_uid(uid)

        if created:
            record = AttendanceRecord(
                timestamp=now, course_id=session.course_id, uid=uid
            )
            self.log.append(record)
            session.seen_uids.add(uid)
            token = EventToken.KATILDI
            try:
                assert student is not None
                session.pool.add_member(student, self.table)
            except (ConflictError, NoReferenceError) as exc:
                logger.warning("pool: %s", exc)
        elif decision.stage_one is StageOne.WRONG_TIME:
            token = EventToken.YANLIS_SAAT

        payload = {
            "uid": uid,
            "student": f"{student.name} {student.surname}" if student else None,
            "stage_one": decision.stage_one.value,
            "presence": decision.presence.value if decision.presence else None,
            "lcd": decision.lcd.value,
            "record_created": created,
            "duplicate": duplicate,
            "token": token.value if token else None,
        }
        self.events.emit(EventKind.SCAN_DECISION, now, payload)

        arg = _lcd_arg(student.name) if student else ""
        replies: list[Frame] = []
        if decision.stage_one is StageOne.WELCOME:
            # Identity verified: greet first, confirmation follows if granted.
            replies.append(self._lcd(LcdCode.WELCOME, now, arg=arg))
            if decision.lcd is not LcdCode.WELCOME:
                replies.append(self._lcd(decision.lcd, now, arg=arg))
        else:
            replies.append(self._lcd(decision.lcd, now, arg=arg))
        if created:
            self._compare_pool(now)
        return replies

    def _handle_weight(self, chair_id: str, grams: int, now: datetime) -> None:
        if self.known_chairs is not None and chair_id not in self.known_chairs:
            logger.warning("weight frame for unknown chair %r dropped", chair_id)
            return
        kg = grams / 1000.0
        view = self.chairs.setdefault(chair_id, _HostChairView())
        view.kg = kg
        t_s = now.timestamp()
        if kg >= SEATED_MIN_KG:
            view.state = Seated(kg=kg, since=t_s)
            label = "seated"
        elif kg >= EMPTY_MAX_KG:
            view.state = Transient(entered_at=t_s, rechecks_done=0, last_kg=kg)
            label = "transient"
        else:
            view.state = Empty()
            label = "empty"
        # Console payloads stay weight-free: occupancy only, no kilograms.
        self.events.emit(
            EventKind.SEAT_TRANSITION, now, {"chair_id": chair_id, "state": label}
        )
        self._compare_pool(now)

    def _compare_pool(self, now: datetime) -> None:
        if self.session is None or self.session.state is not SessionState.OPEN:
            return
        total = sum(
            view.kg for view in self.chairs.values() if isinstance(view.state, Seated)
        )
        report = self.session.pool.compare(total, now)
        if report is None:
            self._last_anomaly_key = None
            return
        key = (report.expected_kg, report.actual_kg)
        if key == self._last_anomaly_key:
            return
        self._last_anomaly_key = key
        self.events.emit(EventKind.ANOMALY, now, report.to_json())

    def _lcd(self, code: LcdCode, now: datetime, arg: str = "") -> LcdCommand:
        command = LcdCommand(code=code, arg=arg)
        self.events.emit(
            EventKind.LCD_MIRROR,
            now,
            {"code": code.value, "text": LCD_TEXT[code], "arg": arg},
        )
        return command

    # -- reporting -------------------------------------------------------------

    def list_attendance(self, course_id: str) -> list[AttendanceRecord]:
        if course_id not in self.roster.courses:
            raise NotFoundError(f"no course {course_id}")
        return self.log.rows_for_course(course_id)

    def report(self, course_id: str) -> list[dict]:
        """Attendance rows joined with student names, ordered by timestamp."""
        rows = []
        for record in self.list_attendance(course_id):
            student = self.roster.find_by_uid(record.uid)
            rows.append(
                {
                    "timestamp": record.timestamp.isoformat(timespec="seconds"),
                    "course_id": record.course_id,
                    "uid": record.uid,
                    "status": record.status,
                    "student": f"{student.name} {student.surname}" if student else None,
                }
            )
        return rows


def _lcd_arg(text: str) -> str:
    """Fold arbitrary text into the LCD arg charset, 16 chars max."""
    folded = []
    for ch in text.upper():
        if ch in "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 _.-":
            folded.append(ch)
    return "".join(folded)[:16]
