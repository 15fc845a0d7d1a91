import re

import pytest

from seatcheck.errors import TransportBusyError
from seatcheck.runtime import ClassroomRuntime
from seatcheck.session import EventKind, read_attendance
from seatcheck.sim import load_scenario
from seatcheck.verify import LcdCode

from conftest import ADA, make_roster, make_table

VALID_SCAN = """\
SEED 42
CHAIR C1 TARE 10000 SCALE 10000 NOISE 0.2
CARD 04A1B2C3
AT 0 CLOCK 2026-03-02T09:05:00
AT 500 SIT C1 70
AT 1500 SCAN 04A1B2C3
"""

PROXY_SCAN = """\
SEED 42
CHAIR C1 TARE 10000 SCALE 10000 NOISE 0.2
CARD 04A1B2C3
AT 0 CLOCK 2026-03-02T09:05:00
AT 1500 SCAN 04A1B2C3
"""


def run_scenario(tmp_path, text, until_ms=3000, start_course="CS101"):
    rt = ClassroomRuntime(
        roster=make_roster(),
        table=make_table(),
        scenario=load_scenario(text),
        data_dir=tmp_path,
    )
    rt.tick(1)  # applies the CLOCK action before the session opens
    if start_course:
        rt.manager.start_session(start_course, rt.clock.now)
    rt.run_until_ms(until_ms)
    rt.close()
    return rt


def test_valid_scan_yields_exactly_one_attended_row(tmp_path):
    rt = run_scenario(tmp_path, VALID_SCAN)
    rows = read_attendance(tmp_path / "attendance.csv")
    assert len(rows) == 1
    assert rows[0].uid == ADA
    assert rows[0].status == "ATTENDED"
    assert rows[0].course_id == "CS101"
    # The device display ends on the attendance confirmation.
    assert rt.device.lcd[0] is LcdCode.ATTENDANCE_CONFIRMED
    assert rt.protocol_warnings == 0


def test_proxy_scan_empty_chair_creates_no_record(tmp_path):
    rt = run_scenario(tmp_path, PROXY_SCAN)
    assert read_attendance(tmp_path / "attendance.csv") == []
    decisions = [
        e for e in rt.manager.events.events if e.kind is EventKind.SCAN_DECISION
    ]
    assert len(decisions) == 1
    assert decisions[0].payload["presence"] == "NotSeated"
    assert decisions[0].payload["record_created"] is False


def test_attendance_csv_carries_no_weight(tmp_path):
    run_scenario(tmp_path, VALID_SCAN)
    content = (tmp_path / "attendance.csv").read_text()
    assert not re.search(r"\d+\.\d+", content)
    assert "kg" not in content.lower()


def test_same_seed_runs_are_identical(tmp_path):
    dir_a = tmp_path / "a"
    dir_b = tmp_path / "b"
    dir_a.mkdir()
    dir_b.mkdir()
    rt_a = run_scenario(dir_a, VALID_SCAN)
    rt_b = run_scenario(dir_b, VALID_SCAN)
    assert (dir_a / "attendance.csv").read_bytes() == (dir_b / "attendance.csv").read_bytes()
    events_a = [e.to_json() for e in rt_a.manager.events.events]
    events_b = [e.to_json() for e in rt_b.manager.events.events]
    assert events_a == events_b


def test_retry_resolved_scan_still_confirms(tmp_path):
    text = VALID_SCAN.replace("AT 1500 SCAN 04A1B2C3", "AT 1500 SCAN 04A1B2C3 FAIL 2")
    run_scenario(tmp_path, text)
    rows = read_attendance(tmp_path / "attendance.csv")
    assert len(rows) == 1


def test_transport_is_exclusive_while_host_owns_it(tmp_path):
    rt = ClassroomRuntime(
        roster=make_roster(),
        table=make_table(),
        scenario=load_scenario(VALID_SCAN),
        data_dir=tmp_path,
    )
    with pytest.raises(TransportBusyError):
        rt.channel.open("ide-serial-monitor")
    rt.close()
    rt.channel.open("ide-serial-monitor")


def test_wrong_course_scan_through_wire(tmp_path):
    text = VALID_SCAN.replace("04A1B2C3", "04D4E5F6")  # Bora, not enrolled in CS102
    rt = ClassroomRuntime(
        roster=make_roster(),
        table=make_table(),
        scenario=load_scenario(text.replace("2026-03-02T09:05:00", "2026-03-03T13:30:00")),
        data_dir=tmp_path,
    )
    rt.tick(1)
    rt.manager.start_session("CS102", rt.clock.now)
    rt.run_until_ms(3000)
    rt.close()
    decisions = [
        e for e in rt.manager.events.events if e.kind is EventKind.SCAN_DECISION
    ]
    assert decisions[0].payload["stage_one"] == "WrongCourse"
    assert rt.device.lcd[0] is LcdCode.WRONG_COURSE
    assert read_attendance(tmp_path / "attendance.csv") == []
