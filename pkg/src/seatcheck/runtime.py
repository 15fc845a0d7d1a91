"""End-to-end wiring: simulated device, byte-stream transport, session host.

Every frame crosses the duplex channel as bytes and is re-framed on the far
side, so chunk boundaries fall wherever the seeded fragmenter puts them --
the same path a real serial link would exercise.
"""

from __future__ import annotations

from pathlib import Path

from .refstats import ReferenceTable
from .roster import RosterStore
from .session import ATTENDANCE_CSV, AttendanceLog, EventStream, SessionManager
from .sim import DeviceSim, Scenario, VirtualClock
from .verify import PresencePolicy
from .wire import DuplexChannel, LineSplitter, ProtocolError, decode, encode

HOST_OWNER = "session-host"


class ClassroomRuntime:
    """Owns the clock and pumps bytes between device and session manager."""

    def __init__(
        self,
        roster: RosterStore,
        table: ReferenceTable,
        scenario: Scenario,
        data_dir: str | Path,
        policy: PresencePolicy | None = None,
        pool_tolerance: float = 0.10,
        events: EventStream | None = None,
        retry_limit: int = 3,
    ) -> None:
        self.clock = VirtualClock()
        self.device = DeviceSim(scenario, retry_limit=retry_limit)
        self.channel = DuplexChannel(seed=scenario.seed)
        self.channel.open(HOST_OWNER)
        data_dir = Path(data_dir)
        data_dir.mkdir(parents=True, exist_ok=True)
        log = AttendanceLog(data_dir / ATTENDANCE_CSV)
        self.manager = SessionManager(
            roster=roster,
            table=table,
            log=log,
            events=events,
            policy=policy,
            pool_tolerance=pool_tolerance,
            scan_chair=scenario.chairs[0].chair_id if scenario.chairs else None,
            known_chairs={spec.chair_id for spec in scenario.chairs},
        )
        self._host_splitter = LineSplitter()
        self._device_splitter = LineSplitter()
        self.protocol_warnings = 0

    def tick(self, ticks: int = 1) -> None:
        for _ in range(ticks):
            for frame in self.device.tick(self.clock):
                self.channel.device_to_host.write(encode(frame))
            self._pump()

    def run_until_ms(self, until_ms: int) -> None:
        while self.device.t_ms < until_ms:
            self.tick()

    def _pump(self) -> None:
        # Device -> host: fragmented chunks, host-side line reassembly.
        while True:
            chunk = self.channel.device_to_host.read()
            if not chunk:
                break
            for line in self._host_splitter.feed(chunk):
                try:
                    frame = decode(line)
                except ProtocolError:
                    self.protocol_warnings += 1
                    continue
                for reply in self.manager.handle_frame(frame, now=self.clock.now):
                    self.channel.host_to_device.write(encode(reply))
        # Host -> device.
        while True:
            chunk = self.channel.host_to_device.read()
            if not chunk:
                break
            for line in self._device_splitter.feed(chunk):
                try:
                    self.device.handle_command(decode(line))
                except ProtocolError:
                    self.protocol_warnings += 1

    def close(self) -> None:
        self.channel.close(HOST_OWNER)
        self.manager.log.close()
