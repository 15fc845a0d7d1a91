"""Deterministic virtual classroom.

A scenario file scripts sit/stand/scan actions on a virtual timeline; the
device loop runs at exactly 100 ms per tick, samples each chair (true weight
plus seeded gaussian noise summed over four virtual load cells), drives the
occupancy state machine, and emits wire frames. Everything is a pure function
of (scenario, seed): no wall time is ever consulted.

Scenario grammar, one directive per line, ``#`` starts a comment line:

    SEED <u64>
    CHAIR <id> TARE <counts> SCALE <counts/kg> NOISE <kg>
    CARD <uid> [STUDENT <uid>]
    AT <t ms> SIT <chair> <kg>
    AT <t ms> STAND <chair>
    AT <t ms> SCAN <uid> [FAIL <n>]
    AT <t ms> CLOCK <ISO-8601 local>
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from datetime import datetime, timedelta
from pathlib import Path
from typing import IO, Union

from .errors import ValidationError
from .roster import normalize_uid
from .seat import (
    ChairState,
    Empty,
    LoadCellConfig,
    SeatEvent,
    adc_to_kg,
    filter_reading,
    step,
)
from .verify import LcdCode
from .wire import Frame, LcdCommand, ScanEvent, TareCommand, WeightEvent

TICK_MS = 100
DEFAULT_RETRY_LIMIT = 3

# Monday, long before any plausible course data; tests that smuggle wall time
# in would produce visibly wrong dates.
DEFAULT_EPOCH = datetime(2000, 1, 3, 8, 0, 0)


@dataclass
class VirtualClock:
    """Simulation time; advances only when explicitly ticked."""

    now: datetime = DEFAULT_EPOCH
    tick_ms: int = TICK_MS

    def advance(self) -> datetime:
        self.now += timedelta(milliseconds=self.tick_ms)
        return self.now


@dataclass(frozen=True)
class SitAction:
    at_ms: int
    chair_id: str
    kg: float


@dataclass(frozen=True)
class StandAction:
    at_ms: int
    chair_id: str


@dataclass(frozen=True)
class ScanAction:
    at_ms: int
    uid: str
    failure_count: int = 0


@dataclass(frozen=True)
class ClockAction:
    at_ms: int
    wall: datetime


Action = Union[SitAction, StandAction, ScanAction, ClockAction]


@dataclass(frozen=True)
class ChairSpec:
    chair_id: str
    config: LoadCellConfig
    noise_kg: float


@dataclass(frozen=True)
class Scenario:
    seed: int
    chairs: tuple[ChairSpec, ...]
    cards: dict[str, str | None]  # card uid -> bound student uid
    timeline: tuple[Action, ...]


def load_scenario(source: IO[str] | IO[bytes] | str | bytes | Path) -> Scenario:
    """Parse and validate a scenario file; errors carry the line number."""
    if isinstance(source, Path):
        text = source.read_text(encoding="utf-8")
    elif isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        data = source.read()
        text = data.decode("utf-8") if isinstance(data, bytes) else data

    seed = 0
    chairs: list[ChairSpec] = []
    cards: dict[str, str | None] = {}
    timeline: list[Action] = []

    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        words = line.split()
        try:
            keyword = words[0].upper()
            if keyword == "SEED":
                _want(len(words) == 2, "SEED wants one value")
                seed = _parse_u64(words[1])
            elif keyword == "CHAIR":
                _want(
                    len(words) == 8
                    and words[2].upper() == "TARE"
                    and words[4].upper() == "SCALE"
                    and words[6].upper() == "NOISE",
                    "CHAIR wants: CHAIR <id> TARE <counts> SCALE <counts/kg> NOISE <kg>",
                )
                chair_id = words[1]
                _want(all(c.chair_id != chair_id for c in chairs), "duplicate chair id")
                noise = float(words[7])
                _want(noise >= 0, "NOISE must be >= 0")
                chairs.append(
                    ChairSpec(
                        chair_id=chair_id,
                        config=LoadCellConfig(
                            tare_counts=float(words[3]),
                            scale_counts_per_kg=float(words[5]),
                        ),
                        noise_kg=noise,
                    )
                )
            elif keyword == "CARD":
                _want(len(words) in (2, 4), "CARD wants: CARD <uid> [STUDENT <uid>]")
                uid = normalize_uid(words[1])
                _want(uid not in cards, "duplicate card")
                bound = None
                if len(words) == 4:
                    _want(words[2].upper() == "STUDENT", "expected STUDENT keyword")
                    bound = normalize_uid(words[3])
                cards[uid] = bound
            elif keyword == "AT":
                _want(len(words) >= 3, "AT wants: AT <t ms> <action> ...")
                at_ms = int(words[1])
                _want(at_ms >= 0, "timeline time must be >= 0")
                action = _parse_action(at_ms, words[2].upper(), words[3:])
                if isinstance(action, (SitAction, StandAction)):
                    _want(
                        any(c.chair_id == action.chair_id for c in chairs),
                        f"undeclared chair {action.chair_id!r}",
                    )
                if isinstance(action, ScanAction):
                    _want(action.uid in cards, f"undeclared card {action.uid!r}")
                if timeline and at_ms < timeline[-1].at_ms:
                    raise ValidationError("timeline not sorted by time")
                timeline.append(action)
            else:
                raise ValidationError(f"unknown directive {words[0]!r}")
        except (ValidationError, ValueError) as exc:
            raise ValidationError(f"scenario line {lineno}: {exc}") from None

    return Scenario(
        seed=seed, chairs=tuple(chairs), cards=cards, timeline=tuple(timeline)
    )


def _parse_action(at_ms: int, verb: str, rest: list[str]) -> Action:
    if verb == "SIT":
        _want(len(rest) == 2, "SIT wants: SIT <chair> <kg>")
        kg = float(rest[1])
        _want(kg >= 0, "SIT weight must be >= 0")
        return SitAction(at_ms, rest[0], kg)
    if verb == "STAND":
        _want(len(rest) == 1, "STAND wants: STAND <chair>")
        return StandAction(at_ms, rest[0])
    if verb == "SCAN":
        _want(len(rest) in (1, 3), "SCAN wants: SCAN <uid> [FAIL <n>]")
        failures = 0
        if len(rest) == 3:
            _want(rest[1].upper() == "FAIL", "expected FAIL keyword")
            failures = int(rest[2])
            _want(failures >= 0, "FAIL count must be >= 0")
        return ScanAction(at_ms, normalize_uid(rest[0]), failures)
    if verb == "CLOCK":
        _want(len(rest) == 1, "CLOCK wants: CLOCK <ISO-8601>")
        try:
            wall = datetime.fromisoformat(rest[0])
        except ValueError:
            raise ValidationError(f"bad ISO-8601 timestamp {rest[0]!r}") from None
        return ClockAction(at_ms, wall)
    raise ValidationError(f"unknown action {verb!r}")


def _want(condition: bool, message: str) -> None:
    if not condition:
        raise ValidationError(message)


def _parse_u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise ValidationError(f"seed out of range: {text}")
    return value


class VirtualChair:
    """One chair: scripted true load, seeded noise, state machine."""

    CELLS = 4

    def __init__(self, spec: ChairSpec, seed: int) -> None:
        self.spec = spec
        self.config = spec.config
        self.true_kg = 0.0
        self.last_stable_kg = 0.0
        self.last_raw = spec.config.tare_counts
        self.state: ChairState = Empty()
        # Each chair owns its noise stream so chair order never matters.
        self._rng = random.Random(f"{seed}:{spec.chair_id}")

    def sample_raw(self) -> float:
        # Four half-bridge cells each carry a quarter of the load; per-cell
        # sigma of noise/2 keeps the summed signal's sigma at spec.noise_kg.
        cell_sigma = self.spec.noise_kg / 2.0
        kg = 0.0
        for _ in range(self.CELLS):
            kg += self.true_kg / self.CELLS + self._rng.gauss(0.0, cell_sigma)
        raw = round(self.config.tare_counts + kg * self.config.scale_counts_per_kg)
        self.last_raw = raw
        return raw

    def observe(self, t_s: float) -> tuple[float, SeatEvent | None, bool]:
        """Sample, filter, and step; returns (kg, event, state-type-changed)."""
        raw = self.sample_raw()
        kg = adc_to_kg(raw, self.config)
        kg = filter_reading(kg, self.last_stable_kg, self.config)
        self.last_stable_kg = kg
        before = type(self.state)
        self.state, event = step(self.state, kg, t_s, self.spec.chair_id)
        return kg, event, type(self.state) is not before

    def tare(self) -> None:
        self.config = replace(self.config, tare_counts=self.last_raw)


@dataclass
class _PendingScan:
    uid: str
    remaining_failures: int
    attempts_used: int = 0


class DeviceSim:
    """The simulated reader/seat device: 10 Hz loop, retry logic, LCD state."""

    def __init__(self, scenario: Scenario, retry_limit: int = DEFAULT_RETRY_LIMIT) -> None:
        if retry_limit < 1:
            raise ValidationError("retry limit must be >= 1")
        self.scenario = scenario
        self.retry_limit = retry_limit
        self.chairs = {
            spec.chair_id: VirtualChair(spec, scenario.seed) for spec in scenario.chairs
        }
        self.lcd: tuple[LcdCode, str] = (LcdCode.SYSTEM_READY, "")
        self.t_ms = 0
        self._timeline_index = 0
        self._scan_queue: list[_PendingScan] = []
        self._seq = 0

    def _next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def tick(self, clock: VirtualClock) -> list[Frame]:
        """One 100 ms loop iteration; returns the frames emitted this tick."""
        frames: list[Frame] = []
        timeline = self.scenario.timeline
        while (
            self._timeline_index < len(timeline)
            and timeline[self._timeline_index].at_ms <= self.t_ms
        ):
            self._apply(timeline[self._timeline_index], clock)
            self._timeline_index += 1

        t_s = self.t_ms / 1000.0
        for chair_id in sorted(self.chairs):
            chair = self.chairs[chair_id]
            kg, _event, changed = chair.observe(t_s)
            if changed:
                frames.append(
                    WeightEvent(
                        chair_id=chair_id,
                        grams=min(500_000, max(0, round(kg * 1000))),
                        seq=self._next_seq(),
                    )
                )

        if self._scan_queue:
            pending = self._scan_queue[0]
            pending.attempts_used += 1
            if pending.remaining_failures > 0:
                pending.remaining_failures -= 1
                if pending.attempts_used >= self.retry_limit:
                    # Retries exhausted: the attempt lapses silently.
                    self._scan_queue.pop(0)
                    self.lcd = (LcdCode.SYSTEM_READY, "")
            else:
                frames.append(ScanEvent(uid=pending.uid, seq=self._next_seq()))
                self._scan_queue.pop(0)

        self.t_ms += clock.tick_ms
        clock.advance()
        return frames

    def run_to(self, clock: VirtualClock, until_ms: int) -> list[Frame]:
        """Tick until simulation time reaches ``until_ms``; idempotent at a fixed t."""
        frames: list[Frame] = []
        while self.t_ms < until_ms:
            frames.extend(self.tick(clock))
        return frames

    def _apply(self, action: Action, clock: VirtualClock) -> None:
        if isinstance(action, SitAction):
            self.chairs[action.chair_id].true_kg = action.kg
        elif isinstance(action, StandAction):
            self.chairs[action.chair_id].true_kg = 0.0
        elif isinstance(action, ScanAction):
            self._scan_queue.append(_PendingScan(action.uid, action.failure_count))
        elif isinstance(action, ClockAction):
            clock.now = action.wall

    def handle_command(self, frame: Frame) -> None:
        """Apply a host->device command; acks are consumed silently."""
        if isinstance(frame, LcdCommand):
            self.lcd = (frame.code, frame.arg)
        elif isinstance(frame, TareCommand):
            chair = self.chairs.get(frame.chair_id)
            if chair is not None:
                chair.tare()
