"""Chair load sensing: counts-to-kg conversion and the occupancy state machine.

A chair reading lands in one of three bands: below 10 kg it is empty, from
10 kg up to (but excluding) 40 kg it is a sit-down/stand-up transient, and at
40 kg or more it counts as active seating. A transient is rechecked once per
elapsed second; after three rechecks still in-band the chair is reported
unstable and the counter freezes.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

from .errors import CalibrationError, DomainError

EMPTY_MAX_KG = 10.0
SEATED_MIN_KG = 40.0
RECHECK_LIMIT = 3
RECHECK_INTERVAL_S = 1.0

# Guards float drift in accumulated virtual clocks (e.g. 2.9999999999999996 s).
_TIME_EPS = 1e-9


@dataclass(frozen=True)
class LoadCellConfig:
    """Calibration for one chair's summed load-cell signal."""

    tare_counts: float
    scale_counts_per_kg: float
    deadband_kg: float = 0.5

    def __post_init__(self) -> None:
        if self.scale_counts_per_kg == 0:
            raise DomainError("scale_counts_per_kg must be non-zero")
        if self.deadband_kg < 0:
            raise DomainError("deadband_kg must be >= 0")


def adc_to_kg(raw: float, cfg: LoadCellConfig) -> float:
    """Convert raw counts to kilograms; drift below tare clamps to 0."""
    return max(0.0, (raw - cfg.tare_counts) / cfg.scale_counts_per_kg)


def calibrate(
    reference_kg: float, raw_at_reference: float, raw_at_zero: float
) -> LoadCellConfig:
    """Two-point calibration against a known reference weight."""
    if reference_kg <= 0:
        raise DomainError(f"reference weight must be positive: {reference_kg}")
    span = raw_at_reference - raw_at_zero
    if span == 0:
        raise CalibrationError("zero span between reference and zero readings")
    return LoadCellConfig(
        tare_counts=raw_at_zero, scale_counts_per_kg=span / reference_kg
    )


def filter_reading(kg: float, last_stable: float, cfg: LoadCellConfig) -> float:
    """Deadband filter: readings within tolerance of the last stable value hold."""
    if abs(kg - last_stable) <= cfg.deadband_kg:
        return last_stable
    return kg


@dataclass(frozen=True)
class Empty:
    pass


@dataclass(frozen=True)
class Transient:
    entered_at: float
    rechecks_done: int
    last_kg: float


@dataclass(frozen=True)
class Seated:
    kg: float
    since: float


ChairState = Empty | Transient | Seated


class SeatEventKind(Enum):
    SAT_DOWN = "SatDown"
    STOOD_UP = "StoodUp"
    UNSTABLE = "Unstable"


@dataclass(frozen=True)
class SeatEvent:
    kind: SeatEventKind
    chair_id: str
    at: float
    kg: float | None = None


def band_of(kg: float) -> type:
    """Which state a reading belongs to; the three bands partition kg >= 0."""
    if kg >= SEATED_MIN_KG:
        return Seated
    if kg >= EMPTY_MAX_KG:
        return Transient
    return Empty


def step(
    state: ChairState, kg: float, now: float, chair_id: str = ""
) -> tuple[ChairState, SeatEvent | None]:
    """Advance one chair machine by one reading.

    Timestamps must be monotone non-decreasing across calls. Events are
    edge-triggered: a constant reading yields at most one SatDown or StoodUp,
    and at most one Unstable.
    """
    if kg >= SEATED_MIN_KG:
        if isinstance(state, Seated):
            return Seated(kg=kg, since=state.since), None
        return Seated(kg=kg, since=now), SeatEvent(
            SeatEventKind.SAT_DOWN, chair_id, now, kg
        )

    if kg < EMPTY_MAX_KG:
        if isinstance(state, Seated):
            return Empty(), SeatEvent(SeatEventKind.STOOD_UP, chair_id, now)
        return Empty(), None

    # Transient band [10, 40).
    if not isinstance(state, Transient):
        return Transient(entered_at=now, rechecks_done=0, last_kg=kg), None

    due = min(
        RECHECK_LIMIT,
        int((now - state.entered_at + _TIME_EPS) / RECHECK_INTERVAL_S),
    )
    if due <= state.rechecks_done:
        return replace(state, last_kg=kg), None
    event = None
    if due == RECHECK_LIMIT and state.rechecks_done < RECHECK_LIMIT:
        # Third recheck still in-band: report once, then freeze the counter.
        event = SeatEvent(SeatEventKind.UNSTABLE, chair_id, now)
    return replace(state, rechecks_done=due, last_kg=kg), event
