"""Seeded synthetic mosque data: prayer schedule, occupancy, crossing events, weather."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from typing import List, Tuple

import numpy as np

from deskbms.config import DEFAULT_DT_S
from deskbms.core.counter import INWARD, OUTWARD, CrossingEvent
from deskbms.core.forecast import DAY_S, EventSchedule
from deskbms.models import InputError, TimeSeries

logger = logging.getLogger(__name__)

FRIDAY = 4


@dataclass(frozen=True)
class GeneratorKnobs:
    seed: int = 7
    days: int = 7
    history_days: int = 28
    capacity: int = 500
    start_date: str = "2024-01-01"
    dt: float = DEFAULT_DT_S
    event_minutes: Tuple[float, ...] = (240.0, 740.0, 945.0, 1150.0, 1240.0)  # minutes after 00:00 UTC
    special_minute: float = 740.0
    drift_min_per_day: float = 1.5
    jitter_min: float = 2.0
    peak_low: float = 0.16
    peak_high: float = 0.20
    special_scale: float = 4.0
    ramp_min: float = 20.0
    plateau_min: float = 15.0
    special_plateau_min: float = 45.0
    decay_min: float = 5.0
    noise_prob: float = 0.003
    holidays: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "event_minutes", tuple(float(m) for m in self.event_minutes))
        object.__setattr__(self, "holidays", tuple(str(d) for d in self.holidays))
        if self.days < 1:
            raise InputError("DAYS_INVALID", "days must be >= 1")
        if self.history_days < 0:
            raise InputError("DAYS_INVALID", "history_days must be >= 0")
        if self.capacity <= 0:
            raise InputError("CAPACITY_INVALID", "capacity must be > 0")
        if not 0 <= self.peak_low <= self.peak_high:
            raise InputError("PEAK_RANGE", "need 0 <= peak_low <= peak_high")
        if not 0 <= self.noise_prob < 1:
            raise InputError("NOISE_RANGE", "noise_prob must lie in [0, 1)")

    @property
    def scenario_start(self) -> float:
        d = date.fromisoformat(self.start_date)
        return datetime(d.year, d.month, d.day, tzinfo=timezone.utc).timestamp()

    @property
    def generation_start(self) -> float:
        return self.scenario_start - self.history_days * DAY_S

    @property
    def total_days(self) -> int:
        return self.history_days + self.days


@dataclass(frozen=True)
class ScheduledEvent:
    time: float
    special: bool
    peak: float  # persons at the plateau


@dataclass(frozen=True)
class MosqueScenario:
    occupancy: TimeSeries
    events: Tuple[CrossingEvent, ...]
    schedule: EventSchedule
    gatherings: Tuple[ScheduledEvent, ...] = field(repr=False, default=())

    def scenario_slice(self, knobs: GeneratorKnobs) -> TimeSeries:
        first = self.occupancy.index_of(knobs.scenario_start)
        return self.occupancy.slice(first, first + int(round(knobs.days * DAY_S / knobs.dt)))


def _weekday(t: float) -> int:
    return int((math.floor(t / DAY_S) + 3) % 7)


def _gatherings(knobs: GeneratorKnobs, rng: np.random.Generator) -> List[ScheduledEvent]:
    out: List[ScheduledEvent] = []
    t0 = knobs.generation_start
    # one extra day on each side so every sample has a past and next event
    for d in range(-1, knobs.total_days + 1):
        day_start = t0 + d * DAY_S
        for minute in knobs.event_minutes:
            jitter = rng.uniform(-knobs.jitter_min, knobs.jitter_min)
            t = day_start + 60.0 * (minute + knobs.drift_min_per_day * d + jitter)
            special = minute == knobs.special_minute and _weekday(day_start) == FRIDAY
            peak = rng.uniform(knobs.peak_low, knobs.peak_high) * knobs.capacity
            out.append(ScheduledEvent(t, special, peak * (knobs.special_scale if special else 1.0)))
    return out


def _profile(tau_min: np.ndarray, knobs: GeneratorKnobs, special: bool) -> np.ndarray:
    """Triangular arrival ramp, plateau, fast linear decay; tau in minutes from the event."""
    plateau = knobs.special_plateau_min if special else knobs.plateau_min
    ramp = np.clip((tau_min + knobs.ramp_min) / knobs.ramp_min, 0.0, 1.0)
    decay = np.clip(1.0 - (tau_min - plateau) / knobs.decay_min, 0.0, 1.0)
    return np.where(tau_min < 0, ramp, np.where(tau_min < plateau, 1.0, decay))


def _counts(times: np.ndarray, gatherings: List[ScheduledEvent], knobs: GeneratorKnobs,
            rng: np.random.Generator) -> np.ndarray:
    level = np.zeros_like(times)
    for g in gatherings:
        level += g.peak * _profile((times - g.time) / 60.0, knobs, g.special)
    counts = np.rint(level).astype(np.int64)

    for k in range(len(counts)):
        if counts[k] == 0:
            if rng.random() < knobs.noise_prob:
                counts[k] = rng.integers(1, 4)
        elif k > 0 and counts[k] == counts[k - 1]:
            # keep crossings flowing on a steady plateau
            counts[k] += 1 if counts[k] == 1 or rng.random() < 0.5 else -1
    return counts


def _crossings(times: np.ndarray, counts: np.ndarray, dt: float) -> List[CrossingEvent]:
    events: List[CrossingEvent] = []
    prev = 0
    for t, c in zip(times, counts):
        delta = int(c) - prev
        if delta > 0:
            events.append(CrossingEvent(float(t - dt / 2), INWARD, delta))
        elif delta < 0:
            events.append(CrossingEvent(float(t - dt / 2), OUTWARD, -delta))
        prev = int(c)
    return events


def generate_mosque_scenario(knobs: GeneratorKnobs = GeneratorKnobs()) -> MosqueScenario:
    """Occupancy over history_days + days from generation_start, with its crossing stream.

    Crossings that change the count between samples k-1 and k are stamped at
    t_k - dt/2, so a zero-order-hold replay reproduces the trace exactly.
    """
    rng = np.random.default_rng(knobs.seed)
    gatherings = _gatherings(knobs, rng)

    n = int(round(knobs.total_days * DAY_S / knobs.dt))
    times = knobs.generation_start + knobs.dt * np.arange(n)
    counts = _counts(times, gatherings, knobs, rng)
    events = _crossings(times, counts, knobs.dt)

    schedule = EventSchedule(
        events=tuple(g.time for g in gatherings),
        capacity=float(knobs.capacity),
        special=tuple(g.special for g in gatherings),
        holidays=frozenset(date.fromisoformat(d) for d in knobs.holidays),
    )
    logger.info("generated %d days (%d samples, %d crossings) with seed %d",
                knobs.total_days, n, len(events), knobs.seed)
    return MosqueScenario(
        occupancy=TimeSeries(float(times[0]), knobs.dt, counts.astype(float).tolist()),
        events=tuple(events),
        schedule=schedule,
        gatherings=tuple(gatherings),
    )


def peak_integrals(scenario: MosqueScenario, knobs: GeneratorKnobs, day_start: float, days: int = 7) -> List[Tuple[ScheduledEvent, float]]:
    """Person-seconds attributed to each gathering in [day_start, day_start + days)."""
    occ = scenario.occupancy
    times = np.asarray(occ.times())
    values = occ.to_numpy()
    window_end = day_start + days * DAY_S
    inside = [g for g in scenario.gatherings if day_start <= g.time < window_end]
    out = []
    for g in inside:
        plateau = knobs.special_plateau_min if g.special else knobs.plateau_min
        lo = g.time - 60.0 * knobs.ramp_min - occ.step
        hi = g.time + 60.0 * (plateau + knobs.decay_min) + occ.step
        near = (times >= lo) & (times <= hi)
        out.append((g, float(values[near].sum() * occ.step)))
    return out


# -------------------------
# Weather
# -------------------------

@dataclass(frozen=True)
class WeatherKnobs:
    mean_c: float = 35.0
    amplitude_c: float = 7.0
    rh_mean: float = 50.0
    rh_amplitude: float = 15.0
    coldest_hour: float = 3.0


def reference_weather(start_time: float, n: int, dt: float = DEFAULT_DT_S,
                      knobs: WeatherKnobs = WeatherKnobs()) -> Tuple[TimeSeries, TimeSeries]:
    """Hot-climate daily sinusoid: coolest and most humid at the coldest hour."""
    times = start_time + dt * np.arange(n)
    hours = (times % DAY_S) / 3600.0
    phase = np.cos(2 * np.pi * (hours - knobs.coldest_hour) / 24.0)
    t_out = knobs.mean_c - knobs.amplitude_c * phase
    rh = knobs.rh_mean + knobs.rh_amplitude * phase
    return TimeSeries(start_time, dt, t_out.tolist()), TimeSeries(start_time, dt, rh.tolist())


def constant_trace(start_time: float, n: int, value: float, dt: float = DEFAULT_DT_S) -> TimeSeries:
    return TimeSeries(start_time, dt, [value] * n)


def empty_occupancy(like: TimeSeries) -> TimeSeries:
    return like.with_values([0.0] * len(like))
