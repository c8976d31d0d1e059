from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Iterable, List, Optional, Tuple

from deskbms.config import IDLE_TIMEOUT_S
from deskbms.models import InputError, TimeSeries

logger = logging.getLogger(__name__)

INWARD = "inward"
OUTWARD = "outward"


@dataclass(frozen=True)
class CrossingEvent:
    timestamp: float
    direction: str  # inward | outward
    count: int = 1

    def __post_init__(self):
        if self.direction not in (INWARD, OUTWARD):
            raise InputError("EVENT_DIRECTION", f"direction must be inward|outward, got '{self.direction}'")
        if int(self.count) != self.count or self.count < 1:
            raise InputError("EVENT_COUNT", f"count must be a whole number >= 1, got {self.count}")
        if not math.isfinite(self.timestamp):
            raise InputError("EVENT_TIME", "event timestamp must be finite")
        object.__setattr__(self, "count", int(self.count))


@dataclass(frozen=True)
class CounterState:
    occupants: int = 0
    frozen: bool = False
    last_event_time: Optional[float] = None


@dataclass(frozen=True)
class ReplayStats:
    events: int
    underflow_freezes: int
    idle_resets: int
    ignored_outward: int

    @property
    def inconsistency_count(self) -> int:
        return self.underflow_freezes + self.idle_resets


def _idle_expired(state: CounterState, now: float, idle_timeout: Optional[float]) -> bool:
    return (
        idle_timeout is not None
        and state.last_event_time is not None
        and now - state.last_event_time > idle_timeout
    )


def apply_event(
    state: CounterState,
    event: CrossingEvent,
    idle_timeout: Optional[float] = IDLE_TIMEOUT_S,
) -> CounterState:
    if state.last_event_time is not None and event.timestamp < state.last_event_time:
        raise InputError(
            "EVENT_OUT_OF_ORDER",
            f"event at {event.timestamp} precedes the previous event at {state.last_event_time}",
        )

    occupants, frozen = state.occupants, state.frozen
    if _idle_expired(state, event.timestamp, idle_timeout):
        if occupants:
            logger.warning("idle reset: %d occupant(s) cleared after %.0f s without crossings",
                           occupants, event.timestamp - state.last_event_time)
        occupants, frozen = 0, False

    if event.direction == INWARD:
        occupants += event.count
        frozen = False
    elif not frozen:
        if event.count > occupants:
            logger.warning("counter underflow at %.0f: %d out of %d; frozen until next inward",
                           event.timestamp, event.count, occupants)
            occupants, frozen = 0, True
        else:
            occupants -= event.count

    return CounterState(occupants=occupants, frozen=frozen, last_event_time=event.timestamp)


def replay(
    events: Iterable[CrossingEvent],
    start_time: float,
    step: float,
    n_samples: int,
    idle_timeout: Optional[float] = IDLE_TIMEOUT_S,
) -> Tuple[TimeSeries, CounterState, ReplayStats]:
    """Replays a stream and samples the count at start_time + k*step (zero-order hold).

    A sample includes every event stamped at or before its time; an idle gap
    longer than idle_timeout also clears the count at sampling time.
    """
    ordered = list(events)
    state = CounterState()
    samples: List[float] = []
    freezes = resets = ignored = 0
    i = 0

    for k in range(n_samples):
        now = start_time + k * step
        while i < len(ordered) and ordered[i].timestamp <= now:
            ev = ordered[i]
            if _idle_expired(state, ev.timestamp, idle_timeout) and state.occupants:
                resets += 1
            if ev.direction == OUTWARD and state.frozen:
                ignored += 1
            nxt = apply_event(state, ev, idle_timeout)
            if nxt.frozen and not state.frozen:
                freezes += 1
            state = nxt
            i += 1
        if _idle_expired(state, now, idle_timeout) and state.occupants:
            resets += 1
            state = replace(state, occupants=0, frozen=False)
        samples.append(float(state.occupants))

    stats = ReplayStats(events=i, underflow_freezes=freezes, idle_resets=resets, ignored_outward=ignored)
    return TimeSeries(start_time, step, samples), state, stats


def accuracy_rate(total_in: int, missing_in: int, total_out: int, missing_out: int) -> float:
    for name, v in (("total_in", total_in), ("missing_in", missing_in),
                    ("total_out", total_out), ("missing_out", missing_out)):
        if v < 0:
            raise InputError("COUNT_NEGATIVE", f"{name} must be >= 0")
    if missing_in > total_in or missing_out > total_out:
        raise InputError("MISSING_EXCEEDS_TOTAL", "missing crossings exceed the total")
    total = total_in + total_out
    if total == 0:
        raise InputError("ACCURACY_UNDEFINED", "no crossings recorded; accuracy rate is undefined")
    return 1.0 - (missing_in + missing_out) / total


def f1_from(precision: float, recall: float) -> float:
    if precision + recall == 0:
        raise InputError("F1_UNDEFINED", "precision and recall are both zero")
    return 2.0 * precision * recall / (precision + recall)


def classification_metrics(true_positives: int, false_positives: int, false_negatives: int) -> Tuple[float, float, float]:
    if true_positives + false_positives == 0:
        raise InputError("PRECISION_UNDEFINED", "no positive detections")
    if true_positives + false_negatives == 0:
        raise InputError("RECALL_UNDEFINED", "no positive ground-truth crossings")
    precision = true_positives / (true_positives + false_positives)
    recall = true_positives / (true_positives + false_negatives)
    return precision, recall, f1_from(precision, recall)


@dataclass(frozen=True)
class MatchResult:
    true_positives: int
    false_positives: int
    false_negatives: int
    total_in: int
    missing_in: int
    total_out: int
    missing_out: int


def match_events(
    detected: List[CrossingEvent],
    truth: List[CrossingEvent],
    tolerance_s: float = 5.0,
) -> MatchResult:
    """Greedy time-ordered matching of detected crossings to ground truth.

    Event counts are compared per crossing; missing totals are in persons.
    """
    used = [False] * len(detected)
    tp = 0
    missing = {INWARD: 0, OUTWARD: 0}
    totals = {INWARD: 0, OUTWARD: 0}

    for ev in sorted(truth, key=lambda e: e.timestamp):
        totals[ev.direction] += ev.count
        best = None
        for j, det in enumerate(detected):
            if used[j] or det.direction != ev.direction:
                continue
            gap = abs(det.timestamp - ev.timestamp)
            if gap <= tolerance_s and (best is None or gap < best[0]):
                best = (gap, j)
        if best is None:
            missing[ev.direction] += ev.count
            continue
        used[best[1]] = True
        tp += 1
        missing[ev.direction] += max(0, ev.count - detected[best[1]].count)

    return MatchResult(
        true_positives=tp,
        false_positives=used.count(False),
        false_negatives=len(truth) - tp,
        total_in=totals[INWARD],
        missing_in=missing[INWARD],
        total_out=totals[OUTWARD],
        missing_out=missing[OUTWARD],
    )
