from __future__ import annotations

import logging
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from deskbms.config import (
    DEFAULT_DT_S,
    FORECAST_EVENT_WINDOW_MIN,
    FORECAST_HORIZON_S,
    FORECAST_RIDGE,
    FORECAST_WINDOW_DAYS,
    ONSET_THRESHOLD,
)
from deskbms.models import InputError, TimeSeries

logger = logging.getLogger(__name__)

DAY_S = 86400
WEEK_S = 7 * DAY_S
_EPOCH_DATE = date(1970, 1, 1)


@dataclass(frozen=True)
class EventSchedule:
    """Scheduled gatherings (e.g. daily prayers) plus holidays and capacity."""

    events: Tuple[float, ...]
    capacity: float
    special: Tuple[bool, ...] = ()
    holidays: FrozenSet[date] = frozenset()

    def __post_init__(self):
        events = tuple(float(t) for t in self.events)
        object.__setattr__(self, "events", events)
        special = tuple(bool(s) for s in self.special) or (False,) * len(events)
        object.__setattr__(self, "special", special)
        object.__setattr__(self, "holidays", frozenset(self.holidays))
        if len(events) < 2:
            raise InputError("SCHEDULE_EMPTY", "a schedule needs at least two events")
        if any(b <= a for a, b in zip(events, events[1:])):
            raise InputError("SCHEDULE_ORDER", "event timestamps must be strictly increasing")
        if len(special) != len(events):
            raise InputError("SCHEDULE_SPECIAL", "special flags must match the events one to one")
        if not self.capacity > 0:
            raise InputError("CAPACITY_INVALID", f"capacity must be > 0, got {self.capacity}")

    @property
    def holiday_days(self) -> np.ndarray:
        return np.array(sorted((d - _EPOCH_DATE).days for d in self.holidays), dtype=np.int64)

    def covers(self, t: float) -> bool:
        return self.events[0] <= t < self.events[-1]


@dataclass(frozen=True)
class FeatureRow:
    minutes_since_past: float
    minutes_until_next: float
    holiday: int
    day_of_week: int  # Monday = 0
    special_case: int
    terms: Tuple[float, ...]
    target: Optional[float] = None


@dataclass(frozen=True)
class Recipe:
    id: str
    label: str
    windowed: bool       # samples restricted to event windows, deltas clipped
    trailing: bool       # train on the trailing window only


RECIPES: Dict[str, Recipe] = {
    "all-data": Recipe("all-data", "LR_AllData", windowed=False, trailing=False),
    "spev": Recipe("spev", "LR_SpEv", windowed=False, trailing=False),
    "domsp-linear": Recipe("domsp-linear", "LR_DomSp", windowed=True, trailing=True),
    "domsp-poly": Recipe("domsp-poly", "PR_DomSp", windowed=True, trailing=True),
}

FEATURE_NAMES: Dict[str, Tuple[str, ...]] = {
    "all-data": ("intercept", "minute_of_day", "holiday") + tuple(f"dow_{d}" for d in range(1, 7)),
    "spev": ("intercept", "past", "next", "special"),
    "domsp-linear": ("intercept", "past", "next", "holiday")
    + tuple(f"dow_{d}" for d in range(1, 7)) + ("special",),
}
FEATURE_NAMES["domsp-poly"] = FEATURE_NAMES["domsp-linear"] + ("past_sq", "next_sq", "past_next")


def get_recipe(recipe_id: str) -> Recipe:
    try:
        return RECIPES[recipe_id]
    except KeyError:
        raise InputError("RECIPE_UNKNOWN", f"unknown recipe '{recipe_id}' ({', '.join(RECIPES)})") from None


@dataclass(frozen=True)
class RegressionModel:
    recipe: str
    coefficients: Tuple[float, ...]
    window_days: Optional[float]
    event_window_min: float = FORECAST_EVENT_WINDOW_MIN
    background: float = 0.0
    training_samples: int = 0

    def __post_init__(self):
        get_recipe(self.recipe)
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        if len(self.coefficients) != len(FEATURE_NAMES[self.recipe]):
            raise InputError(
                "COEFFICIENT_COUNT",
                f"recipe '{self.recipe}' expects {len(FEATURE_NAMES[self.recipe])} coefficients",
            )

    def to_json_dict(self) -> dict:
        return {
            "recipe": self.recipe,
            "features": list(FEATURE_NAMES[self.recipe]),
            "coefficients": list(self.coefficients),
            "window_days": self.window_days,
            "event_window_min": self.event_window_min,
            "background": self.background,
            "training_samples": self.training_samples,
        }

    @staticmethod
    def from_json_dict(d: dict) -> "RegressionModel":
        return RegressionModel(
            recipe=str(d["recipe"]),
            coefficients=tuple(float(c) for c in d["coefficients"]),
            window_days=d.get("window_days"),
            event_window_min=float(d.get("event_window_min", FORECAST_EVENT_WINDOW_MIN)),
            background=float(d.get("background", 0.0)),
            training_samples=int(d.get("training_samples", 0)),
        )


# -------------------------
# Features
# -------------------------

@dataclass(frozen=True)
class _Features:
    past: np.ndarray
    next: np.ndarray
    minute_of_day: np.ndarray
    holiday: np.ndarray
    dow: np.ndarray
    special: np.ndarray
    in_window: np.ndarray


def _features(times: np.ndarray, schedule: EventSchedule, window_min: float) -> _Features:
    ev = np.asarray(schedule.events)
    idx = np.searchsorted(ev, times, side="right") - 1
    if (idx < 0).any() or (idx + 1 >= len(ev)).any():
        raise InputError("SCHEDULE_COVERAGE", "schedule does not bracket every queried time with a past and next event")

    past = (times - ev[idx]) / 60.0
    nxt = (ev[idx + 1] - times) / 60.0
    flags = np.asarray(schedule.special, dtype=bool)
    special = ((past <= window_min) & flags[idx]) | ((nxt <= window_min) & flags[idx + 1])

    day = np.floor(times / DAY_S).astype(np.int64)
    return _Features(
        past=past,
        next=nxt,
        minute_of_day=(times - day * DAY_S) / 60.0,
        holiday=np.isin(day, schedule.holiday_days).astype(float),
        dow=(day + 3) % 7,  # 1970-01-01 was a Thursday
        special=special.astype(float),
        in_window=np.minimum(past, nxt) <= window_min,
    )


def _dow_dummies(dow: np.ndarray) -> List[np.ndarray]:
    return [(dow == d).astype(float) for d in range(1, 7)]


def _design(f: _Features, recipe_id: str, window_min: float) -> np.ndarray:
    ones = np.ones_like(f.past)
    if recipe_id == "all-data":
        cols = [ones, f.minute_of_day, f.holiday] + _dow_dummies(f.dow)
    elif recipe_id == "spev":
        cols = [ones, f.past, f.next, f.special]
    else:
        cp = np.minimum(f.past, window_min)
        cn = np.minimum(f.next, window_min)
        cols = [ones, cp, cn, f.holiday] + _dow_dummies(f.dow) + [f.special]
        if recipe_id == "domsp-poly":
            cols += [cp * cp, cn * cn, cp * cn]
    return np.column_stack(cols)


def featurize(
    t: float,
    schedule: EventSchedule,
    recipe: str,
    window_min: float = FORECAST_EVENT_WINDOW_MIN,
) -> FeatureRow:
    get_recipe(recipe)
    f = _features(np.array([float(t)]), schedule, window_min)
    row = _design(f, recipe, window_min)[0]
    return FeatureRow(
        minutes_since_past=float(f.past[0]),
        minutes_until_next=float(f.next[0]),
        holiday=int(f.holiday[0]),
        day_of_week=int(f.dow[0]),
        special_case=int(f.special[0]),
        terms=tuple(float(v) for v in row),
    )


# -------------------------
# Fit / predict
# -------------------------

def fit(
    history: TimeSeries,
    schedule: EventSchedule,
    recipe: str,
    as_of: Optional[float] = None,
    window_days: float = FORECAST_WINDOW_DAYS,
    window_min: float = FORECAST_EVENT_WINDOW_MIN,
    ridge: float = FORECAST_RIDGE,
) -> RegressionModel:
    """OLS fit via normal equations on occupancy normalized by capacity.

    Training uses samples strictly before `as_of` (default: end of history) that
    the schedule brackets.
    """
    rec = get_recipe(recipe)
    times = np.asarray(history.times())
    y = history.to_numpy() / schedule.capacity
    cutoff = history.end_time + history.step if as_of is None else float(as_of)

    keep = (times < cutoff) & (times >= schedule.events[0]) & (times < schedule.events[-1])
    if rec.trailing:
        keep &= times >= cutoff - window_days * DAY_S
    times, y = times[keep], y[keep]
    if len(times) == 0:
        raise InputError("INSUFFICIENT_DATA", "no history samples inside the training window")

    f = _features(times, schedule, window_min)
    background = 0.0
    if rec.windowed:
        inside = f.in_window
        background = float(y[~inside].mean()) if (~inside).any() else 0.0
        f = _Features(*(getattr(f, name)[inside] for name in _Features.__dataclass_fields__))
        y = y[inside]

    X = _design(f, recipe, window_min)
    n, p = X.shape
    if n < 2 * p:
        raise InputError("INSUFFICIENT_DATA", f"{n} samples for {p} features; need at least {2 * p}")

    xtx = X.T @ X + ridge * np.eye(p)
    try:
        beta = np.linalg.solve(xtx, X.T @ y)
    except np.linalg.LinAlgError:
        raise InputError("RANK_DEFICIENT", "normal equations are singular after ridge jitter") from None
    if not np.isfinite(beta).all():
        raise InputError("RANK_DEFICIENT", "normal equations produced non-finite coefficients")

    logger.info("fit %s: %d samples, %d features, background %.4f", recipe, n, p, background)
    return RegressionModel(
        recipe=recipe,
        coefficients=tuple(beta.tolist()),
        window_days=window_days if rec.trailing else None,
        event_window_min=window_min,
        background=background,
        training_samples=n,
    )


def predict_many(model: RegressionModel, times: Sequence[float], schedule: EventSchedule) -> np.ndarray:
    ts = np.asarray(times, dtype=float)
    f = _features(ts, schedule, model.event_window_min)
    raw = _design(f, model.recipe, model.event_window_min) @ np.asarray(model.coefficients)
    if RECIPES[model.recipe].windowed:
        raw = np.where(f.in_window, raw, model.background)
    return np.clip(raw, 0.0, 1.0)


def predict(model: RegressionModel, t: float, schedule: EventSchedule) -> float:
    return float(predict_many(model, [t], schedule)[0])


def forecast_day(
    model: RegressionModel,
    schedule: EventSchedule,
    day_start: float,
    step: float = DEFAULT_DT_S,
) -> TimeSeries:
    n = int(round(DAY_S / step))
    times = [day_start + i * step for i in range(n)]
    return TimeSeries(day_start, step, predict_many(model, times, schedule).tolist())


def last_week_baseline(history: TimeSeries, t: float, capacity: float = 1.0) -> float:
    idx = history.nearest_index(t - WEEK_S)
    if idx is None:
        raise InputError("INSUFFICIENT_HISTORY", "history does not cover one week before the query")
    return history.values[idx] / capacity


def evaluate(predictions: TimeSeries, truth: TimeSeries) -> Tuple[float, float]:
    if len(predictions) != len(truth):
        raise InputError("TRACE_MISALIGNED", "predictions and truth differ in length")
    y = truth.to_numpy()
    if (y < 0).any() or (y > 1).any():
        raise InputError("TRUTH_RANGE", "truth must be normalized occupancy in [0, 1]")
    resid = y - predictions.to_numpy()
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot == 0.0:
        raise InputError("R2_UNDEFINED", "truth has zero variance; R-squared is undefined")
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot
    rmse = float(np.sqrt((resid ** 2).mean()))
    return r2, rmse


def next_occupied_time(
    model: RegressionModel,
    schedule: EventSchedule,
    t_now: float,
    threshold: float = ONSET_THRESHOLD,
    step: float = DEFAULT_DT_S,
    horizon_s: float = FORECAST_HORIZON_S,
) -> Optional[float]:
    """First clock time after t_now whose prediction reaches `threshold`, or None."""
    if not 0.0 < threshold < 1.0:
        raise InputError("THRESHOLD_RANGE", f"threshold must lie in (0, 1), got {threshold}")
    n = int(horizon_s // step)
    times = [t_now + k * step for k in range(1, n + 1)]
    times = [t for t in times if schedule.covers(t)]
    if not times:
        return None
    hits = np.nonzero(predict_many(model, times, schedule) >= threshold)[0]
    return float(times[hits[0]]) if len(hits) else None


# -------------------------
# Recipe comparison
# -------------------------

@dataclass(frozen=True)
class RecipeScore:
    label: str
    r_squared: float
    rmse: float
    model: Optional[RegressionModel] = field(default=None, compare=False)


def compare_recipes(
    history: TimeSeries,
    schedule: EventSchedule,
    holdout_day_start: float,
    recipes: Iterable[str] = tuple(RECIPES),
    window_days: float = FORECAST_WINDOW_DAYS,
    window_min: float = FORECAST_EVENT_WINDOW_MIN,
) -> List[RecipeScore]:
    """Scores LastWeek and each regression recipe on one held-out day."""
    first = history.index_of(holdout_day_start)
    n = int(round(DAY_S / history.step))
    truth_raw = history.slice(first, first + n)
    if len(truth_raw) != n:
        raise InputError("INSUFFICIENT_HISTORY", "history ends before the held-out day does")
    truth = truth_raw.with_values(v / schedule.capacity for v in truth_raw.values)

    lw = truth.with_values(
        last_week_baseline(history, t, schedule.capacity) for t in truth.times()
    )
    r2, rmse = evaluate(lw, truth)
    scores = [RecipeScore("LastWeek", r2, rmse)]

    for rid in recipes:
        model = fit(history, schedule, rid, as_of=holdout_day_start,
                    window_days=window_days, window_min=window_min)
        pred = truth.with_values(predict_many(model, truth.times(), schedule).tolist())
        r2, rmse = evaluate(pred, truth)
        scores.append(RecipeScore(RECIPES[rid].label, r2, rmse, model))
        logger.info("holdout %s: R2=%.3f RMSE=%.4f", RECIPES[rid].label, r2, rmse)
    return scores


def utc_date(t: float) -> date:
    return datetime.fromtimestamp(t, tz=timezone.utc).date()
