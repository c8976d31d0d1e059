from __future__ import annotations

import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from deskbms.core.counter import CrossingEvent
from deskbms.core.forecast import EventSchedule
from deskbms.models import InputError, TimeSeries

logger = logging.getLogger(__name__)


def to_iso(seconds: Iterable[float]) -> List[str]:
    """UTC ISO-8601 with millisecond precision, e.g. 2024-01-01T00:00:00.250Z."""
    millis = np.round(np.asarray(list(seconds), dtype=float) * 1000.0).astype("int64")
    stamps = pd.to_datetime(millis, unit="ms", utc=True)
    return [s.isoformat(timespec="milliseconds").replace("+00:00", "Z") for s in stamps]


def to_epoch(column: pd.Series) -> np.ndarray:
    try:
        stamps = pd.to_datetime(column, utc=True, format="ISO8601")
    except (ValueError, TypeError) as e:
        raise InputError("TIMESTAMP_INVALID", f"unparseable timestamp: {e}") from None
    if stamps.isna().any():
        raise InputError("TIMESTAMP_INVALID", "empty timestamp cell")
    ns = (stamps - pd.Timestamp(0, tz="UTC")).dt.as_unit("ns").astype("int64").to_numpy()
    whole, rest = np.divmod(ns, 1_000_000_000)
    return whole.astype(float) + rest / 1e9


def _read(path: Path, required: Sequence[str]) -> pd.DataFrame:
    path = Path(path)
    if not path.is_file():
        raise InputError("FILE_MISSING", f"{path} does not exist")
    df = pd.read_csv(path, float_precision="round_trip")
    missing = [c for c in required if c not in df.columns]
    if missing:
        raise InputError("CSV_COLUMNS", f"{path.name}: missing column(s) {', '.join(missing)}")
    return df


def _float_text(x: float) -> str:
    # shortest text that parses back to the same float
    return repr(float(x))


def _write(df: pd.DataFrame, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, lineterminator="\n", float_format=_float_text)
    return path


# -------------------------
# Traces (timestamp,value)
# -------------------------

def series_from_frame(times: np.ndarray, values: np.ndarray, source: str = "trace") -> TimeSeries:
    if len(times) == 0:
        raise InputError("TRACE_EMPTY", f"{source}: no rows")
    if len(times) == 1:
        raise InputError("TRACE_STEP", f"{source}: one row does not define a step")
    gaps = np.diff(times)
    step = float(gaps[0])
    if step <= 0 or not np.allclose(gaps, step, rtol=0.0, atol=1e-6):
        raise InputError("TRACE_SPACING", f"{source}: timestamps are not uniformly spaced")
    if not np.isfinite(values).all():
        raise InputError("TRACE_NONFINITE", f"{source}: non-finite value")
    return TimeSeries(float(times[0]), step, values.tolist())


def read_trace_csv(path: Path, column: str = "value") -> TimeSeries:
    df = _read(path, ["timestamp", column])
    values = pd.to_numeric(df[column], errors="coerce").to_numpy(dtype=float)
    return series_from_frame(to_epoch(df["timestamp"]), values, Path(path).name)


def write_trace_csv(series: TimeSeries, path: Path, column: str = "value") -> Path:
    return _write(pd.DataFrame({"timestamp": to_iso(series.times()), column: series.values}), path)


def write_series_csv(columns: Dict[str, TimeSeries], path: Path) -> Path:
    """Several aligned traces as one table sharing the first trace's clock."""
    first = next(iter(columns.values()))
    data = {"timestamp": to_iso(first.times())}
    for name, s in columns.items():
        if len(s) != len(first):
            raise InputError("TRACE_MISALIGNED", f"column '{name}' differs in length")
        data[name] = s.values
    return _write(pd.DataFrame(data), path)


# -------------------------
# Events (timestamp,direction,count)
# -------------------------

def read_events_csv(path: Path) -> List[CrossingEvent]:
    df = _read(path, ["timestamp", "direction"])
    counts = df["count"] if "count" in df.columns else pd.Series([1] * len(df))
    return [
        CrossingEvent(float(t), str(d).strip().lower(), int(c))
        for t, d, c in zip(to_epoch(df["timestamp"]), df["direction"], counts)
    ]


def write_events_csv(events: Sequence[CrossingEvent], path: Path) -> Path:
    df = pd.DataFrame({
        "timestamp": to_iso(e.timestamp for e in events),
        "direction": [e.direction for e in events],
        "count": [e.count for e in events],
    })
    return _write(df, path)


# -------------------------
# Schedules (timestamp[,special]) and holidays (date)
# -------------------------

def read_schedule_csv(path: Path, capacity: float, holidays_path: Optional[Path] = None) -> EventSchedule:
    df = _read(path, ["timestamp"])
    special = df["special"].astype(int).astype(bool).tolist() if "special" in df.columns else []
    holidays = frozenset()
    if holidays_path is not None:
        hdf = _read(holidays_path, ["date"])
        holidays = frozenset(pd.to_datetime(hdf["date"]).dt.date)
    return EventSchedule(
        events=tuple(to_epoch(df["timestamp"]).tolist()),
        capacity=capacity,
        special=tuple(special),
        holidays=holidays,
    )


def write_schedule_csv(schedule: EventSchedule, path: Path, holidays_path: Optional[Path] = None) -> Path:
    df = pd.DataFrame({
        "timestamp": to_iso(schedule.events),
        "special": [int(s) for s in schedule.special],
    })
    if holidays_path is not None:
        days = sorted(schedule.holidays)
        _write(pd.DataFrame({"date": [d.isoformat() for d in days]}), holidays_path)
    return _write(df, path)


# -------------------------
# Plans, setpoints, decision logs
# -------------------------

def write_plan_csv(plan: TimeSeries, path: Path) -> Path:
    return write_trace_csv(plan, path, column="q_ac_w")


def read_plan_csv(path: Path) -> TimeSeries:
    return read_trace_csv(path, column="q_ac_w")


def write_setpoints_csv(setpoints: TimeSeries, path: Path) -> Path:
    return write_trace_csv(setpoints, path, column="setpoint_c")


def write_decision_log_csv(rows: Sequence[Tuple[float, str, str]], path: Path) -> Path:
    df = pd.DataFrame({
        "timestamp": to_iso(r[0] for r in rows),
        "event": [r[1] for r in rows],
        "detail": [r[2] for r in rows],
    })
    return _write(df, path)


def write_grid_csv(xs: Sequence[float], ys: Sequence[float], grid: np.ndarray, x_name: str, y_name: str,
                   path: Path, value_name: str = "cvrmse") -> Path:
    """Long-format export of a 2-D grid (one row per cell)."""
    xx, yy = np.meshgrid(np.asarray(xs), np.asarray(ys), indexing="ij")
    df = pd.DataFrame({x_name: xx.ravel(), y_name: yy.ravel(), value_name: np.asarray(grid).ravel()})
    return _write(df, path)
