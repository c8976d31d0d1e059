from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np


class DeskBmsError(ValueError):
    """Base error; `code` is a stable short identifier (e.g. DT_UNSTABLE)."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message


class InputError(DeskBmsError):
    pass


class InfeasibleError(DeskBmsError):
    def __init__(self, code: str, message: str, step: Optional[int] = None):
        super().__init__(code, message)
        self.step = step


class ConvergenceError(DeskBmsError):
    pass


class ProtocolError(DeskBmsError):
    pass


class UnimplementedStrategyError(DeskBmsError):
    pass


@dataclass(frozen=True)
class ValidationResult:
    level: str  # INFO | WARNING | ERROR
    code: str   # stable short identifier (e.g. PARAM_NONPOSITIVE)
    message: str
    field: Optional[str] = None  # dotted profile path when applicable


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled trace; t(i) = start_time + i * step."""

    start_time: float
    step: float
    values: Tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if not (self.step > 0) or not math.isfinite(self.step):
            raise InputError("TRACE_STEP", f"step must be a positive number, got {self.step}")
        if not math.isfinite(self.start_time):
            raise InputError("TRACE_START", "start_time must be finite")
        if len(vals) == 0:
            raise InputError("TRACE_EMPTY", "a trace needs at least one value")
        if not np.isfinite(np.asarray(vals)).all():
            raise InputError("TRACE_NONFINITE", "trace contains non-finite values")

    def __len__(self) -> int:
        return len(self.values)

    @property
    def end_time(self) -> float:
        return self.start_time + (len(self.values) - 1) * self.step

    def time_at(self, i: int) -> float:
        return self.start_time + i * self.step

    def times(self) -> List[float]:
        return [self.time_at(i) for i in range(len(self.values))]

    def index_of(self, t: float) -> int:
        pos = (t - self.start_time) / self.step
        idx = int(round(pos))
        if abs(pos - idx) > 1e-9 or idx < 0 or idx >= len(self.values):
            raise InputError("TRACE_INDEX", f"time {t} is not a sample of this trace")
        return idx

    def nearest_index(self, t: float) -> Optional[int]:
        idx = int(round((t - self.start_time) / self.step))
        if idx < 0 or idx >= len(self.values):
            return None
        return idx

    def covers(self, t: float) -> bool:
        return self.start_time <= t <= self.end_time

    def to_numpy(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def with_values(self, values: Iterable[float]) -> "TimeSeries":
        return replace(self, values=tuple(values))

    def slice(self, start: int, stop: int) -> "TimeSeries":
        return TimeSeries(self.time_at(start), self.step, self.values[start:stop])

    def resample_hold(self, factor: int) -> "TimeSeries":
        """Zero-order hold onto a grid `factor` times finer."""
        vals = [v for v in self.values for _ in range(factor)]
        return TimeSeries(self.start_time, self.step / factor, vals)


def check_aligned(series: Sequence[TimeSeries], names: Sequence[str]) -> None:
    first = series[0]
    for s, name in zip(series[1:], names[1:]):
        if s.start_time != first.start_time or s.step != first.step or len(s) != len(first):
            raise InputError(
                "TRACE_MISALIGNED",
                f"'{name}' does not share start/step/length with '{names[0]}'",
            )


@dataclass(frozen=True)
class ZoneThermalParams:
    heat_capacity: float       # C_r, J/degC
    thermal_resistance: float  # R_r, degC/W
    hvac_max_cooling: float    # Q_max, W (magnitude)
    cop: float = 3.0
    occupant_heat: float = 100.0  # W/person
    deadband: float = 0.5      # degC

    def __post_init__(self):
        checks = [
            ("heat_capacity", self.heat_capacity > 0),
            ("thermal_resistance", self.thermal_resistance > 0),
            ("hvac_max_cooling", self.hvac_max_cooling >= 0),
            ("cop", self.cop > 0),
            ("occupant_heat", self.occupant_heat >= 0),
            ("deadband", self.deadband >= 0),
        ]
        for name, ok in checks:
            value = getattr(self, name)
            if not math.isfinite(value) or not ok:
                raise InputError("PARAM_INVALID", f"{name}={value} is outside its valid range")
        if not math.isfinite(self.time_constant):
            raise InputError("PARAM_INVALID", "R_r * C_r must be finite")

    @property
    def time_constant(self) -> float:
        return self.heat_capacity * self.thermal_resistance

    def with_values(self, **changes: float) -> "ZoneThermalParams":
        return replace(self, **changes)


CALIBRATABLE_PARAMS = (
    "heat_capacity",
    "thermal_resistance",
    "hvac_max_cooling",
    "cop",
    "occupant_heat",
)

