from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import List, Optional, Tuple

from deskbms.config import DEFAULT_SETPOINT_OC, DEFAULT_SETPOINT_UO, FORECAST_HORIZON_S, ONSET_THRESHOLD
from deskbms.core.forecast import EventSchedule, RegressionModel, next_occupied_time
from deskbms.core.thermal import SimulationState, get_stepper, thermostat_actuation
from deskbms.models import InputError, TimeSeries, ZoneThermalParams

logger = logging.getLogger(__name__)

ONSET_GRACE_S = 3600.0
WEATHER_MODES = ("persistence", "oracle")


@dataclass(frozen=True)
class SetpointPolicy:
    setpoint_oc: float = DEFAULT_SETPOINT_OC
    setpoint_uo: float = DEFAULT_SETPOINT_UO

    def __post_init__(self):
        if not (math.isfinite(self.setpoint_oc) and math.isfinite(self.setpoint_uo)):
            raise InputError("SETPOINT_NONFINITE", "setpoints must be finite")
        if not self.setpoint_oc < self.setpoint_uo:
            raise InputError("SETPOINT_ORDER", "setpoint_oc must be below setpoint_uo")


@dataclass(frozen=True)
class ControllerState:
    current_target: float
    timer: Optional[float] = None       # absolute pre-cool start
    onset: Optional[float] = None       # predicted occupancy onset
    precooling: bool = False
    occupied: bool = True
    forecast_none: bool = False

    @staticmethod
    def initial(policy: SetpointPolicy) -> "ControllerState":
        return ControllerState(current_target=policy.setpoint_oc)


@dataclass(frozen=True)
class Decision:
    timestamp: float
    event: str
    detail: str = ""

    def as_row(self) -> Tuple[float, str, str]:
        return self.timestamp, self.event, self.detail


@dataclass(frozen=True)
class PrecoolResult:
    start: float
    simulations: int
    feasible: bool


# -------------------------
# Pre-cooling
# -------------------------

def precool_terminal_temp(
    start_index: int,
    onset_index: int,
    temp_now: float,
    params: ZoneThermalParams,
    weather: TimeSeries,
    policy: SetpointPolicy,
    method: str = "euler",
    hvac_on: bool = False,
) -> float:
    """End-of-onset-slot temperature: unoccupied thermostat before start, full cooling after."""
    stepper = get_stepper(method)
    state = SimulationState(indoor_temp=temp_now, cumulative_energy=0.0, hvac_on=hvac_on)
    for i in range(onset_index + 1):
        if i < start_index:
            q_ac, _ = thermostat_actuation(policy.setpoint_uo, params, state)
        else:
            q_ac = -params.hvac_max_cooling
        state = stepper(state, params, weather.values[i], 0, q_ac, weather.step)
    return state.indoor_temp


def precool_start(
    t_now: float,
    t_pd_oc: float,
    temp_now: float,
    params: ZoneThermalParams,
    weather: TimeSeries,
    policy: SetpointPolicy,
    method: str = "euler",
    hvac_on: bool = False,
) -> PrecoolResult:
    """Latest start in [t_now, t_pd_oc] that still reaches setpoint_oc by the end of the onset slot.

    `weather` starts at t_now on the simulation clock. Falls back to t_now when no
    start is feasible.
    """
    if t_pd_oc <= t_now:
        raise InputError("HORIZON_EMPTY", f"predicted onset {t_pd_oc} is not after {t_now}")
    dt = weather.step
    if weather.start_time != t_now:
        raise InputError("TRACE_MISALIGNED", "weather slice must start at t_now")
    onset = (t_pd_oc - t_now) / dt
    n_pd = int(round(onset))
    if abs(onset - n_pd) > 1e-9:
        raise InputError("OFF_CLOCK", "predicted onset is not on the simulation clock")
    if len(weather) < n_pd + 1:
        raise InputError("TRACE_SHORT", "weather slice does not reach the onset slot")

    sims = 0

    def feasible(s: int) -> bool:
        nonlocal sims
        sims += 1
        return precool_terminal_temp(s, n_pd, temp_now, params, weather, policy, method, hvac_on) <= policy.setpoint_oc

    lo, hi = 0, n_pd
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if feasible(mid):
            lo = mid
        else:
            hi = mid - 1
    ok = True if lo > 0 else feasible(0)
    if not ok:
        logger.warning("pre-cool cannot reach %.1f degC by %.0f; starting now", policy.setpoint_oc, t_pd_oc)
    return PrecoolResult(start=t_now + lo * dt, simulations=sims, feasible=ok)


# -------------------------
# Forecasters
# -------------------------

class Forecaster:
    """Supplies the predicted onset and the weather slice used for pre-cool planning."""

    def __init__(self, weather: TimeSeries, weather_mode: str = "persistence"):
        if weather_mode not in WEATHER_MODES:
            raise InputError("WEATHER_MODE", f"weather_mode must be one of {', '.join(WEATHER_MODES)}")
        self.weather = weather
        self.weather_mode = weather_mode

    def next_onset(self, t_now: float) -> Optional[float]:
        raise NotImplementedError

    def weather_slice(self, t_now: float, n: int) -> TimeSeries:
        idx = self.weather.nearest_index(t_now)
        if idx is None:
            raise InputError("TRACE_INDEX", f"no weather observation at {t_now}")
        if self.weather_mode == "persistence":
            values = [self.weather.values[idx]] * n
        else:
            tail = list(self.weather.values[idx:idx + n])
            values = tail + [tail[-1]] * (n - len(tail))
        return TimeSeries(t_now, self.weather.step, values)


class ModelForecaster(Forecaster):
    def __init__(
        self,
        model: RegressionModel,
        schedule: EventSchedule,
        weather: TimeSeries,
        weather_mode: str = "persistence",
        threshold: float = ONSET_THRESHOLD,
    ):
        super().__init__(weather, weather_mode)
        self.model = model
        self.schedule = schedule
        self.threshold = threshold

    def next_onset(self, t_now: float) -> Optional[float]:
        return next_occupied_time(self.model, self.schedule, t_now, self.threshold, step=self.weather.step)


class TraceForecaster(Forecaster):
    """Perfect prediction: the first future slot with a non-zero count in a known trace."""

    def __init__(self, occupancy: TimeSeries, weather: TimeSeries, weather_mode: str = "oracle",
                 horizon_s: float = FORECAST_HORIZON_S):
        super().__init__(weather, weather_mode)
        self.occupancy = occupancy
        self.horizon_s = horizon_s

    def next_onset(self, t_now: float) -> Optional[float]:
        idx = self.occupancy.nearest_index(t_now)
        if idx is None:
            return None
        last = min(len(self.occupancy) - 1, idx + int(self.horizon_s // self.occupancy.step))
        for k in range(idx + 1, last + 1):
            if self.occupancy.values[k] > 0:
                return self.occupancy.time_at(k)
        return None


# -------------------------
# Controller loop
# -------------------------

def _plan_precool(
    state: ControllerState,
    t_now: float,
    temp_now: float,
    hvac_on: bool,
    forecaster: Forecaster,
    policy: SetpointPolicy,
    params: ZoneThermalParams,
    method: str,
    log: List[Decision],
) -> Tuple[ControllerState, float]:
    onset = forecaster.next_onset(t_now)
    if onset is None:
        if not state.forecast_none:
            log.append(Decision(t_now, "forecast_none", "no predicted occupancy within the horizon"))
        return ControllerState(policy.setpoint_uo, occupied=False, forecast_none=True), policy.setpoint_uo

    n = int(round((onset - t_now) / forecaster.weather.step)) + 1
    weather = forecaster.weather_slice(t_now, n)
    res = precool_start(t_now, onset, temp_now, params, weather, policy, method, hvac_on)
    log.append(Decision(t_now, "timer_set", f"start={res.start:.0f} onset={onset:.0f} sims={res.simulations}"
                        + ("" if res.feasible else " best_effort")))
    if res.start <= t_now:
        log.append(Decision(t_now, "precool_start", f"onset={onset:.0f}"))
        return ControllerState(policy.setpoint_oc, onset=onset, precooling=True, occupied=False), policy.setpoint_oc
    return ControllerState(policy.setpoint_uo, timer=res.start, onset=onset, occupied=False), policy.setpoint_uo


def controller_tick(
    state: ControllerState,
    t_now: float,
    occupancy_now: float,
    temp_now: float,
    forecaster: Forecaster,
    policy: SetpointPolicy,
    params: ZoneThermalParams,
    hvac_on: bool = False,
    method: str = "euler",
) -> Tuple[ControllerState, float, List[Decision]]:
    """One controller tick; returns (state', setpoint command, decisions logged this tick)."""
    log: List[Decision] = []

    if occupancy_now > 0:
        if state.precooling:
            log.append(Decision(t_now, "occupied", f"count={occupancy_now:g}"))
        elif not state.occupied:
            log.append(Decision(t_now, "reactive_fallback", f"count={occupancy_now:g} unpredicted"))
            logger.warning("unpredicted occupancy at %.0f; commanding occupied setpoint", t_now)
        return ControllerState(policy.setpoint_oc), policy.setpoint_oc, log

    if state.occupied:
        log.append(Decision(t_now, "vacate"))
        state, cmd = _plan_precool(state, t_now, temp_now, hvac_on, forecaster, policy, params, method, log)
        return state, cmd, log

    if state.precooling:
        if state.onset is not None and t_now >= state.onset + ONSET_GRACE_S:
            log.append(Decision(t_now, "onset_missed", f"onset={state.onset:.0f}"))
            state, cmd = _plan_precool(state, t_now, temp_now, hvac_on, forecaster, policy, params, method, log)
            return state, cmd, log
        return state, policy.setpoint_oc, log

    if state.timer is not None:
        if t_now >= state.timer:
            log.append(Decision(t_now, "precool_start", f"onset={state.onset:.0f}"))
            return replace(state, timer=None, precooling=True, current_target=policy.setpoint_oc), policy.setpoint_oc, log
        return state, policy.setpoint_uo, log

    state, cmd = _plan_precool(state, t_now, temp_now, hvac_on, forecaster, policy, params, method, log)
    return state, cmd, log
