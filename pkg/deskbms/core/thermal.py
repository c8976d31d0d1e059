from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

from deskbms.models import InputError, TimeSeries, ZoneThermalParams, check_aligned

logger = logging.getLogger(__name__)

# Setpoint schedules are plain traces of degC values on the simulation clock.
SetpointSchedule = TimeSeries


@dataclass(frozen=True)
class SimulationState:
    indoor_temp: float         # degC
    cumulative_energy: float   # Wh (electrical)
    clock: int = 0
    hvac_on: bool = False


@dataclass(frozen=True)
class SimulationResult:
    temperatures: TimeSeries   # values[i] = T_i at the end of slot i
    energy_wh: float
    plan: TimeSeries           # Q_AC actually applied, W
    final_state: SimulationState


def occupant_heat_gain(occupants: float, params: ZoneThermalParams) -> float:
    if not math.isfinite(occupants) or occupants < 0 or occupants != int(occupants):
        raise InputError("OCCUPANCY_INVALID", f"occupants must be a whole number >= 0, got {occupants}")
    return params.occupant_heat * occupants


def equilibrium_temp(params: ZoneThermalParams, t_out: float, occupants: float, q_ac: float) -> float:
    return t_out + params.thermal_resistance * (q_ac + occupant_heat_gain(occupants, params))


def step_energy_wh(q_ac: float, dt: float, params: ZoneThermalParams) -> float:
    return abs(q_ac) * dt / (3600.0 * params.cop)


def _check_inputs(state: SimulationState, params: ZoneThermalParams, t_out: float, q_ac: float, dt: float) -> None:
    for name, v in (("indoor_temp", state.indoor_temp), ("t_out", t_out), ("q_ac", q_ac), ("dt", dt)):
        if not math.isfinite(v):
            raise InputError("INPUT_NONFINITE", f"{name} is not finite")
    if dt <= 0:
        raise InputError("DT_NONPOSITIVE", f"dt must be > 0, got {dt}")
    if q_ac > 0:
        raise InputError("HEATING_REJECTED", "the plant is cooling-only; Q_AC must be <= 0")
    if -q_ac > params.hvac_max_cooling * (1 + 1e-12):
        raise InputError("Q_EXCEEDS_CAPACITY", f"|Q_AC|={-q_ac} exceeds Q_max={params.hvac_max_cooling}")


def _advance(state: SimulationState, params: ZoneThermalParams, q_ac: float, dt: float, temp: float) -> SimulationState:
    return SimulationState(
        indoor_temp=temp,
        cumulative_energy=state.cumulative_energy + step_energy_wh(q_ac, dt, params),
        clock=state.clock + 1,
        hvac_on=q_ac < 0,
    )


def step_euler(
    state: SimulationState,
    params: ZoneThermalParams,
    t_out: float,
    occupants: float,
    q_ac: float,
    dt: float,
) -> SimulationState:
    """Explicit Euler on the pre-step state; exact at the equilibrium temperature."""
    _check_inputs(state, params, t_out, q_ac, dt)
    if dt >= 2.0 * params.time_constant:
        raise InputError("DT_UNSTABLE", f"dt={dt} >= 2*R*C={2.0 * params.time_constant}")
    t_eq = equilibrium_temp(params, t_out, occupants, q_ac)
    temp = state.indoor_temp + (dt / params.time_constant) * (t_eq - state.indoor_temp)
    return _advance(state, params, q_ac, dt, temp)


def step_exact(
    state: SimulationState,
    params: ZoneThermalParams,
    t_out: float,
    occupants: float,
    q_ac: float,
    dt: float,
) -> SimulationState:
    """Closed-form step for inputs held constant over dt."""
    _check_inputs(state, params, t_out, q_ac, dt)
    t_eq = equilibrium_temp(params, t_out, occupants, q_ac)
    temp = t_eq + (state.indoor_temp - t_eq) * math.exp(-dt / params.time_constant)
    return _advance(state, params, q_ac, dt, temp)


Stepper = Callable[[SimulationState, ZoneThermalParams, float, float, float, float], SimulationState]

STEPPERS: Dict[str, Stepper] = {
    "euler": step_euler,
    "exact": step_exact,
}


def get_stepper(method: str) -> Stepper:
    try:
        return STEPPERS[method]
    except KeyError:
        raise InputError("METHOD_UNKNOWN", f"unknown integration method '{method}' (euler|exact)") from None


def simulate(
    params: ZoneThermalParams,
    initial_temp: float,
    weather: TimeSeries,
    occupancy: TimeSeries,
    hvac_plan: TimeSeries,
    method: str = "euler",
) -> SimulationResult:
    check_aligned([weather, occupancy, hvac_plan], ["weather", "occupancy", "hvac_plan"])
    stepper = get_stepper(method)
    dt = weather.step

    state = SimulationState(indoor_temp=float(initial_temp), cumulative_energy=0.0)
    temps = []
    for t_out, occ, q_ac in zip(weather.values, occupancy.values, hvac_plan.values):
        state = stepper(state, params, t_out, occ, q_ac, dt)
        temps.append(state.indoor_temp)

    return SimulationResult(
        temperatures=weather.with_values(temps),
        energy_wh=state.cumulative_energy,
        plan=hvac_plan,
        final_state=state,
    )


def thermostat_actuation(
    setpoint: float,
    params: ZoneThermalParams,
    state: SimulationState,
) -> Tuple[float, bool]:
    """Cooling-only bang-bang with hysteresis; returns (Q_AC, compressor_on)."""
    if state.indoor_temp > setpoint + params.deadband:
        on = True
    elif state.indoor_temp < setpoint - params.deadband:
        on = False
    else:
        on = state.hvac_on
    return (-params.hvac_max_cooling if on else 0.0), on


def run_thermostat(
    params: ZoneThermalParams,
    initial_temp: float,
    weather: TimeSeries,
    occupancy: TimeSeries,
    setpoints: SetpointSchedule,
    method: str = "euler",
    initial_hvac_on: bool = False,
) -> SimulationResult:
    check_aligned([weather, occupancy, setpoints], ["weather", "occupancy", "setpoints"])
    stepper = get_stepper(method)
    dt = weather.step

    state = SimulationState(indoor_temp=float(initial_temp), cumulative_energy=0.0, hvac_on=initial_hvac_on)
    temps, plan = [], []
    for t_out, occ, sp in zip(weather.values, occupancy.values, setpoints.values):
        q_ac, _ = thermostat_actuation(sp, params, state)
        state = stepper(state, params, t_out, occ, q_ac, dt)
        temps.append(state.indoor_temp)
        plan.append(q_ac)

    logger.debug("thermostat run: %d steps, %.1f Wh", len(temps), state.cumulative_energy)
    return SimulationResult(
        temperatures=weather.with_values(temps),
        energy_wh=state.cumulative_energy,
        plan=weather.with_values(plan),
        final_state=state,
    )


def constant_plan(like: TimeSeries, q_ac: float) -> TimeSeries:
    return like.with_values([q_ac] * len(like))


def max_abs_difference(a: TimeSeries, b: TimeSeries, stride: Optional[int] = None) -> float:
    """Max |a - b|; `stride` samples `a` every stride-th value to compare a finer trace."""
    av = a.values if stride is None else a.values[stride - 1::stride]
    if len(av) != len(b.values):
        raise InputError("TRACE_MISALIGNED", "traces differ in length")
    return max(abs(x - y) for x, y in zip(av, b.values))
