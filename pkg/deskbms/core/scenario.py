from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from deskbms.config import DP_ACTION_LEVELS
from deskbms.core.comfort import ComfortAssumptions, ComfortStats, assess_trace
from deskbms.core.cosim import InProcessPlant, Plant, SocketPlant, start_server_thread
from deskbms.core.counter import replay
from deskbms.core.forecast import DAY_S, EventSchedule, RegressionModel, fit
from deskbms.core.generator import generate_mosque_scenario, reference_weather
from deskbms.core.mpc import (
    ControllerState,
    Decision,
    Forecaster,
    ModelForecaster,
    SetpointPolicy,
    TraceForecaster,
    controller_tick,
)
from deskbms.core.profiles import CONTROLLERS, TRANSPORTS, ScenarioProfile
from deskbms.core.strategy import ControlProblem, PenaltyWeights, penalty_alpha
from deskbms.core.thermal import step_energy_wh
from deskbms.core.traces import read_events_csv, read_schedule_csv, read_trace_csv
from deskbms.models import InputError, TimeSeries, ValidationResult, ZoneThermalParams, check_aligned

logger = logging.getLogger(__name__)

ProgressCb = Callable[[int, int, str], None]


@dataclass(frozen=True)
class Scenario:
    name: str
    params: ZoneThermalParams
    initial_temp: float
    weather: TimeSeries
    humidity: TimeSeries
    occupancy: TimeSeries
    policy: SetpointPolicy = SetpointPolicy()
    weights: PenaltyWeights = PenaltyWeights()
    comfort: ComfortAssumptions = ComfortAssumptions()
    controller: str = "hvac-mpc"
    transport: str = "in-process"
    method: str = "euler"
    forecast_source: str = "model"   # model | perfect
    weather_mode: str = "oracle"
    threshold: float = 0.05
    model: Optional[RegressionModel] = None
    schedule: Optional[EventSchedule] = None

    def __post_init__(self):
        check_aligned([self.weather, self.humidity, self.occupancy], ["weather", "humidity", "occupancy"])
        if self.controller not in CONTROLLERS:
            raise InputError("CONTROLLER_UNKNOWN", f"controller must be one of {', '.join(CONTROLLERS)}")
        if self.transport not in TRANSPORTS:
            raise InputError("TRANSPORT_UNKNOWN", f"transport must be one of {', '.join(TRANSPORTS)}")
        if self.controller == "hvac-mpc" and self.forecast_source == "model" and (self.model is None or self.schedule is None):
            raise InputError("FORECAST_MISSING", "model forecasting needs a fitted model and a schedule")

    @property
    def steps(self) -> int:
        return len(self.weather)

    def forecaster(self) -> Forecaster:
        if self.forecast_source == "perfect":
            return TraceForecaster(self.occupancy, self.weather, self.weather_mode)
        return ModelForecaster(self.model, self.schedule, self.weather, self.weather_mode, self.threshold)

    def control_problem(self, action_levels: int = DP_ACTION_LEVELS) -> ControlProblem:
        """The scenario with its true traces, as scored by penalty alpha and solved by the strategies."""
        return ControlProblem.from_series(self.params, self.initial_temp, self.weather, self.occupancy,
                                          self.humidity, self.comfort, action_levels, self.method)


@dataclass(frozen=True)
class ControlRun:
    controller: str
    temperatures: TimeSeries
    plan: TimeSeries        # Q_AC applied, W
    setpoints: TimeSeries   # commanded setpoint, degC (nominal occupied setpoint for the baseline)
    energy_wh: float
    decisions: Tuple[Decision, ...] = ()


@dataclass(frozen=True)
class ScenarioReport:
    name: str
    controller: str
    method: str
    steps: int
    dt: float
    energy_wh: float
    daily_energy_wh: Tuple[float, ...]
    comfort_fraction: Optional[float]
    mean_ppd: Optional[float]
    occupied_steps: int
    out_of_range_steps: int
    alpha: float
    alpha_energy_kwh: float
    alpha_overheat: float
    alpha_overcool: float
    baseline_energy_wh: Optional[float] = None
    baseline_daily_energy_wh: Tuple[float, ...] = ()
    baseline_comfort_fraction: Optional[float] = None
    baseline_mean_ppd: Optional[float] = None
    baseline_alpha: Optional[float] = None
    savings_pct: Optional[float] = None
    daily_savings_pct: Tuple[Optional[float], ...] = ()
    savings_mean_pct: Optional[float] = None
    savings_std_pct: Optional[float] = None
    decision_counts: Dict[str, int] = field(default_factory=dict)
    decision_log: Optional[str] = None   # file name, relative to the report


@dataclass(frozen=True)
class ScenarioRun:
    report: Optional[ScenarioReport]
    controlled: Optional[ControlRun]
    baseline: Optional[ControlRun]
    issues: Tuple[ValidationResult, ...] = ()
    transport: str = "in-process"


# -------------------------
# Assembly
# -------------------------

def _resolve(base_dir: Path, p: Optional[str]) -> Path:
    if not p:
        raise InputError("PATH_MISSING", "profile refers to a file path that is not set")
    path = Path(p)
    return path if path.is_absolute() else base_dir / path


def build_scenario(profile: ScenarioProfile, base_dir: Path = Path(".")) -> Scenario:
    """Turns a profile into aligned traces, a schedule and (when needed) a fitted forecast model."""
    base_dir = Path(base_dir)
    knobs = profile.generator
    start = knobs.scenario_start
    n = int(round(knobs.days * DAY_S / knobs.dt))

    mosque = None
    if profile.occupancy.source == "generator" or profile.forecast.schedule_csv is None:
        mosque = generate_mosque_scenario(knobs)

    src = profile.occupancy.source
    if src == "generator":
        occupancy = mosque.scenario_slice(knobs)
        history = mosque.occupancy.slice(0, mosque.occupancy.index_of(start)) if knobs.history_days else None
    elif src == "trace":
        occupancy = read_trace_csv(_resolve(base_dir, profile.occupancy.path))
        history = None
    elif src == "events":
        events = read_events_csv(_resolve(base_dir, profile.occupancy.path))
        occupancy, _, stats = replay(events, start, knobs.dt, n, profile.occupancy.idle_timeout_s)
        if stats.inconsistency_count:
            logger.warning("occupancy replay resolved %d inconsistencies", stats.inconsistency_count)
        history = None
    else:
        raise InputError("OCCUPANCY_SOURCE", f"unknown occupancy source '{src}'")

    if profile.forecast.history_csv:
        history = read_trace_csv(_resolve(base_dir, profile.forecast.history_csv))

    if profile.weather.source == "reference":
        weather, humidity = reference_weather(occupancy.start_time, len(occupancy), occupancy.step, profile.weather.knobs)
    elif profile.weather.source == "csv":
        weather = read_trace_csv(_resolve(base_dir, profile.weather.weather_csv))
        humidity = read_trace_csv(_resolve(base_dir, profile.weather.humidity_csv))
    else:
        raise InputError("WEATHER_SOURCE", f"unknown weather source '{profile.weather.source}'")

    if profile.forecast.schedule_csv:
        schedule = read_schedule_csv(
            _resolve(base_dir, profile.forecast.schedule_csv),
            capacity=knobs.capacity,
            holidays_path=_resolve(base_dir, profile.forecast.holidays_csv) if profile.forecast.holidays_csv else None,
        )
    else:
        schedule = mosque.schedule

    model = None
    if profile.controller == "hvac-mpc" and profile.forecast.source == "model":
        if history is None:
            raise InputError("HISTORY_MISSING", "model forecasting needs occupancy history before the scenario")
        model = fit(history, schedule, profile.forecast.recipe, as_of=occupancy.start_time,
                    window_days=profile.forecast.window_days, window_min=profile.forecast.event_window_min)

    return Scenario(
        name=profile.name,
        params=profile.zone,
        initial_temp=profile.initial_temp,
        weather=weather,
        humidity=humidity,
        occupancy=occupancy,
        policy=profile.policy,
        weights=profile.weights,
        comfort=profile.comfort,
        controller=profile.controller,
        transport=profile.transport,
        method=profile.method,
        forecast_source=profile.forecast.source,
        weather_mode=profile.forecast.weather_mode,
        threshold=profile.forecast.threshold,
        model=model,
        schedule=schedule,
    )


# -------------------------
# Runs
# -------------------------

def run_controller(
    scenario: Scenario,
    controller: str,
    plant: Plant,
    progress_cb: Optional[ProgressCb] = None,
    is_cancelled: Optional[Callable[[], bool]] = None,
) -> Optional[ControlRun]:
    """Drives one controller against a plant session; None when cancelled. The plant is always closed."""
    s = scenario
    state = ControllerState.initial(s.policy)
    forecaster = s.forecaster() if controller == "hvac-mpc" else None
    temp, hvac_on = s.initial_temp, False
    temps: List[float] = []
    plan: List[float] = []
    setpoints: List[float] = []
    decisions: List[Decision] = []
    energy = 0.0

    try:
        plant.init(s.params, s.initial_temp, s.weather.step, s.method)
        for i in range(s.steps):
            if is_cancelled and is_cancelled():
                logger.info("%s run cancelled at step %d", controller, i)
                return None
            t = s.weather.time_at(i)
            occ = s.occupancy.values[i]
            if controller == "baseline":
                sp = s.policy.setpoint_oc
                reply = plant.step(i, s.weather.values[i], occ, q_ac=-s.params.hvac_max_cooling, rh=s.humidity.values[i])
            else:
                state, sp, log = controller_tick(state, t, occ, temp, forecaster, s.policy, s.params, hvac_on, s.method)
                decisions.extend(log)
                reply = plant.step(i, s.weather.values[i], occ, setpoint=sp, rh=s.humidity.values[i])
            temp, hvac_on = reply.t_in, reply.hvac_on
            energy += reply.energy_wh
            temps.append(temp)
            plan.append(reply.q_ac)
            setpoints.append(sp)
            if progress_cb and (i % 144 == 0 or i == s.steps - 1):
                progress_cb(i + 1, s.steps, controller)
        plant.end()
    finally:
        plant.close()

    logger.info("%s run: %d steps, %.1f Wh", controller, s.steps, energy)
    return ControlRun(
        controller=controller,
        temperatures=s.weather.with_values(temps),
        plan=s.weather.with_values(plan),
        setpoints=s.weather.with_values(setpoints),
        energy_wh=energy,
        decisions=tuple(decisions),
    )


def _daily(values: List[float], steps_per_day: int) -> Tuple[float, ...]:
    return tuple(float(sum(values[i:i + steps_per_day])) for i in range(0, len(values), steps_per_day))


def _savings(base: float, ctrl: float) -> Optional[float]:
    return None if base == 0 else 100.0 * (base - ctrl) / base


def build_report(
    scenario: Scenario,
    run: ControlRun,
    baseline: Optional[ControlRun],
    problem: Optional[ControlProblem] = None,
) -> ScenarioReport:
    s = scenario
    steps_per_day = max(1, int(round(DAY_S / s.weather.step)))
    occupied = [o > 0 for o in s.occupancy.values]
    problem = problem or s.control_problem()

    def energy_per_step(r: ControlRun) -> List[float]:
        return [step_energy_wh(q, r.plan.step, s.params) for q in r.plan.values]

    def stats(r: ControlRun) -> ComfortStats:
        return assess_trace(r.temperatures, s.humidity, occupied, s.comfort)

    ctrl_stats = stats(run)
    ctrl_alpha = penalty_alpha(run.plan.values, problem, s.weights)
    daily = _daily(energy_per_step(run), steps_per_day)

    extra: Dict[str, object] = {}
    if baseline is not None:
        base_stats = stats(baseline)
        base_daily = _daily(energy_per_step(baseline), steps_per_day)
        daily_savings = tuple(_savings(b, c) for b, c in zip(base_daily, daily))
        defined = np.array([d for d in daily_savings if d is not None], dtype=float)
        extra = dict(
            baseline_energy_wh=baseline.energy_wh,
            baseline_daily_energy_wh=base_daily,
            baseline_comfort_fraction=base_stats.fraction_within,
            baseline_mean_ppd=base_stats.mean_ppd,
            baseline_alpha=penalty_alpha(baseline.plan.values, problem, s.weights).alpha,
            savings_pct=_savings(baseline.energy_wh, run.energy_wh),
            daily_savings_pct=daily_savings,
            savings_mean_pct=float(defined.mean()) if len(defined) else None,
            savings_std_pct=float(defined.std()) if len(defined) else None,
        )

    return ScenarioReport(
        name=s.name,
        controller=run.controller,
        method=s.method,
        steps=s.steps,
        dt=s.weather.step,
        energy_wh=run.energy_wh,
        daily_energy_wh=daily,
        comfort_fraction=ctrl_stats.fraction_within,
        mean_ppd=ctrl_stats.mean_ppd,
        occupied_steps=ctrl_stats.occupied_steps,
        out_of_range_steps=ctrl_stats.out_of_range_steps,
        alpha=ctrl_alpha.alpha,
        alpha_energy_kwh=ctrl_alpha.energy_kwh,
        alpha_overheat=ctrl_alpha.overheat,
        alpha_overcool=ctrl_alpha.overcool,
        decision_counts=dict(sorted(Counter(d.event for d in run.decisions).items())),
        **extra,
    )


def _plant_factory(scenario: Scenario, sessions: int) -> Callable[[], Plant]:
    if scenario.transport == "in-process":
        return InProcessPlant
    endpoint, _thread = start_server_thread(sessions=sessions)
    return lambda: SocketPlant(*endpoint)


def run_scenario(
    scenario: Scenario,
    progress_cb: Optional[ProgressCb] = None,
    is_cancelled: Optional[Callable[[], bool]] = None,
) -> ScenarioRun:
    """Runs the chosen controller (plus the paired always-on baseline for hvac-mpc)."""
    controllers = [scenario.controller]
    if scenario.controller == "hvac-mpc":
        controllers.append("baseline")
    make_plant = _plant_factory(scenario, len(controllers))

    runs: Dict[str, ControlRun] = {}
    for name in controllers:
        run = run_controller(scenario, name, make_plant(), progress_cb, is_cancelled)
        if run is None:
            issue = ValidationResult("WARNING", "RUN_CANCELLED", "Scenario run cancelled by user.")
            return ScenarioRun(None, runs.get(scenario.controller), None, (issue,), scenario.transport)
        runs[name] = run

    controlled = runs[scenario.controller]
    baseline = runs.get("baseline") if scenario.controller == "hvac-mpc" else None
    report = build_report(scenario, controlled, baseline)
    return ScenarioRun(report, controlled, baseline, tuple(run_issues(report, controlled)), scenario.transport)


def run_issues(report: ScenarioReport, run: ControlRun) -> List[ValidationResult]:
    issues: List[ValidationResult] = []
    counts = report.decision_counts
    if counts.get("reactive_fallback"):
        issues.append(ValidationResult(
            "WARNING", "REACTIVE_FALLBACK",
            f"{counts['reactive_fallback']} unpredicted arrival(s) handled reactively."))
    if counts.get("onset_missed"):
        issues.append(ValidationResult(
            "WARNING", "ONSET_MISSED", f"{counts['onset_missed']} predicted arrival(s) never happened."))
    best_effort = sum(1 for d in run.decisions if d.event == "timer_set" and "best_effort" in d.detail)
    if best_effort:
        issues.append(ValidationResult(
            "INFO", "PRECOOL_BEST_EFFORT", f"{best_effort} pre-cool(s) could not reach the occupied setpoint in time."))
    if report.out_of_range_steps:
        issues.append(ValidationResult(
            "WARNING", "PMV_RANGE", f"{report.out_of_range_steps} occupied step(s) outside the PMV temperature range."))
    if report.comfort_fraction is not None and report.comfort_fraction < 0.9:
        issues.append(ValidationResult(
            "WARNING", "COMFORT_LOW", f"Only {100 * report.comfort_fraction:.1f}% of occupied steps within |PMV| <= 0.5."))
    if report.savings_pct is not None:
        issues.append(ValidationResult("INFO", "SAVINGS", f"Energy savings vs always-on baseline: {report.savings_pct:.1f}%."))
    return issues
