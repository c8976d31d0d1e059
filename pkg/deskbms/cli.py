"""Command-line entry points: simulate, calibrate, count, forecast, control, serve, generate, gui."""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd

from deskbms.config import APP_NAME, APP_VERSION, DEFAULT_DT_S, LOG_FORMAT
from deskbms.core.calibration import (
    ScenarioInputs,
    calibrate,
    error_landscape,
    guideline14_check,
)
from deskbms.core.cosim import serve_simulator, serve_stream
from deskbms.core.counter import accuracy_rate, classification_metrics, match_events, replay
from deskbms.core.forecast import DAY_S, RECIPES, compare_recipes, fit, forecast_day, utc_date
from deskbms.core.generator import generate_mosque_scenario, reference_weather
from deskbms.core.manifest import build_calibration_dict, build_count_dict, build_forecast_dict, write_report_json
from deskbms.core.profiles import CONTROLLERS, TRANSPORTS, ScenarioProfile, default_profiles, load_profile_file, \
    profile_path, save_profile, to_json_dict
from deskbms.core.reporting import write_run_bundle
from deskbms.core.scenario import Scenario, build_scenario, run_scenario
from deskbms.core.strategy import STRATEGIES, solve
from deskbms.core.thermal import STEPPERS, constant_plan, run_thermostat, simulate
from deskbms.core.traces import (
    read_events_csv,
    read_plan_csv,
    read_schedule_csv,
    read_trace_csv,
    to_epoch,
    write_events_csv,
    write_grid_csv,
    write_plan_csv,
    write_schedule_csv,
    write_trace_csv,
)
from deskbms.core.validator import has_errors, validate_profile
from deskbms.models import DeskBmsError, InputError

logger = logging.getLogger(__name__)

REPO_ROOT = Path(__file__).resolve().parents[1]

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INTERNAL = 2


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _epoch(text: str) -> float:
    return float(to_epoch(pd.Series([text]))[0])


# -------------------------
# Profiles
# -------------------------

def _load_profile(args) -> Tuple[ScenarioProfile, Path]:
    if getattr(args, "scenario", None):
        path = Path(args.scenario)
        profile, base_dir = load_profile_file(path), path.resolve().parent
    else:
        name = getattr(args, "profile", None) or "reference"
        on_disk = profile_path(str(REPO_ROOT), name)
        if on_disk.is_file():
            profile = load_profile_file(on_disk)
        elif name in default_profiles():
            profile = default_profiles()[name]
        else:
            raise InputError("PROFILE_UNKNOWN", f"no profile named '{name}'")
        base_dir = on_disk.parent
    if getattr(args, "seed", None) is not None:
        profile = replace(profile, generator=replace(profile.generator, seed=args.seed))
    return profile, base_dir


def _scenario_traces(profile: ScenarioProfile, base_dir: Path) -> Scenario:
    # the baseline controller needs no forecast model
    return build_scenario(replace(profile, controller="baseline"), base_dir)


def _print_results(results) -> None:
    for r in results:
        where = f" [{r.field}]" if r.field else ""
        print(f"{r.level:<7} {r.code}: {r.message}{where}", file=sys.stderr)


# -------------------------
# Subcommands
# -------------------------

def cmd_simulate(args) -> int:
    profile, base_dir = _load_profile(args)
    weather = read_trace_csv(Path(args.weather))
    occupancy = read_trace_csv(Path(args.occupancy)) if args.occupancy else weather.with_values([0.0] * len(weather))
    initial = profile.initial_temp if args.initial_temp is None else args.initial_temp
    method = args.method or profile.method

    if args.plan:
        result = simulate(profile.zone, initial, weather, occupancy, read_plan_csv(Path(args.plan)), method)
    elif args.setpoint is not None:
        result = run_thermostat(profile.zone, initial, weather, occupancy,
                                weather.with_values([args.setpoint] * len(weather)), method)
    else:
        result = simulate(profile.zone, initial, weather, occupancy, constant_plan(weather, 0.0), method)

    write_trace_csv(result.temperatures, Path(args.out), column="t_in_c")
    if args.plan_out:
        write_plan_csv(result.plan, Path(args.plan_out))
    print(json.dumps({"steps": len(result.temperatures), "energy_wh": result.energy_wh,
                      "final_temp_c": result.final_state.indoor_temp}))
    return EXIT_OK


def cmd_calibrate(args) -> int:
    profile, base_dir = _load_profile(args)
    space = profile.calibration
    if args.threshold is not None:
        space = replace(space, threshold=args.threshold)

    if args.weather:
        weather = read_trace_csv(Path(args.weather))
        occupancy = read_trace_csv(Path(args.occupancy)) if args.occupancy else weather.with_values([0.0] * len(weather))
    else:
        s = _scenario_traces(profile, base_dir)
        weather, occupancy = s.weather, s.occupancy

    if args.measured:
        measured = read_trace_csv(Path(args.measured))
        plan = read_plan_csv(Path(args.plan)) if args.plan else constant_plan(weather, 0.0)
    else:
        # self-generated: the profile zone plays the real building under its thermostat schedule
        setpoints = occupancy.with_values(
            profile.policy.setpoint_oc if o > 0 else profile.policy.setpoint_uo for o in occupancy.values
        )
        truth = run_thermostat(profile.zone, profile.initial_temp, weather, occupancy, setpoints, profile.method)
        measured, plan = truth.temperatures, truth.plan
        logger.info("calibrating against a self-generated trace of %d samples", len(measured))

    inputs = ScenarioInputs(profile.zone, profile.initial_temp, weather, occupancy, plan, profile.method)
    result = calibrate(space, inputs, measured, workers=args.workers)
    simulated = inputs.run(result.values)
    guideline = guideline14_check(measured, simulated, args.resolution)

    report = build_calibration_dict(result, guideline, space.values(), profile.name)
    write_report_json(report, args.out)
    if args.landscape and len(space.parameters) >= 2:
        xs, ys, grid = error_landscape(space.with_values(result.values), 0, 1, inputs, measured,
                                       n=args.landscape_n, workers=args.workers)
        write_grid_csv(xs, ys, grid, space.parameters[0].name, space.parameters[1].name, Path(args.landscape))

    print(f"cvrmse={result.cvrmse:.5f} mbe={result.mbe:.5f} rounds={result.rounds} "
          f"cosimulations={result.cosimulations} converged={result.converged}")
    return EXIT_OK


def _count_metrics(detected, truth, tolerance: float):
    match = match_events(detected, truth, tolerance)
    metrics: Dict[str, Optional[float]] = {}
    undefined: List[str] = []
    try:
        p, r, f1 = classification_metrics(match.true_positives, match.false_positives, match.false_negatives)
        metrics.update(precision=p, recall=r, f1=f1)
    except DeskBmsError as e:
        undefined.append(e.code)
        metrics.update(precision=None, recall=None, f1=None)
    try:
        metrics["accuracy_rate"] = accuracy_rate(match.total_in, match.missing_in, match.total_out, match.missing_out)
    except DeskBmsError as e:
        undefined.append(e.code)
        metrics["accuracy_rate"] = None
    metrics["undefined"] = undefined
    return match, metrics


def cmd_count(args) -> int:
    events = read_events_csv(Path(args.events))
    if not events:
        raise InputError("EVENTS_EMPTY", f"{args.events} has no crossings")
    step = args.step
    start = _epoch(args.start) if args.start else math.floor(events[0].timestamp / DAY_S) * DAY_S
    n = args.samples or int(math.floor((events[-1].timestamp - start) / step)) + 2
    idle = None if args.idle_timeout <= 0 else args.idle_timeout

    trace, state, stats = replay(events, start, step, n, idle)
    write_trace_csv(trace, Path(args.out), column="occupants")

    match, metrics = None, None
    if args.truth:
        match, metrics = _count_metrics(events, read_events_csv(Path(args.truth)), args.tolerance)
    if args.report:
        write_report_json(build_count_dict(stats, state.occupants, match, metrics), args.report)

    print(f"samples={len(trace)} events={stats.events} inconsistencies={stats.inconsistency_count} "
          f"final_occupants={state.occupants}")
    return EXIT_OK


def cmd_forecast(args) -> int:
    profile, base_dir = _load_profile(args)
    knobs = profile.generator
    if args.history:
        history = read_trace_csv(Path(args.history))
        if not args.schedule:
            raise InputError("SCHEDULE_MISSING", "--history needs --schedule")
        schedule = read_schedule_csv(Path(args.schedule), args.capacity or knobs.capacity,
                                     Path(args.holidays) if args.holidays else None)
    else:
        mosque = generate_mosque_scenario(knobs)
        history, schedule = mosque.occupancy, mosque.schedule

    recipe = args.recipe or profile.forecast.recipe
    as_of = _epoch(args.as_of) if args.as_of else history.end_time + history.step
    model = fit(history, schedule, recipe, as_of=as_of,
                window_days=profile.forecast.window_days, window_min=profile.forecast.event_window_min)

    scores = []
    holdout = None
    if args.holdout:
        holdout_start = _epoch(args.holdout)
        holdout = utc_date(holdout_start).isoformat()
        scores = compare_recipes(history, schedule, holdout_start, tuple(RECIPES),
                                 profile.forecast.window_days, profile.forecast.event_window_min)
        for s in scores:
            print(f"{s.label:<12} R2={s.r_squared:.3f} RMSE={s.rmse:.4f}")

    if args.out:
        day = _epoch(args.day) if args.day else math.floor(as_of / DAY_S) * DAY_S
        write_trace_csv(forecast_day(model, schedule, day, history.step), Path(args.out), column="predicted")
    write_report_json(build_forecast_dict(model, scores, holdout, profile.name), args.model_out)
    print(f"fitted {RECIPES[recipe].label} on {model.training_samples} samples")
    return EXIT_OK


def cmd_control(args) -> int:
    if args.plan_csv and not args.strategy:
        raise InputError("STRATEGY_MISSING", "--plan-csv needs --strategy")
    profile, base_dir = _load_profile(args)
    overrides = {k: v for k, v in (("controller", args.controller), ("transport", args.transport),
                                   ("method", args.method)) if v}
    if args.forecast_source:
        overrides["forecast"] = replace(profile.forecast, source=args.forecast_source)
    profile = replace(profile, **overrides)

    results = validate_profile(profile, base_dir)
    if has_errors(results):
        _print_results(results)
        return EXIT_INPUT

    scenario = build_scenario(profile, base_dir)
    plan = None
    if args.strategy:
        plan = solve(args.strategy, scenario.control_problem(), scenario.weights)
        logger.info("%s plan: objective %.3f over %d steps", plan.strategy, plan.objective, len(plan.plan))

    run = run_scenario(scenario)
    for label, path in write_run_bundle(run, scenario, args.out, profile=profile.name,
                                        strategy=plan, plan_path=args.plan_csv):
        logger.info("%s written: %s", label, path)

    rep = run.report
    line = f"{rep.controller}: {rep.energy_wh / 1000.0:.1f} kWh"
    if rep.savings_pct is not None:
        line += f", savings {rep.savings_pct:.1f}% vs always-on"
    if rep.comfort_fraction is not None:
        line += f", comfort {100 * rep.comfort_fraction:.1f}%"
    if plan is not None:
        line += f", alpha {rep.alpha:.2f} vs {plan.strategy} plan {plan.breakdown.alpha:.2f}"
    print(line)
    return EXIT_OK


def cmd_serve(args) -> int:
    if args.stdio:
        serve_stream(sys.stdin.buffer, sys.stdout.buffer)
        return EXIT_OK

    def announce(endpoint) -> None:
        print(f"{endpoint[0]}:{endpoint[1]}", flush=True)

    serve_simulator(args.host, args.port, args.sessions, on_listening=announce)
    return EXIT_OK


def cmd_generate(args) -> int:
    profile, _ = _load_profile(args)
    knobs = profile.generator
    changes = {k: v for k, v in (("days", args.days), ("history_days", args.history_days),
                                 ("capacity", args.capacity)) if v is not None}
    knobs = replace(knobs, **changes)
    mosque = generate_mosque_scenario(knobs)
    out = Path(args.out)

    first = mosque.occupancy.index_of(knobs.scenario_start)
    occupancy = mosque.scenario_slice(knobs)
    weather, humidity = reference_weather(occupancy.start_time, len(occupancy), occupancy.step, profile.weather.knobs)

    write_trace_csv(occupancy, out / "occupancy.csv")
    if first > 0:
        write_trace_csv(mosque.occupancy.slice(0, first), out / "history.csv")
    write_events_csv(mosque.events, out / "events.csv")
    holidays = out / "holidays.csv" if knobs.holidays else None
    write_schedule_csv(mosque.schedule, out / "schedule.csv", holidays)
    write_trace_csv(weather, out / "weather.csv")
    write_trace_csv(humidity, out / "humidity.csv")

    scenario_profile = replace(
        profile,
        name=args.name,
        generator=knobs,
        weather=replace(profile.weather, source="csv", weather_csv="weather.csv", humidity_csv="humidity.csv"),
        occupancy=replace(profile.occupancy, source="trace", path="occupancy.csv"),
        forecast=replace(profile.forecast, schedule_csv="schedule.csv",
                         holidays_csv="holidays.csv" if holidays else None,
                         history_csv="history.csv" if first > 0 else None),
    )
    (out / "scenario.json").write_text(json.dumps(to_json_dict(scenario_profile), indent=2) + "\n", encoding="utf-8")
    print(f"wrote {knobs.days} day(s) (+{knobs.history_days} history) with seed {knobs.seed} to {out}")
    return EXIT_OK


def cmd_profiles(args) -> int:
    for name, prof in default_profiles().items():
        path = profile_path(str(REPO_ROOT), name)
        if args.write and not path.exists():
            save_profile(str(REPO_ROOT), prof)
        print(f"{name:<18} {prof.controller:<9} {prof.transport:<11} {path if path.exists() else '(built-in)'}")
    return EXIT_OK


def cmd_gui(args) -> int:
    from deskbms.app import run_app

    return run_app()


# -------------------------
# Parser
# -------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    common.add_argument("--seed", type=int, default=None, help="Seed for every random draw (generator)")

    scen = _Parser(add_help=False)
    scen.add_argument("--scenario", help="Scenario profile JSON file")
    scen.add_argument("--profile", help="Named profile (default: reference)")

    parser = _Parser(prog="deskbms", description=f"{APP_NAME} {APP_VERSION}")
    parser.add_argument("--version", action="version", version=f"%(prog)s {APP_VERSION}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[common, scen], help="Run the zone model over input traces")
    p.add_argument("--weather", required=True, help="Outdoor temperature CSV (timestamp,value)")
    p.add_argument("--occupancy", help="Occupancy CSV (timestamp,value); empty zone when omitted")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--plan", help="HVAC plan CSV (timestamp,q_ac_w)")
    g.add_argument("--setpoint", type=float, help="Constant thermostat setpoint (degC)")
    p.add_argument("--initial-temp", type=float)
    p.add_argument("--method", choices=list(STEPPERS))
    p.add_argument("--out", required=True, help="Indoor temperature CSV to write")
    p.add_argument("--plan-out", help="Applied HVAC plan CSV to write")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("calibrate", parents=[common, scen], help="Calibrate zone parameters to a measured trace")
    p.add_argument("--measured", help="Measured indoor temperature CSV; self-generated when omitted")
    p.add_argument("--weather")
    p.add_argument("--occupancy")
    p.add_argument("--plan", help="HVAC plan CSV that produced the measured trace")
    p.add_argument("--threshold", type=float)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--resolution", choices=["hourly", "monthly"], default="hourly")
    p.add_argument("--landscape", help="Write a CVRMSE grid over the first two parameters")
    p.add_argument("--landscape-n", type=int, default=11)
    p.add_argument("--out", required=True, help="Calibration report JSON")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("count", parents=[common], help="Replay crossing events into an occupancy trace")
    p.add_argument("--events", required=True, help="Events CSV (timestamp,direction,count)")
    p.add_argument("--start", help="First sample time (ISO-8601 UTC); midnight of the first event by default")
    p.add_argument("--step", type=float, default=DEFAULT_DT_S)
    p.add_argument("--samples", type=int)
    p.add_argument("--idle-timeout", type=float, default=1800.0, help="Seconds; 0 disables the idle reset")
    p.add_argument("--truth", help="Ground-truth events CSV for precision/recall/F1 and AccuracyRate")
    p.add_argument("--tolerance", type=float, default=5.0)
    p.add_argument("--out", required=True, help="Occupancy CSV to write")
    p.add_argument("--report", help="Count report JSON")
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("forecast", parents=[common, scen], help="Fit and evaluate an occupancy forecast")
    p.add_argument("--history", help="Occupancy history CSV; generated from the profile when omitted")
    p.add_argument("--schedule", help="Schedule CSV (timestamp,special)")
    p.add_argument("--holidays", help="Holidays CSV (date)")
    p.add_argument("--capacity", type=float)
    p.add_argument("--recipe", choices=list(RECIPES))
    p.add_argument("--as-of", help="Fit on samples before this time (ISO-8601 UTC)")
    p.add_argument("--holdout", help="Held-out day start (ISO-8601 UTC) for the recipe comparison")
    p.add_argument("--day", help="Day to forecast (ISO-8601 UTC); the as-of day by default")
    p.add_argument("--out", help="24 h forecast CSV")
    p.add_argument("--model-out", required=True, help="Model and evaluation JSON")
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("control", parents=[common, scen], help="Run a scenario and report savings and comfort")
    p.add_argument("--controller", choices=list(CONTROLLERS))
    p.add_argument("--transport", choices=list(TRANSPORTS))
    p.add_argument("--method", choices=list(STEPPERS))
    p.add_argument("--forecast-source", choices=["model", "perfect"])
    p.add_argument("--strategy", choices=list(STRATEGIES), help="Also solve the scenario offline with true data")
    p.add_argument("--plan-csv", help="Where to write the strategy plan (timestamp,q_ac_w); <out>/<strategy>_plan.csv by default")
    p.add_argument("--out", default="out", help="Output directory for reports, traces, setpoints and decision log")
    p.set_defaults(func=cmd_control)

    p = sub.add_parser("serve", parents=[common], help="Serve the zone simulator over TCP or stdio")
    p.add_argument("--stdio", action="store_true", help="One session over stdin/stdout instead of TCP")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=0, help="0 picks a free port; the bound host:port is printed")
    p.add_argument("--sessions", type=int, default=1)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("generate", parents=[common, scen], help="Write a seeded synthetic scenario")
    p.add_argument("--days", type=int)
    p.add_argument("--history-days", type=int)
    p.add_argument("--capacity", type=int)
    p.add_argument("--name", default="generated")
    p.add_argument("--out", required=True, help="Output directory")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("profiles", parents=[common], help="List built-in profiles")
    p.add_argument("--write", action="store_true", help="Write missing defaults to deskbms/profiles")
    p.set_defaults(func=cmd_profiles)

    p = sub.add_parser("gui", parents=[common], help="Open the desktop scenario runner")
    p.set_defaults(func=cmd_gui)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    logging.basicConfig(level=args.log_level, format=LOG_FORMAT, stream=sys.stderr)
    try:
        return int(args.func(args) or 0)
    except DeskBmsError as e:
        logger.debug("input error", exc_info=True)
        print(f"error: {e.code}: {e.message}", file=sys.stderr)
        return EXIT_INPUT
    except (FileNotFoundError, IsADirectoryError, PermissionError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except Exception:
        logger.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
