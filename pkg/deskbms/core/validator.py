from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, List, Optional

from deskbms.core.comfort import AIR_TEMP_RANGE
from deskbms.core.forecast import RECIPES
from deskbms.core.mpc import WEATHER_MODES
from deskbms.core.profiles import CONTROLLERS, TRANSPORTS, ScenarioProfile, from_json_dict
from deskbms.core.thermal import STEPPERS
from deskbms.models import DeskBmsError, ValidationResult


def validate_profile_dict(d: Dict[str, Any], base_dir: Optional[Path] = None) -> List[ValidationResult]:
    """Like validate_profile, but also reports values the profile types reject outright."""
    try:
        profile = from_json_dict(d)
    except DeskBmsError as e:
        return [ValidationResult(level="ERROR", code=e.code, message=e.message)]
    except (TypeError, ValueError) as e:
        return [ValidationResult(level="ERROR", code="PROFILE_INVALID", message=str(e))]
    return validate_profile(profile, base_dir)


def validate_profile(profile: ScenarioProfile, base_dir: Optional[Path] = None) -> List[ValidationResult]:
    results: List[ValidationResult] = []
    zone = profile.zone
    knobs = profile.generator

    # -------------------------
    # Rule: integration method and step
    # -------------------------
    if profile.method not in STEPPERS:
        results.append(ValidationResult("ERROR", "METHOD_UNKNOWN",
                                        f"Unknown integration method '{profile.method}'.", "method"))
    elif profile.method == "euler" and knobs.dt >= 2 * zone.time_constant:
        results.append(ValidationResult("ERROR", "DT_UNSTABLE",
                                        f"dt={knobs.dt:g} s is at or beyond the Euler stability bound "
                                        f"2*R*C={2 * zone.time_constant:g} s.", "generator.dt"))
    elif knobs.dt > 0.1 * zone.time_constant:
        results.append(ValidationResult("WARNING", "DT_COARSE",
                                        f"dt={knobs.dt:g} s exceeds 10% of the zone time constant; "
                                        "expect visible discretization error.", "generator.dt"))

    # -------------------------
    # Rule: plant can hold the occupied setpoint
    # -------------------------
    if zone.hvac_max_cooling == 0:
        results.append(ValidationResult("WARNING", "NO_COOLING",
                                        "hvac_max_cooling is 0; every controller is free-floating.",
                                        "zone.hvac_max_cooling"))
    lo, hi = AIR_TEMP_RANGE
    for name in ("setpoint_oc", "setpoint_uo"):
        v = getattr(profile.policy, name)
        if not lo <= v <= hi:
            results.append(ValidationResult("WARNING", "SETPOINT_PMV_RANGE",
                                            f"{name}={v:g} degC lies outside the PMV range {lo:g}-{hi:g} degC.",
                                            f"policy.{name}"))
    if not lo <= profile.initial_temp <= hi:
        results.append(ValidationResult("WARNING", "INITIAL_TEMP_RANGE",
                                        f"initial_temp={profile.initial_temp:g} degC lies outside the PMV range.",
                                        "initial_temp"))

    # -------------------------
    # Rule: controller / transport / forecast choices
    # -------------------------
    if profile.controller not in CONTROLLERS:
        results.append(ValidationResult("ERROR", "CONTROLLER_UNKNOWN",
                                        f"Controller must be one of {', '.join(CONTROLLERS)}.", "controller"))
    if profile.transport not in TRANSPORTS:
        results.append(ValidationResult("ERROR", "TRANSPORT_UNKNOWN",
                                        f"Transport must be one of {', '.join(TRANSPORTS)}.", "transport"))
    fc = profile.forecast
    if fc.source not in ("model", "perfect"):
        results.append(ValidationResult("ERROR", "FORECAST_SOURCE",
                                        f"Unknown forecast source '{fc.source}'.", "forecast.source"))
    if fc.recipe not in RECIPES:
        results.append(ValidationResult("ERROR", "RECIPE_UNKNOWN",
                                        f"Unknown recipe '{fc.recipe}'.", "forecast.recipe"))
    if fc.weather_mode not in WEATHER_MODES:
        results.append(ValidationResult("ERROR", "WEATHER_MODE",
                                        f"Unknown weather mode '{fc.weather_mode}'.", "forecast.weather_mode"))
    if not 0 < fc.threshold < 1:
        results.append(ValidationResult("ERROR", "THRESHOLD_RANGE",
                                        "Onset threshold must lie in (0, 1).", "forecast.threshold"))
    if fc.source == "perfect" and profile.controller == "hvac-mpc":
        results.append(ValidationResult("INFO", "FORECAST_PERFECT",
                                        "Pre-cooling uses the true occupancy trace (oracle run).", "forecast.source"))
    if fc.source == "model" and profile.controller == "hvac-mpc" \
            and profile.occupancy.source == "generator" and knobs.history_days < 7:
        results.append(ValidationResult("WARNING", "HISTORY_SHORT",
                                        "Less than one week of generated history to fit the forecast model.",
                                        "generator.history_days"))

    # -------------------------
    # Rule: occupancy and weather sources
    # -------------------------
    occ = profile.occupancy
    if occ.source not in ("generator", "trace", "events"):
        results.append(ValidationResult("ERROR", "OCCUPANCY_SOURCE",
                                        f"Unknown occupancy source '{occ.source}'.", "occupancy.source"))
    elif occ.source != "generator" and not occ.path:
        results.append(ValidationResult("ERROR", "PATH_MISSING",
                                        f"Occupancy source '{occ.source}' needs a path.", "occupancy.path"))
    if occ.idle_timeout_s is not None and occ.idle_timeout_s <= 0:
        results.append(ValidationResult("ERROR", "IDLE_TIMEOUT",
                                        "idle_timeout_s must be positive or null.", "occupancy.idle_timeout_s"))

    w = profile.weather
    if w.source not in ("reference", "csv"):
        results.append(ValidationResult("ERROR", "WEATHER_SOURCE",
                                        f"Unknown weather source '{w.source}'.", "weather.source"))
    elif w.source == "csv" and not (w.weather_csv and w.humidity_csv):
        results.append(ValidationResult("ERROR", "PATH_MISSING",
                                        "CSV weather needs weather_csv and humidity_csv.", "weather"))

    if base_dir is not None:
        for field_name, p in (("occupancy.path", occ.path), ("weather.weather_csv", w.weather_csv),
                              ("weather.humidity_csv", w.humidity_csv), ("forecast.schedule_csv", fc.schedule_csv),
                              ("forecast.holidays_csv", fc.holidays_csv), ("forecast.history_csv", fc.history_csv)):
            if p and not (Path(p) if Path(p).is_absolute() else Path(base_dir) / p).is_file():
                results.append(ValidationResult("ERROR", "FILE_MISSING", f"File not found: {p}", field_name))

    # -------------------------
    # Rule: calibration parameters
    # -------------------------
    cal = profile.calibration
    per_round = sum(cal.candidates_per_sweep + 1 for _ in cal.parameters) + 1
    if per_round > 121:
        results.append(ValidationResult("WARNING", "CALIBRATION_COST",
                                        f"Up to {per_round} co-simulations per calibration round.",
                                        "calibration.candidates_per_sweep"))
    for i, p in enumerate(cal.parameters):
        if p.lower <= 0:
            results.append(ValidationResult("ERROR", "BOUNDS_NONPOSITIVE",
                                            f"{p.name} lower bound must be positive.",
                                            f"calibration.parameters[{i}].lower"))

    if not results:
        results.append(ValidationResult("INFO", "PROFILE_OK", f"Profile '{profile.name}' passed validation."))
    return results


def has_errors(results: List[ValidationResult]) -> bool:
    return any(r.level == "ERROR" for r in results)
