from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Optional, Type, TypeVar

from deskbms.config import FORECAST_EVENT_WINDOW_MIN, FORECAST_WINDOW_DAYS, IDLE_TIMEOUT_S, ONSET_THRESHOLD
from deskbms.core.calibration import CalibrationSpace, ParameterRange
from deskbms.core.comfort import ComfortAssumptions
from deskbms.core.generator import GeneratorKnobs, WeatherKnobs
from deskbms.core.mpc import SetpointPolicy
from deskbms.core.strategy import PenaltyWeights
from deskbms.models import InputError, ZoneThermalParams

T = TypeVar("T")

CONTROLLERS = ("baseline", "hvac-mpc")
TRANSPORTS = ("in-process", "socket")

REFERENCE_ZONE = ZoneThermalParams(
    heat_capacity=2.88e8,
    thermal_resistance=1e-4,
    hvac_max_cooling=150_000.0,
    cop=3.0,
    occupant_heat=100.0,
    deadband=0.5,
)


@dataclass(frozen=True)
class WeatherConfig:
    source: str = "reference"  # reference | csv
    weather_csv: Optional[str] = None
    humidity_csv: Optional[str] = None
    knobs: WeatherKnobs = WeatherKnobs()


@dataclass(frozen=True)
class OccupancyConfig:
    source: str = "generator"  # generator | trace | events
    path: Optional[str] = None
    idle_timeout_s: Optional[float] = IDLE_TIMEOUT_S


@dataclass(frozen=True)
class ForecastConfig:
    source: str = "model"  # model | perfect
    recipe: str = "domsp-poly"
    threshold: float = ONSET_THRESHOLD
    weather_mode: str = "oracle"
    window_days: float = FORECAST_WINDOW_DAYS
    event_window_min: float = FORECAST_EVENT_WINDOW_MIN
    schedule_csv: Optional[str] = None
    holidays_csv: Optional[str] = None
    history_csv: Optional[str] = None


def reference_calibration_space() -> CalibrationSpace:
    c, r = REFERENCE_ZONE.heat_capacity, REFERENCE_ZONE.thermal_resistance
    return CalibrationSpace(
        parameters=(
            ParameterRange("heat_capacity", 0.5 * c, 1.5 * c, 1.3 * c),
            ParameterRange("thermal_resistance", 0.5 * r, 1.5 * r, 0.7 * r),
        ),
    )


@dataclass(frozen=True)
class ScenarioProfile:
    name: str
    zone: ZoneThermalParams = REFERENCE_ZONE
    initial_temp: float = 28.0
    method: str = "euler"
    controller: str = "hvac-mpc"
    transport: str = "in-process"
    policy: SetpointPolicy = SetpointPolicy()
    weights: PenaltyWeights = PenaltyWeights()
    comfort: ComfortAssumptions = ComfortAssumptions()
    generator: GeneratorKnobs = GeneratorKnobs()
    weather: WeatherConfig = WeatherConfig()
    occupancy: OccupancyConfig = OccupancyConfig()
    forecast: ForecastConfig = ForecastConfig()
    calibration: CalibrationSpace = field(default_factory=reference_calibration_space)


def default_profiles() -> Dict[str, ScenarioProfile]:
    return {
        "reference": ScenarioProfile(name="reference"),
        "reference-socket": ScenarioProfile(name="reference-socket", transport="socket"),
        "baseline": ScenarioProfile(name="baseline", controller="baseline"),
    }


def profiles_dir(repo_root: str) -> Path:
    return Path(repo_root).resolve() / "deskbms" / "profiles"


def profile_path(repo_root: str, profile_name: str) -> Path:
    safe = "".join(c for c in profile_name if c.isalnum() or c in ("_", "-", " "))
    return profiles_dir(repo_root) / f"{safe}.json"


def to_json_dict(profile: ScenarioProfile) -> Dict[str, Any]:
    d = asdict(profile)
    d["generator"]["event_minutes"] = list(profile.generator.event_minutes)
    d["generator"]["holidays"] = list(profile.generator.holidays)
    d["calibration"]["parameters"] = [asdict(p) for p in profile.calibration.parameters]
    return d


def _section(cls: Type[T], d: Optional[Dict[str, Any]], base: T) -> T:
    """Builds a dataclass from a JSON object; missing keys keep `base`'s values."""
    d = d or {}
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(d) - known)
    if unknown:
        raise InputError("PROFILE_KEY", f"unknown key(s) in {cls.__name__}: {', '.join(unknown)}")
    values = {f.name: getattr(base, f.name) for f in fields(cls)}
    values.update(d)
    return cls(**values)


def from_json_dict(d: Dict[str, Any]) -> ScenarioProfile:
    base = ScenarioProfile(name="Custom")

    weather_in = dict(d.get("weather") or {})
    knobs = _section(WeatherKnobs, weather_in.pop("knobs", None), base.weather.knobs)
    weather = _section(WeatherConfig, weather_in, base.weather)
    weather = WeatherConfig(weather.source, weather.weather_csv, weather.humidity_csv, knobs)

    gen_in = dict(d.get("generator") or {})
    for key in ("event_minutes", "holidays"):
        if key in gen_in:
            gen_in[key] = tuple(gen_in[key])

    cal_in = dict(d.get("calibration") or {})
    if "parameters" in cal_in:
        cal_in["parameters"] = tuple(ParameterRange(**p) for p in cal_in["parameters"])

    return ScenarioProfile(
        name=str(d.get("name") or "Custom"),
        zone=_section(ZoneThermalParams, d.get("zone"), base.zone),
        initial_temp=float(d.get("initial_temp", base.initial_temp)),
        method=str(d.get("method", base.method)),
        controller=str(d.get("controller", base.controller)),
        transport=str(d.get("transport", base.transport)),
        policy=_section(SetpointPolicy, d.get("policy"), base.policy),
        weights=_section(PenaltyWeights, d.get("weights"), base.weights),
        comfort=_section(ComfortAssumptions, d.get("comfort"), base.comfort),
        generator=_section(GeneratorKnobs, gen_in, base.generator),
        weather=weather,
        occupancy=_section(OccupancyConfig, d.get("occupancy"), base.occupancy),
        forecast=_section(ForecastConfig, d.get("forecast"), base.forecast),
        calibration=_section(CalibrationSpace, cal_in, base.calibration),
    )


def ensure_default_profiles_on_disk(repo_root: str) -> None:
    pdir = profiles_dir(repo_root)
    pdir.mkdir(parents=True, exist_ok=True)
    for name, prof in default_profiles().items():
        path = profile_path(repo_root, name)
        if not path.exists():
            path.write_text(json.dumps(to_json_dict(prof), indent=2), encoding="utf-8")


def load_profile_file(path: Path) -> ScenarioProfile:
    path = Path(path)
    if not path.is_file():
        raise InputError("FILE_MISSING", f"{path} does not exist")
    try:
        d = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise InputError("PROFILE_JSON", f"{path.name}: {e}") from None
    return from_json_dict(d)


def load_profile(repo_root: str, name: str) -> ScenarioProfile:
    return load_profile_file(profile_path(repo_root, name))


def save_profile(repo_root: str, profile: ScenarioProfile) -> Path:
    pdir = profiles_dir(repo_root)
    pdir.mkdir(parents=True, exist_ok=True)
    path = profile_path(repo_root, profile.name)
    path.write_text(json.dumps(to_json_dict(profile), indent=2), encoding="utf-8")
    return path
