import json
import tempfile
import unittest
from dataclasses import replace
from pathlib import Path

from deskbms.core.calibration import ParameterRange
from deskbms.core.generator import GeneratorKnobs
from deskbms.core.profiles import (
    ForecastConfig,
    OccupancyConfig,
    ScenarioProfile,
    WeatherConfig,
    default_profiles,
    ensure_default_profiles_on_disk,
    from_json_dict,
    load_profile,
    load_profile_file,
    profile_path,
    save_profile,
    to_json_dict,
)
from deskbms.core.validator import has_errors, validate_profile, validate_profile_dict
from deskbms.models import InputError, ZoneThermalParams


def _codes(results):
    return {r.code for r in results}


class TestProfileFiles(unittest.TestCase):
    def test_json_dict_round_trip(self):
        profile = ScenarioProfile(
            name="custom",
            generator=GeneratorKnobs(days=3, holidays=("2024-01-02",)),
            forecast=ForecastConfig(recipe="all-data", threshold=0.3),
        )
        d = json.loads(json.dumps(to_json_dict(profile)))
        self.assertEqual(from_json_dict(d), profile)

    def test_partial_dict_keeps_defaults(self):
        p = from_json_dict({"name": "short", "zone": {"hvac_max_cooling": 90000}, "weather": {"knobs": {"mean_c": 30}}})
        self.assertEqual(p.zone.hvac_max_cooling, 90000)
        self.assertEqual(p.zone.heat_capacity, 2.88e8)
        self.assertEqual(p.weather.knobs.mean_c, 30)
        self.assertEqual(p.weather.source, "reference")
        self.assertEqual(from_json_dict({}).name, "Custom")

    def test_unknown_key_is_rejected(self):
        with self.assertRaises(InputError) as ctx:
            from_json_dict({"policy": {"setpoint_oc": 24, "setpoint_xx": 1}})
        self.assertEqual(ctx.exception.code, "PROFILE_KEY")

    def test_save_load_and_defaults_on_disk(self):
        with tempfile.TemporaryDirectory() as tmp:
            ensure_default_profiles_on_disk(tmp)
            for name, prof in default_profiles().items():
                self.assertTrue(profile_path(tmp, name).is_file())
                self.assertEqual(load_profile(tmp, name), prof)

            edited = replace(default_profiles()["reference"], initial_temp=30.0)
            save_profile(tmp, edited)
            ensure_default_profiles_on_disk(tmp)  # existing files are left alone
            self.assertEqual(load_profile(tmp, "reference").initial_temp, 30.0)

    def test_load_errors(self):
        with tempfile.TemporaryDirectory() as tmp:
            bad = Path(tmp) / "bad.json"
            bad.write_text("{not json", encoding="utf-8")
            for path, code in ((Path(tmp) / "none.json", "FILE_MISSING"), (bad, "PROFILE_JSON")):
                with self.assertRaises(InputError) as ctx:
                    load_profile_file(path)
                self.assertEqual(ctx.exception.code, code)

    def test_profile_names_are_sanitised(self):
        self.assertEqual(profile_path("/tmp", "../evil/name").name, "evilname.json")


class TestValidator(unittest.TestCase):
    def test_shipped_profiles_pass(self):
        for name in ("reference", "reference-socket"):
            with self.subTest(name=name):
                self.assertEqual(_codes(validate_profile(default_profiles()[name])), {"PROFILE_OK"})

    def test_rejected_values_become_results(self):
        results = validate_profile_dict({"zone": {"heat_capacity": -1}})
        self.assertEqual([(r.level, r.code) for r in results], [("ERROR", "PARAM_INVALID")])
        results = validate_profile_dict({"calibration": {"parameters": [{"name": "cop"}]}})
        self.assertTrue(has_errors(results))

    def test_stability_rules(self):
        unstable = ScenarioProfile(name="u", zone=ZoneThermalParams(1000.0, 0.1, 0.0))
        self.assertIn("DT_UNSTABLE", _codes(validate_profile(unstable)))
        coarse = ScenarioProfile(name="c", zone=ZoneThermalParams(1e6, 0.005, 1000.0))
        codes = _codes(validate_profile(coarse))
        self.assertIn("DT_COARSE", codes)
        self.assertFalse(has_errors(validate_profile(coarse)))
        self.assertIn("METHOD_UNKNOWN", _codes(validate_profile(ScenarioProfile(name="m", method="rk4"))))

    def test_choice_rules(self):
        p = ScenarioProfile(
            name="bad",
            controller="pid",
            transport="carrier-pigeon",
            forecast=ForecastConfig(source="crystal-ball", recipe="x", weather_mode="psychic", threshold=1.0),
            occupancy=OccupancyConfig(source="trace", idle_timeout_s=0.0),
            weather=WeatherConfig(source="csv", weather_csv="w.csv"),
        )
        codes = _codes(validate_profile(p))
        for code in ("CONTROLLER_UNKNOWN", "TRANSPORT_UNKNOWN", "FORECAST_SOURCE", "RECIPE_UNKNOWN",
                     "WEATHER_MODE", "THRESHOLD_RANGE", "PATH_MISSING", "IDLE_TIMEOUT"):
            self.assertIn(code, codes)
        self.assertNotIn("PROFILE_OK", codes)

    def test_advisory_rules(self):
        p = ScenarioProfile(
            name="adv",
            initial_temp=45.0,
            zone=ZoneThermalParams(2.88e8, 1e-4, 0.0),
            generator=GeneratorKnobs(history_days=3),
        )
        codes = _codes(validate_profile(p))
        self.assertTrue({"INITIAL_TEMP_RANGE", "NO_COOLING", "HISTORY_SHORT"} <= codes)
        self.assertFalse(has_errors(validate_profile(p)))
        oracle = ScenarioProfile(name="o", forecast=ForecastConfig(source="perfect"))
        self.assertIn("FORECAST_PERFECT", _codes(validate_profile(oracle)))

    def test_calibration_rules(self):
        p = from_json_dict({"calibration": {"candidates_per_sweep": 80, "parameters": [
            {"name": "heat_capacity", "lower": -1.0, "upper": 1.0, "value": 0.0}]}})
        codes = _codes(validate_profile(p))
        self.assertIn("BOUNDS_NONPOSITIVE", codes)
        self.assertNotIn("CALIBRATION_COST", codes)
        wide = replace(p, calibration=replace(p.calibration, parameters=(
            ParameterRange("heat_capacity", 1e8, 3e8, 2e8), ParameterRange("thermal_resistance", 1e-5, 1e-3, 1e-4))))
        self.assertIn("CALIBRATION_COST", _codes(validate_profile(wide)))

    def test_missing_files_relative_to_base_dir(self):
        with tempfile.TemporaryDirectory() as tmp:
            (Path(tmp) / "occ.csv").write_text("timestamp,value\n", encoding="utf-8")
            p = ScenarioProfile(name="f", occupancy=OccupancyConfig(source="trace", path="occ.csv"),
                                forecast=ForecastConfig(schedule_csv="schedule.csv"))
            results = validate_profile(p, base_dir=Path(tmp))
        missing = [r for r in results if r.code == "FILE_MISSING"]
        self.assertEqual([r.field for r in missing], ["forecast.schedule_csv"])


if __name__ == "__main__":
    unittest.main()
