import tempfile
import unittest
from pathlib import Path
from unittest import mock

from deskbms.core.generator import GeneratorKnobs, constant_trace
from deskbms.core.profiles import ForecastConfig, OccupancyConfig, ScenarioProfile, WeatherConfig
from deskbms.core.scenario import build_scenario, run_scenario
from deskbms.core.traces import write_trace_csv
from deskbms.models import InputError


class TestReferenceScenario(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.scenario = build_scenario(ScenarioProfile(name="reference"))
        cls.scenario_run = run_scenario(cls.scenario)

    def test_week_long_savings_against_always_on(self):
        report = self.scenario_run.report
        self.assertEqual(report.steps, 7 * 144)
        self.assertGreaterEqual(report.savings_pct, 20.0)
        self.assertLessEqual(report.savings_pct, 45.0)
        self.assertGreaterEqual(report.comfort_fraction, 0.90)

    def test_report_bookkeeping(self):
        report = self.scenario_run.report
        self.assertEqual(len(report.daily_energy_wh), 7)
        self.assertAlmostEqual(sum(report.daily_energy_wh), report.energy_wh, delta=1e-6 * report.energy_wh)
        self.assertEqual(len(report.daily_savings_pct), 7)
        self.assertLess(report.energy_wh, report.baseline_energy_wh)
        self.assertLess(report.alpha, report.baseline_alpha)
        self.assertGreater(report.decision_counts.get("precool_start", 0), 0)
        codes = {i.code for i in self.scenario_run.issues}
        self.assertIn("SAVINGS", codes)

    def test_baseline_cools_every_step(self):
        baseline = self.scenario_run.baseline
        self.assertEqual(set(baseline.plan.values), {-self.scenario.params.hvac_max_cooling})
        self.assertEqual(baseline.decisions, ())

    def test_commands_are_the_two_setpoints(self):
        policy = self.scenario.policy
        self.assertTrue(set(self.scenario_run.controlled.setpoints.values) <= {policy.setpoint_oc, policy.setpoint_uo})

    def test_reruns_are_identical(self):
        again = run_scenario(self.scenario)
        self.assertEqual(again.report, self.scenario_run.report)


class TestPerfectForecast(unittest.TestCase):
    def test_zone_is_cool_when_people_arrive(self):
        profile = ScenarioProfile(
            name="perfect",
            generator=GeneratorKnobs(days=2, noise_prob=0.0),
            forecast=ForecastConfig(source="perfect"),
        )
        scenario = build_scenario(profile)
        run = run_scenario(scenario)
        self.assertNotIn("PRECOOL_BEST_EFFORT", {i.code for i in run.issues})

        occ = scenario.occupancy.values
        temps = run.controlled.temperatures.values
        onsets = [k for k in range(1, len(occ)) if occ[k] > 0 and occ[k - 1] == 0]
        self.assertGreater(len(onsets), 0)
        for k in onsets:
            self.assertLessEqual(temps[k], scenario.policy.setpoint_oc + 0.5)
        self.assertEqual(run.report.decision_counts.get("reactive_fallback", 0), 0)


class TestEmptyBuilding(unittest.TestCase):
    def test_no_occupancy_means_no_energy(self):
        knobs = GeneratorKnobs(days=1, history_days=0)
        with tempfile.TemporaryDirectory() as tmp:
            root = Path(tmp)
            start, n = knobs.scenario_start, 144
            write_trace_csv(constant_trace(start, n, 27.0), root / "weather.csv")
            write_trace_csv(constant_trace(start, n, 50.0), root / "humidity.csv")
            write_trace_csv(constant_trace(start, n, 0.0), root / "occupancy.csv")
            profile = ScenarioProfile(
                name="empty",
                initial_temp=27.0,
                generator=knobs,
                weather=WeatherConfig(source="csv", weather_csv="weather.csv", humidity_csv="humidity.csv"),
                occupancy=OccupancyConfig(source="trace", path="occupancy.csv"),
                forecast=ForecastConfig(source="perfect"),
            )
            run = run_scenario(build_scenario(profile, root))

        report = run.report
        self.assertEqual(report.energy_wh, 0.0)
        self.assertEqual(report.savings_pct, 100.0)
        self.assertIsNone(report.comfort_fraction)
        self.assertEqual(report.occupied_steps, 0)
        self.assertEqual(report.decision_counts, {"forecast_none": 1, "vacate": 1})

    def test_model_forecast_needs_history(self):
        profile = ScenarioProfile(name="no-history", generator=GeneratorKnobs(days=1, history_days=0))
        with self.assertRaises(InputError) as ctx:
            build_scenario(profile)
        self.assertEqual(ctx.exception.code, "HISTORY_MISSING")


class TestCancellation(unittest.TestCase):
    def test_cancel_stops_the_run(self):
        profile = ScenarioProfile(name="cancel", controller="baseline", generator=GeneratorKnobs(days=1, history_days=0))
        scenario = build_scenario(profile)
        progress = mock.Mock()
        run = run_scenario(scenario, progress_cb=progress, is_cancelled=lambda: progress.call_count > 0)
        self.assertIsNone(run.report)
        self.assertEqual([i.code for i in run.issues], ["RUN_CANCELLED"])
        progress.assert_called_once_with(1, 144, "baseline")

    def test_baseline_profile_has_no_comparison(self):
        profile = ScenarioProfile(name="only-baseline", controller="baseline",
                                  generator=GeneratorKnobs(days=1, history_days=0))
        run = run_scenario(build_scenario(profile))
        self.assertIsNone(run.baseline)
        self.assertIsNone(run.report.savings_pct)
        self.assertEqual(run.report.controller, "baseline")


if __name__ == "__main__":
    unittest.main()
