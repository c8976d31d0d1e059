import unittest
from datetime import date, datetime, timezone

import numpy as np

from deskbms.core.forecast import (
    DAY_S,
    FEATURE_NAMES,
    EventSchedule,
    RegressionModel,
    compare_recipes,
    evaluate,
    featurize,
    fit,
    forecast_day,
    last_week_baseline,
    next_occupied_time,
    predict,
)
from deskbms.core.generator import GeneratorKnobs, generate_mosque_scenario
from deskbms.models import InputError, TimeSeries

T0 = datetime(2024, 1, 1, tzinfo=timezone.utc).timestamp()  # a Monday


def _uneven_schedule(days=4, capacity=100.0):
    """Gaps alternate 90/150 min so past + next is not constant; every 4th event is special."""
    events, t, k = [], T0 - 3600.0, 0
    while t < T0 + days * DAY_S + 3 * 3600:
        events.append(t)
        t += 60.0 * (90 if k % 2 == 0 else 150)
        k += 1
    special = [i % 4 == 0 for i in range(len(events))]
    return EventSchedule(events=tuple(events), capacity=capacity, special=tuple(special))


def _history_from(fn, schedule, days=4, step=600.0):
    n = int(days * DAY_S / step)
    times = [T0 + i * step for i in range(n)]
    return TimeSeries(T0, step, [schedule.capacity * fn(featurize(t, schedule, "spev")) for t in times])


class TestFeaturize(unittest.TestCase):
    def setUp(self):
        self.schedule = EventSchedule(events=(T0, T0 + 3600.0, T0 + 7200.0), capacity=100.0)

    def test_at_event_and_midpoint(self):
        at = featurize(T0 + 3600.0, self.schedule, "spev")
        self.assertEqual(at.minutes_since_past, 0.0)
        mid = featurize(T0 + 1800.0, self.schedule, "spev")
        self.assertEqual((mid.minutes_since_past, mid.minutes_until_next), (30.0, 30.0))

    def test_friday_dummy(self):
        friday_noon = T0 + 4 * DAY_S + 12 * 3600
        sched = EventSchedule(events=(friday_noon - 3600, friday_noon + 3600), capacity=100.0)
        row = featurize(friday_noon, sched, "domsp-linear")
        self.assertEqual(row.day_of_week, 4)
        names = FEATURE_NAMES["domsp-linear"]
        dummies = {n: v for n, v in zip(names, row.terms) if n.startswith("dow_")}
        self.assertEqual(dummies, {"dow_1": 0.0, "dow_2": 0.0, "dow_3": 0.0, "dow_4": 1.0, "dow_5": 0.0, "dow_6": 0.0})

    def test_poly_appends_delta_products(self):
        row = featurize(T0 + 1200.0, self.schedule, "domsp-poly")
        self.assertEqual(len(row.terms), len(FEATURE_NAMES["domsp-poly"]))
        self.assertEqual(row.terms[-3:], (400.0, 1600.0, 800.0))

    def test_holiday_flag(self):
        sched = EventSchedule(events=(T0 - 3600, T0 + 3600), capacity=10.0, holidays={date(2024, 1, 1)})
        self.assertEqual(featurize(T0 + 60, sched, "all-data").holiday, 1)

    def test_outside_schedule(self):
        with self.assertRaises(InputError) as ctx:
            featurize(T0 + 9000.0, self.schedule, "spev")
        self.assertEqual(ctx.exception.code, "SCHEDULE_COVERAGE")
        with self.assertRaises(InputError) as ctx:
            featurize(T0 + 60.0, self.schedule, "neural")
        self.assertEqual(ctx.exception.code, "RECIPE_UNKNOWN")

    def test_schedule_validation(self):
        with self.assertRaises(InputError):
            EventSchedule(events=(T0, T0), capacity=10.0)
        with self.assertRaises(InputError):
            EventSchedule(events=(T0, T0 + 60), capacity=0.0)


class TestFit(unittest.TestCase):
    def test_recovers_noise_free_linear_model(self):
        schedule = _uneven_schedule()
        truth = (0.2, 0.001, -0.0005, 0.1)
        history = _history_from(lambda r: float(np.dot(truth, r.terms)), schedule)
        model = fit(history, schedule, "spev")
        for got, want in zip(model.coefficients, truth):
            self.assertAlmostEqual(got, want, delta=1e-6)

    def test_constant_history(self):
        schedule = _uneven_schedule()
        history = _history_from(lambda r: 0.3, schedule)
        model = fit(history, schedule, "spev")
        self.assertAlmostEqual(model.coefficients[0], 0.3, delta=1e-6)
        for slope in model.coefficients[1:]:
            self.assertAlmostEqual(slope, 0.0, delta=1e-6)

    def test_residuals_orthogonal_to_design(self):
        schedule = _uneven_schedule()
        rng = np.random.default_rng(3)
        noisy = _history_from(lambda r: 0.2 + 0.001 * r.terms[1], schedule)
        history = noisy.with_values(v + rng.normal(0, 2.0) for v in noisy.values)
        model = fit(history, schedule, "spev")
        X = np.array([featurize(t, schedule, "spev").terms for t in history.times()])
        y = history.to_numpy() / schedule.capacity
        resid = y - X @ np.asarray(model.coefficients)
        self.assertLess(np.abs(X.T @ resid).max(), 1e-6)

    def test_insufficient_data(self):
        schedule = _uneven_schedule()
        short = TimeSeries(T0, 600.0, [5.0, 6.0, 7.0])
        with self.assertRaises(InputError) as ctx:
            fit(short, schedule, "spev")
        self.assertEqual(ctx.exception.code, "INSUFFICIENT_DATA")


class TestPredict(unittest.TestCase):
    def setUp(self):
        self.schedule = EventSchedule(events=(T0, T0 + 3600.0, T0 + 7200.0), capacity=100.0)

    def test_constant_models(self):
        zero = RegressionModel("spev", (0.0, 0.0, 0.0, 0.0), None)
        self.assertEqual(predict(zero, T0 + 600, self.schedule), 0.0)
        half = RegressionModel("spev", (0.5, 0.0, 0.0, 0.0), None)
        for t in (T0 + 60, T0 + 1800, T0 + 7000):
            self.assertEqual(predict(half, t, self.schedule), 0.5)

    def test_negative_raw_is_clamped(self):
        neg = RegressionModel("spev", (-0.2, 0.0, 0.0, 0.0), None)
        self.assertEqual(predict(neg, T0 + 600, self.schedule), 0.0)

    def test_clamping_preserves_order(self):
        model = RegressionModel("spev", (-0.5, 0.03, 0.0, 0.0), None)
        preds = [predict(model, T0 + m * 60.0, self.schedule) for m in range(0, 60, 5)]
        self.assertEqual(preds, sorted(preds))
        self.assertTrue(all(0.0 <= p <= 1.0 for p in preds))

    def test_windowed_recipe_uses_background_outside_window(self):
        coeffs = (0.9,) + (0.0,) * (len(FEATURE_NAMES["domsp-linear"]) - 1)
        model = RegressionModel("domsp-linear", coeffs, 30, event_window_min=10.0, background=0.02)
        self.assertAlmostEqual(predict(model, T0 + 300, self.schedule), 0.9)
        self.assertAlmostEqual(predict(model, T0 + 1800, self.schedule), 0.02)

    def test_coefficient_count_checked(self):
        with self.assertRaises(InputError) as ctx:
            RegressionModel("spev", (1.0, 2.0), None)
        self.assertEqual(ctx.exception.code, "COEFFICIENT_COUNT")

    def test_forecast_day_shape(self):
        sched = _uneven_schedule()
        half = RegressionModel("spev", (0.5, 0.0, 0.0, 0.0), None)
        day = forecast_day(half, sched, T0)
        self.assertEqual(len(day), 144)
        self.assertEqual(set(day.values), {0.5})


class TestBaselineAndEvaluate(unittest.TestCase):
    def _weekly(self, days=14):
        week = np.random.default_rng(11).uniform(0.0, 1.0, size=7 * 24)
        return TimeSeries(T0, 3600.0, np.resize(week, days * 24).tolist())

    def test_weekly_periodic_history_is_perfect(self):
        history = self._weekly()
        day = history.slice(10 * 24, 11 * 24)
        lw = day.with_values(last_week_baseline(history, t) for t in day.times())
        self.assertEqual(evaluate(lw, day), (1.0, 0.0))

    def test_shifted_history_degrades(self):
        history = self._weekly()
        day = history.slice(10 * 24, 11 * 24)
        shifted = day.with_values(last_week_baseline(history, t - DAY_S) for t in day.times())
        r2, rmse = evaluate(shifted, day)
        self.assertLess(r2, 1.0)
        self.assertGreater(rmse, 0.0)

    def test_uncovered_week_raises(self):
        history = self._weekly(days=3)
        with self.assertRaises(InputError) as ctx:
            last_week_baseline(history, history.end_time)
        self.assertEqual(ctx.exception.code, "INSUFFICIENT_HISTORY")

    def test_evaluate_identities(self):
        truth = TimeSeries(0.0, 600.0, [0.1, 0.5, 0.3, 0.9])
        self.assertEqual(evaluate(truth, truth), (1.0, 0.0))
        y = truth.to_numpy()
        r2, rmse = evaluate(truth.with_values([y.mean()] * 4), truth)
        self.assertAlmostEqual(r2, 0.0, places=12)
        self.assertAlmostEqual(rmse, float(y.std()), places=12)

    def test_evaluate_zero_variance(self):
        flat = TimeSeries(0.0, 600.0, [0.2] * 4)
        with self.assertRaises(InputError) as ctx:
            evaluate(flat, flat)
        self.assertEqual(ctx.exception.code, "R2_UNDEFINED")


class TestNextOccupiedTime(unittest.TestCase):
    def setUp(self):
        self.schedule = EventSchedule(events=(T0, T0 + 3 * 3600.0, T0 + 6 * 3600.0), capacity=100.0)

    def test_zero_prediction_has_no_onset(self):
        zero = RegressionModel("spev", (0.0, 0.0, 0.0, 0.0), None)
        self.assertIsNone(next_occupied_time(zero, self.schedule, T0 + 600))

    def test_step_at_event_time(self):
        coeffs = (1.0,) + (0.0,) * (len(FEATURE_NAMES["domsp-linear"]) - 1)
        model = RegressionModel("domsp-linear", coeffs, 30, event_window_min=0.0, background=0.0)
        self.assertEqual(next_occupied_time(model, self.schedule, T0 + 600), T0 + 3 * 3600.0)

    def test_threshold_range(self):
        zero = RegressionModel("spev", (0.0, 0.0, 0.0, 0.0), None)
        with self.assertRaises(InputError):
            next_occupied_time(zero, self.schedule, T0, threshold=1.0)


class TestMosqueDataset(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        knobs = GeneratorKnobs(seed=7, days=56, history_days=0)
        cls.knobs = knobs
        cls.mosque = generate_mosque_scenario(knobs)
        cls.holdout = knobs.scenario_start + 55 * DAY_S

    def test_recipe_ordering_on_held_out_day(self):
        scores = {s.label: s for s in compare_recipes(self.mosque.occupancy, self.mosque.schedule, self.holdout)}
        r2 = {k: v.r_squared for k, v in scores.items()}
        self.assertGreater(r2["PR_DomSp"], r2["LR_DomSp"])
        self.assertGreater(r2["LR_DomSp"], max(r2["LastWeek"], r2["LR_SpEv"]))
        self.assertGreater(min(r2["LastWeek"], r2["LR_SpEv"]), r2["LR_AllData"])
        self.assertGreaterEqual(r2["PR_DomSp"], 0.80)
        self.assertLessEqual(scores["PR_DomSp"].rmse, 0.06)

    def test_older_history_does_not_change_trailing_fit(self):
        history = self.mosque.occupancy
        as_of = self.knobs.scenario_start + 50 * DAY_S
        trimmed = history.slice(history.index_of(self.knobs.scenario_start + 10 * DAY_S), len(history))
        full_fit = fit(history, self.mosque.schedule, "domsp-linear", as_of=as_of)
        trimmed_fit = fit(trimmed, self.mosque.schedule, "domsp-linear", as_of=as_of)
        self.assertEqual(full_fit.coefficients, trimmed_fit.coefficients)
        self.assertEqual(full_fit.background, trimmed_fit.background)

    def test_onset_leads_each_gathering(self):
        model = fit(self.mosque.occupancy, self.mosque.schedule, "domsp-poly", as_of=self.holdout)
        day_events = [t for t in self.mosque.schedule.events if self.holdout <= t < self.holdout + DAY_S]
        t_now = self.holdout
        for event in day_events[:3]:
            onset = next_occupied_time(model, self.mosque.schedule, t_now)
            self.assertIsNotNone(onset)
            self.assertLessEqual(onset, event)
            self.assertGreater(onset, event - 60 * 60)
            t_now = event + 50 * 60


if __name__ == "__main__":
    unittest.main()
