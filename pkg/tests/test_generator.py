import unittest
from datetime import date

from deskbms.core.counter import replay
from deskbms.core.forecast import DAY_S
from deskbms.core.generator import (
    GeneratorKnobs,
    WeatherKnobs,
    empty_occupancy,
    generate_mosque_scenario,
    peak_integrals,
    reference_weather,
)
from deskbms.models import InputError


class TestMosqueGenerator(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.knobs = GeneratorKnobs(days=7, history_days=7)
        cls.mosque = generate_mosque_scenario(cls.knobs)

    def test_seed_determinism(self):
        again = generate_mosque_scenario(self.knobs)
        self.assertEqual(again.occupancy, self.mosque.occupancy)
        self.assertEqual(again.events, self.mosque.events)
        other = generate_mosque_scenario(GeneratorKnobs(seed=8, days=7, history_days=7))
        self.assertNotEqual(other.occupancy.values, self.mosque.occupancy.values)

    def test_layout_of_history_and_scenario(self):
        occ = self.mosque.occupancy
        self.assertEqual(occ.start_time, self.knobs.scenario_start - 7 * DAY_S)
        self.assertEqual(len(occ), 14 * 144)
        window = self.mosque.scenario_slice(self.knobs)
        self.assertEqual(window.start_time, self.knobs.scenario_start)
        self.assertEqual(len(window), 7 * 144)
        self.assertTrue(all(v >= 0 and v == int(v) for v in occ.values))

    def test_crossings_replay_to_the_trace(self):
        occ = self.mosque.occupancy
        trace, _, stats = replay(self.mosque.events, occ.start_time, occ.step, len(occ), idle_timeout=None)
        self.assertEqual(trace.values, occ.values)
        self.assertEqual(stats.underflow_freezes, 0)

    def test_schedule_brackets_every_sample(self):
        events = self.mosque.schedule.events
        self.assertLess(events[0], self.mosque.occupancy.start_time)
        self.assertGreater(events[-1], self.mosque.occupancy.end_time)
        self.assertEqual(len(events), 5 * (14 + 2))

    def test_friday_midday_gathering_is_special(self):
        special = [g for g in self.mosque.gatherings if g.special]
        self.assertEqual(len(special), 2)  # one Friday per week
        for g in special:
            self.assertEqual(int((g.time // DAY_S + 3) % 7), 4)
            self.assertGreaterEqual(g.peak, self.knobs.special_scale * self.knobs.peak_low * self.knobs.capacity)
        integrals = peak_integrals(self.mosque, self.knobs, self.knobs.scenario_start)
        self.assertEqual(len(integrals), 35)
        biggest = max(integrals, key=lambda pair: pair[1])[0]
        self.assertTrue(biggest.special)

    def test_holidays_reach_the_schedule(self):
        knobs = GeneratorKnobs(days=1, history_days=0, holidays=("2024-01-01",))
        self.assertEqual(generate_mosque_scenario(knobs).schedule.holidays, frozenset({date(2024, 1, 1)}))

    def test_knob_validation(self):
        for kwargs, code in (({"days": 0}, "DAYS_INVALID"), ({"capacity": 0}, "CAPACITY_INVALID"),
                             ({"peak_low": 0.3, "peak_high": 0.2}, "PEAK_RANGE"), ({"noise_prob": 1.0}, "NOISE_RANGE")):
            with self.assertRaises(InputError) as ctx:
                GeneratorKnobs(**kwargs)
            self.assertEqual(ctx.exception.code, code)


class TestReferenceWeather(unittest.TestCase):
    def test_daily_extremes(self):
        start = GeneratorKnobs().scenario_start
        t_out, rh = reference_weather(start, 144)
        at_3, at_15 = 3 * 6, 15 * 6
        self.assertAlmostEqual(t_out.values[at_3], 28.0, places=9)
        self.assertAlmostEqual(t_out.values[at_15], 42.0, places=9)
        self.assertAlmostEqual(rh.values[at_3], 65.0, places=9)
        self.assertAlmostEqual(rh.values[at_15], 35.0, places=9)
        self.assertEqual(min(t_out.values), t_out.values[at_3])

    def test_knobs_shift_the_curve(self):
        start = GeneratorKnobs().scenario_start
        t_out, _ = reference_weather(start, 144, knobs=WeatherKnobs(mean_c=30.0, amplitude_c=0.0))
        self.assertEqual(set(t_out.values), {30.0})
        self.assertEqual(empty_occupancy(t_out).values, (0.0,) * 144)


if __name__ == "__main__":
    unittest.main()
