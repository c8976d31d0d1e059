import unittest

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from deskbms.core.comfort import (
    ComfortAssumptions,
    ComfortConditions,
    assess,
    assess_trace,
    comfort_band,
    pmv,
    ppd,
)
from deskbms.models import InputError, TimeSeries


def _cond(ta, tr, v, rh, met, clo):
    return ComfortConditions(air_temp=ta, mean_radiant_temp=tr, relative_humidity=rh,
                             air_velocity=v, metabolic_rate=met, clothing=clo)


class TestPmv(unittest.TestCase):
    def test_standard_reference_cases(self):
        # (ta, tr, v, rh, met, clo) -> PMV, from the standard's worked table
        cases = [
            ((22.0, 22.0, 0.1, 60.0, 1.2, 0.5), -0.75),
            ((27.0, 27.0, 0.1, 60.0, 1.2, 0.5), 0.77),
            ((27.0, 27.0, 0.3, 60.0, 1.2, 0.5), 0.44),
            ((23.5, 25.5, 0.1, 60.0, 1.2, 0.5), -0.01),
            ((19.0, 19.0, 0.1, 40.0, 1.2, 1.0), -0.60),
        ]
        for args, expected in cases:
            with self.subTest(args=args):
                self.assertAlmostEqual(pmv(_cond(*args)), expected, delta=0.03)

    def test_strictly_increasing_in_air_temperature(self):
        values = [pmv(ComfortConditions.at(t, 50.0)) for t in np.arange(20.0, 30.0001, 0.05)]
        self.assertTrue(all(b > a for a, b in zip(values, values[1:])))

    def test_applicability_range(self):
        with self.assertRaises(InputError) as ctx:
            pmv(ComfortConditions.at(45.0, 50.0))
        self.assertEqual(ctx.exception.code, "PMV_RANGE")

    def test_condition_validation(self):
        with self.assertRaises(InputError):
            ComfortConditions.at(24.0, 120.0)
        with self.assertRaises(InputError):
            _cond(24.0, 24.0, -0.1, 50.0, 1.2, 0.5)
        with self.assertRaises(InputError):
            _cond(24.0, 24.0, 0.1, 50.0, 0.0, 0.5)


class TestPpd(unittest.TestCase):
    def test_anchor_points(self):
        self.assertEqual(ppd(0.0), 5.0)
        self.assertAlmostEqual(ppd(0.5), 10.2, delta=0.05)
        self.assertAlmostEqual(ppd(-0.5), 10.2, delta=0.05)

    @settings(max_examples=200)
    @given(st.floats(-3.0, 3.0))
    def test_even_and_bounded_below(self, x):
        self.assertEqual(ppd(x), ppd(-x))
        self.assertGreaterEqual(ppd(x), 5.0)
        if x != 0.0:
            self.assertGreater(ppd(x), 5.0)

    def test_assessment_band_flag(self):
        a = assess(ComfortConditions.at(24.0, 50.0))
        self.assertEqual(a.within_band, abs(a.pmv) <= 0.5)
        self.assertEqual(a.ppd, ppd(a.pmv))
        self.assertFalse(assess(ComfortConditions.at(32.0, 50.0)).within_band)


class TestComfortBand(unittest.TestCase):
    def test_endpoints_hit_the_limits(self):
        lo, hi = comfort_band(50.0)
        self.assertLess(lo, hi)
        self.assertAlmostEqual(pmv(ComfortConditions.at(lo, 50.0)), -0.5, delta=0.005)
        self.assertAlmostEqual(pmv(ComfortConditions.at(hi, 50.0)), 0.5, delta=0.005)

    def test_band_contains_neutral_temperature(self):
        lo, hi = comfort_band(50.0)
        self.assertLess(pmv(ComfortConditions.at(lo, 50.0)), 0.0)
        self.assertGreater(pmv(ComfortConditions.at(hi, 50.0)), 0.0)

    def test_more_humid_air_shifts_band_down(self):
        dry = comfort_band(30.0)
        humid = comfort_band(70.0)
        self.assertLess(humid[0], dry[0])
        self.assertLess(humid[1], dry[1])

    def test_heavier_clothing_shifts_band_down(self):
        light = comfort_band(50.0)
        heavy = comfort_band(50.0, ComfortAssumptions(clothing=1.0))
        self.assertLess(heavy[1], light[1])

    def test_humidity_validated(self):
        with self.assertRaises(InputError):
            comfort_band(-5.0)


class TestAssessTrace(unittest.TestCase):
    def test_matches_pointwise_assessment(self):
        temps = TimeSeries(0.0, 600.0, [22.0, 24.0, 26.5, 29.0, 24.5])
        rh = temps.with_values([50.0] * 5)
        occupied = [True, True, False, True, True]
        stats = assess_trace(temps, rh, occupied)
        expected = sum(1 for t, o in zip(temps.values, occupied) if o and assess(ComfortConditions.at(t, 50.0)).within_band)
        self.assertEqual(stats.occupied_steps, 4)
        self.assertEqual(stats.within_band_steps, expected)
        self.assertEqual(stats.fraction_within, expected / 4)

    def test_out_of_range_counts_as_fully_dissatisfied(self):
        temps = TimeSeries(0.0, 600.0, [45.0, 45.0])
        stats = assess_trace(temps, temps.with_values([50.0, 50.0]), [True, True])
        self.assertEqual(stats.out_of_range_steps, 2)
        self.assertEqual(stats.mean_ppd, 100.0)

    def test_unoccupied_trace_has_no_fraction(self):
        temps = TimeSeries(0.0, 600.0, [24.0])
        stats = assess_trace(temps, temps.with_values([50.0]), [False])
        self.assertIsNone(stats.fraction_within)
        self.assertIsNone(stats.mean_ppd)


if __name__ == "__main__":
    unittest.main()
