import math
import unittest

import numpy as np

from deskbms.core.mpc import (
    ONSET_GRACE_S,
    ControllerState,
    Forecaster,
    SetpointPolicy,
    TraceForecaster,
    controller_tick,
    precool_start,
    precool_terminal_temp,
)
from deskbms.models import InputError, TimeSeries, ZoneThermalParams

DT = 300.0
T0 = 1704067200.0  # 2024-01-01 00:00 UTC
HOUR = 3600.0
POLICY = SetpointPolicy()

# tau = 2e4 s and R*Qmax = 50 degC: from 28 degC at ambient 28 the zone needs six
# full-cooling slots to drop below 24 degC
ZONE = ZoneThermalParams(heat_capacity=1e7, thermal_resistance=0.002, hvac_max_cooling=25_000.0)


def _constant(value, n, start=T0 + 10 * HOUR, dt=DT):
    return TimeSeries(start, dt, [value] * n)


def _random_instance(rng):
    n_pd = int(rng.integers(1, 65))
    params = ZoneThermalParams(
        heat_capacity=float(rng.uniform(1e7, 5e8)),
        thermal_resistance=float(rng.uniform(1e-4, 5e-3)),
        hvac_max_cooling=float(rng.uniform(1e3, 2e5)),
    )
    weather = TimeSeries(0.0, 600.0, rng.uniform(25.0, 45.0, size=n_pd + 1).tolist())
    temp_now = float(rng.uniform(22.0, 34.0))
    hvac_on = bool(rng.random() < 0.5)
    return n_pd, params, weather, temp_now, hvac_on


class TestPolicy(unittest.TestCase):
    def test_order_enforced(self):
        with self.assertRaises(InputError) as ctx:
            SetpointPolicy(setpoint_oc=28.0, setpoint_uo=24.0)
        self.assertEqual(ctx.exception.code, "SETPOINT_ORDER")


class TestPrecoolStart(unittest.TestCase):
    def test_cool_zone_starts_at_the_latest_slot(self):
        weather = _constant(20.0, 13)
        res = precool_start(weather.start_time, weather.start_time + 12 * DT, 20.0, ZONE, weather, POLICY)
        self.assertEqual(res.start, weather.start_time + 12 * DT)
        self.assertTrue(res.feasible)

    def test_needs_six_cooling_slots(self):
        weather = _constant(28.0, 25)
        t_now = weather.start_time
        res = precool_start(t_now, t_now + 24 * DT, 28.0, ZONE, weather, POLICY)
        self.assertEqual(res.start, t_now + 19 * DT)
        self.assertLessEqual(precool_terminal_temp(19, 24, 28.0, ZONE, weather, POLICY), 24.0)
        self.assertGreater(precool_terminal_temp(20, 24, 28.0, ZONE, weather, POLICY), 24.0)

    def test_infeasible_falls_back_to_now(self):
        weak = ZONE.with_values(hvac_max_cooling=100.0)
        weather = _constant(40.0, 7)
        res = precool_start(weather.start_time, weather.start_time + 6 * DT, 40.0, weak, weather, POLICY)
        self.assertEqual(res.start, weather.start_time)
        self.assertFalse(res.feasible)

    def test_input_errors(self):
        weather = _constant(28.0, 5)
        t = weather.start_time
        for args, code in (((t, t), "HORIZON_EMPTY"), ((t, t + 100.0), "OFF_CLOCK"), ((t, t + 10 * DT), "TRACE_SHORT")):
            with self.assertRaises(InputError) as ctx:
                precool_start(*args, 28.0, ZONE, weather, POLICY)
            self.assertEqual(ctx.exception.code, code)

    def test_matches_exhaustive_scan_on_random_instances(self):
        rng = np.random.default_rng(42)
        for _ in range(500):
            n_pd, params, weather, temp_now, hvac_on = _random_instance(rng)
            feasible = [
                precool_terminal_temp(s, n_pd, temp_now, params, weather, POLICY, hvac_on=hvac_on) <= POLICY.setpoint_oc
                for s in range(n_pd + 1)
            ]
            latest = max((s for s, ok in enumerate(feasible) if ok), default=0)

            res = precool_start(0.0, n_pd * 600.0, temp_now, params, weather, POLICY, hvac_on=hvac_on)
            self.assertEqual(res.start, latest * 600.0)
            self.assertEqual(res.feasible, any(feasible))
            # n candidate start slots, 0..n_pd
            self.assertLessEqual(res.simulations, math.ceil(math.log2(n_pd + 1)) + 1)

    def test_earlier_start_is_never_warmer(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            n_pd, params, weather, temp_now, hvac_on = _random_instance(rng)
            terminal = [precool_terminal_temp(s, n_pd, temp_now, params, weather, POLICY, hvac_on=hvac_on)
                        for s in range(n_pd + 1)]
            self.assertTrue(all(a <= b + 1e-9 for a, b in zip(terminal, terminal[1:])))


class _NoOnset(Forecaster):
    def next_onset(self, t_now):
        return None


class TestControllerTick(unittest.TestCase):
    def _occupancy(self):
        # occupied until 10:00, empty until 12:00, then a gathering
        n = int(6 * HOUR / DT)
        start = T0 + 8 * HOUR
        values = []
        for i in range(n):
            t = start + i * DT
            values.append(40.0 if t < T0 + 10 * HOUR or t >= T0 + 12 * HOUR else 0.0)
        return TimeSeries(start, DT, values)

    def test_occupied_building_holds_occupied_setpoint(self):
        forecaster = _NoOnset(_constant(30.0, 10))
        state, cmd, log = controller_tick(ControllerState.initial(POLICY), T0 + 10 * HOUR, 12, 24.5,
                                          forecaster, POLICY, ZONE)
        self.assertEqual(cmd, POLICY.setpoint_oc)
        self.assertEqual(log, [])
        self.assertTrue(state.occupied)

    def test_empties_then_precools_ahead_of_the_gathering(self):
        occupancy = self._occupancy()
        weather = occupancy.with_values([28.0] * len(occupancy))
        forecaster = TraceForecaster(occupancy, weather)

        state = ControllerState.initial(POLICY)
        commands, events = {}, []
        for i, t in enumerate(occupancy.times()):
            if t < T0 + 10 * HOUR - DT:
                continue
            state, cmd, log = controller_tick(state, t, occupancy.values[i], 28.0, forecaster, POLICY, ZONE)
            commands[t] = cmd
            events += [(d.timestamp, d.event) for d in log]
            if t >= T0 + 12 * HOUR:
                break

        self.assertEqual(commands[T0 + 10 * HOUR], POLICY.setpoint_uo)
        self.assertEqual(commands[T0 + 11 * HOUR + 30 * 60], POLICY.setpoint_uo)
        self.assertEqual(commands[T0 + 11 * HOUR + 35 * 60], POLICY.setpoint_oc)
        self.assertEqual(commands[T0 + 12 * HOUR], POLICY.setpoint_oc)
        self.assertEqual([e for _, e in events], ["vacate", "timer_set", "precool_start", "occupied"])
        self.assertEqual(events[2][0], T0 + 11 * HOUR + 35 * 60)
        self.assertTrue(all(c in (POLICY.setpoint_oc, POLICY.setpoint_uo) for c in commands.values()))

    def test_no_forecast_holds_unoccupied_until_reactive_fallback(self):
        forecaster = _NoOnset(_constant(30.0, 10))
        state = ControllerState.initial(POLICY)
        t = T0 + 10 * HOUR
        state, cmd, log = controller_tick(state, t, 0, 25.0, forecaster, POLICY, ZONE)
        self.assertEqual(cmd, POLICY.setpoint_uo)
        self.assertEqual([d.event for d in log], ["vacate", "forecast_none"])
        self.assertIsNone(state.timer)

        state, cmd, log = controller_tick(state, t + DT, 0, 25.5, forecaster, POLICY, ZONE)
        self.assertEqual((cmd, log), (POLICY.setpoint_uo, []))

        state, cmd, log = controller_tick(state, t + 2 * DT, 7, 26.0, forecaster, POLICY, ZONE)
        self.assertEqual(cmd, POLICY.setpoint_oc)
        self.assertEqual([d.event for d in log], ["reactive_fallback"])
        self.assertTrue(state.occupied)

    def test_missed_onset_replans(self):
        forecaster = _NoOnset(_constant(30.0, 10))
        onset = T0 + 12 * HOUR
        state = ControllerState(POLICY.setpoint_oc, onset=onset, precooling=True, occupied=False)
        _, cmd, log = controller_tick(state, onset + ONSET_GRACE_S - DT, 0, 24.0, forecaster, POLICY, ZONE)
        self.assertEqual((cmd, log), (POLICY.setpoint_oc, []))
        state, cmd, log = controller_tick(state, onset + ONSET_GRACE_S, 0, 24.0, forecaster, POLICY, ZONE)
        self.assertEqual(cmd, POLICY.setpoint_uo)
        self.assertEqual([d.event for d in log], ["onset_missed", "forecast_none"])

    def test_persistence_weather_holds_latest_observation(self):
        weather = TimeSeries(T0, DT, [30.0, 31.0, 32.0, 33.0])
        slice_ = _NoOnset(weather).weather_slice(T0 + DT, 3)
        self.assertEqual(slice_.values, (31.0, 31.0, 31.0))
        oracle = _NoOnset(weather, "oracle").weather_slice(T0 + 2 * DT, 4)
        self.assertEqual(oracle.values, (32.0, 33.0, 33.0, 33.0))
        with self.assertRaises(InputError):
            _NoOnset(weather, "clairvoyant")


if __name__ == "__main__":
    unittest.main()
