"""Fanger PMV/PPD and the humidity-dependent comfort band.

The heat-balance evaluation follows the ISO 7730 / ASHRAE 55 procedure with a
damped fixed-point solve for the clothing surface temperature.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence, Tuple

from scipy.optimize import bisect

from deskbms.models import ConvergenceError, InputError, TimeSeries, check_aligned

logger = logging.getLogger(__name__)

PMV_LIMIT = 0.5
AIR_TEMP_RANGE = (10.0, 40.0)
BAND_XTOL = 0.005
_MAX_ITER = 150
_EPS = 0.00015


@dataclass(frozen=True)
class ComfortAssumptions:
    air_velocity: float = 0.1     # m/s
    metabolic_rate: float = 1.2   # met
    clothing: float = 0.5         # clo
    external_work: float = 0.0    # met


@dataclass(frozen=True)
class ComfortConditions:
    air_temp: float
    mean_radiant_temp: float
    relative_humidity: float
    air_velocity: float = 0.1
    metabolic_rate: float = 1.2
    clothing: float = 0.5
    external_work: float = 0.0

    def __post_init__(self):
        for name in ("air_temp", "mean_radiant_temp", "relative_humidity", "air_velocity",
                     "metabolic_rate", "clothing", "external_work"):
            if not math.isfinite(getattr(self, name)):
                raise InputError("COMFORT_NONFINITE", f"{name} is not finite")
        if self.air_velocity < 0:
            raise InputError("COMFORT_INPUT", "air_velocity must be >= 0")
        if not 0 <= self.relative_humidity <= 100:
            raise InputError("COMFORT_INPUT", "relative_humidity must lie in [0, 100]")
        if self.metabolic_rate <= 0:
            raise InputError("COMFORT_INPUT", "metabolic_rate must be > 0")
        if self.clothing < 0:
            raise InputError("COMFORT_INPUT", "clothing must be >= 0")

    @staticmethod
    def at(air_temp: float, relative_humidity: float,
           assumptions: ComfortAssumptions = ComfortAssumptions()) -> "ComfortConditions":
        return ComfortConditions(
            air_temp=air_temp,
            mean_radiant_temp=air_temp,
            relative_humidity=relative_humidity,
            air_velocity=assumptions.air_velocity,
            metabolic_rate=assumptions.metabolic_rate,
            clothing=assumptions.clothing,
            external_work=assumptions.external_work,
        )


@dataclass(frozen=True)
class ComfortAssessment:
    pmv: float
    ppd: float
    within_band: bool


def pmv(c: ComfortConditions) -> float:
    lo, hi = AIR_TEMP_RANGE
    for name, v in (("air_temp", c.air_temp), ("mean_radiant_temp", c.mean_radiant_temp)):
        if not lo <= v <= hi:
            raise InputError("PMV_RANGE", f"{name}={v} outside the applicable {lo}-{hi} degC")

    ta, tr = c.air_temp, c.mean_radiant_temp
    pa = c.relative_humidity * 10 * math.exp(16.6536 - 4030.183 / (ta + 235))  # Pa
    icl = 0.155 * c.clothing  # m2K/W
    m = c.metabolic_rate * 58.15
    mw = m - c.external_work * 58.15
    fcl = 1 + 1.29 * icl if icl < 0.078 else 1.05 + 0.645 * icl
    hcf = 12.1 * math.sqrt(c.air_velocity)
    taa = ta + 273
    tra = tr + 273

    tcla = taa + (35.5 - ta) / (3.5 * (6.45 * icl + 0.1))
    p1 = icl * fcl
    p2 = p1 * 3.96
    p3 = p1 * 100
    p4 = p1 * taa
    p5 = 308.7 - 0.028 * mw + p2 * (tra / 100) ** 4
    xn = tcla / 100
    xf = xn / 2
    hc = hcf
    n = 0
    while abs(xn - xf) > _EPS:
        n += 1
        if n > _MAX_ITER:
            raise ConvergenceError("PMV_NO_CONVERGENCE", "clothing surface temperature did not converge")
        xf = (xf + xn) / 2
        hc = max(hcf, 2.38 * abs(100 * xf - taa) ** 0.25)
        xn = (p5 + p4 * hc - p2 * xf ** 4) / (100 + p3 * hc)
    tcl = 100 * xn - 273

    skin = 3.05 * 0.001 * (5733 - 6.99 * mw - pa)
    sweat = 0.42 * (mw - 58.15) if mw > 58.15 else 0.0
    latent_resp = 1.7 * 0.00001 * m * (5867 - pa)
    dry_resp = 0.0014 * m * (34 - ta)
    radiation = 3.96 * fcl * (xn ** 4 - (tra / 100) ** 4)
    convection = fcl * hc * (tcl - ta)

    ts = 0.303 * math.exp(-0.036 * m) + 0.028
    return ts * (mw - skin - sweat - latent_resp - dry_resp - radiation - convection)


def ppd(pmv_value: float) -> float:
    if not math.isfinite(pmv_value):
        raise InputError("COMFORT_NONFINITE", "pmv is not finite")
    return 100.0 - 95.0 * math.exp(-(0.03353 * pmv_value ** 4 + 0.2179 * pmv_value ** 2))


def assess(c: ComfortConditions) -> ComfortAssessment:
    v = pmv(c)
    return ComfortAssessment(pmv=v, ppd=ppd(v), within_band=abs(v) <= PMV_LIMIT)


@lru_cache(maxsize=4096)
def _band(humidity: float, assumptions: ComfortAssumptions) -> Tuple[float, float]:
    lo, hi = AIR_TEMP_RANGE

    def f(t: float, target: float) -> float:
        return pmv(ComfortConditions.at(t, humidity, assumptions)) - target

    if f(lo, -PMV_LIMIT) > 0 or f(hi, PMV_LIMIT) < 0 or f(lo, PMV_LIMIT) > 0 or f(hi, -PMV_LIMIT) < 0:
        raise InputError("BAND_EMPTY", f"no comfortable temperature in {lo}-{hi} degC at RH={humidity}")
    lower = bisect(f, lo, hi, args=(-PMV_LIMIT,), xtol=BAND_XTOL)
    upper = bisect(f, lo, hi, args=(PMV_LIMIT,), xtol=BAND_XTOL)
    return lower, upper


def comfort_band(humidity: float, assumptions: ComfortAssumptions = ComfortAssumptions()) -> Tuple[float, float]:
    """(T_lower, T_upper) where |PMV| <= 0.5 with mean radiant temp tied to air temp."""
    if not math.isfinite(humidity) or not 0 <= humidity <= 100:
        raise InputError("COMFORT_INPUT", f"humidity must lie in [0, 100], got {humidity}")
    return _band(round(float(humidity), 2), assumptions)


@dataclass(frozen=True)
class ComfortStats:
    occupied_steps: int
    within_band_steps: int
    out_of_range_steps: int
    mean_ppd: Optional[float]

    @property
    def fraction_within(self) -> Optional[float]:
        if self.occupied_steps == 0:
            return None
        return self.within_band_steps / self.occupied_steps


def assess_trace(
    temps: TimeSeries,
    humidity: TimeSeries,
    occupied: Sequence[bool],
    assumptions: ComfortAssumptions = ComfortAssumptions(),
) -> ComfortStats:
    """Pointwise PMV over occupied steps; temperatures outside the PMV range count as PPD 100."""
    check_aligned([temps, humidity], ["temps", "humidity"])
    if len(occupied) != len(temps):
        raise InputError("TRACE_MISALIGNED", "occupied mask differs in length from temps")

    n = within = out_of_range = 0
    ppd_sum = 0.0
    lo, hi = AIR_TEMP_RANGE
    for t, rh, occ in zip(temps.values, humidity.values, occupied):
        if not occ:
            continue
        n += 1
        if not lo <= t <= hi:
            out_of_range += 1
            ppd_sum += 100.0
            continue
        a = assess(ComfortConditions.at(t, rh, assumptions))
        ppd_sum += a.ppd
        within += int(a.within_band)

    if out_of_range:
        logger.warning("%d occupied step(s) outside the PMV air-temperature range", out_of_range)
    return ComfortStats(
        occupied_steps=n,
        within_band_steps=within,
        out_of_range_steps=out_of_range,
        mean_ppd=(ppd_sum / n) if n else None,
    )
