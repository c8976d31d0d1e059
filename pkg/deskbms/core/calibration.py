from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from deskbms.config import CALIBRATION_CANDIDATES, CALIBRATION_MAX_ROUNDS, CALIBRATION_THRESHOLD
from deskbms.core.thermal import simulate
from deskbms.models import CALIBRATABLE_PARAMS, InputError, TimeSeries, ZoneThermalParams

logger = logging.getLogger(__name__)

GUIDELINE14 = {
    # resolution: (|MBE| limit, CVRMSE limit)
    "hourly": (0.10, 0.30),
    "monthly": (0.05, 0.15),
}


@dataclass(frozen=True)
class ParameterRange:
    name: str
    lower: float
    upper: float
    value: float

    def __post_init__(self):
        if self.name not in CALIBRATABLE_PARAMS:
            raise InputError("PARAM_UNKNOWN", f"'{self.name}' is not calibratable ({', '.join(CALIBRATABLE_PARAMS)})")
        if not self.lower < self.upper:
            raise InputError("BOUNDS_INVALID", f"{self.name}: lower must be < upper")
        if not self.lower <= self.value <= self.upper:
            raise InputError("VALUE_OUT_OF_BOUNDS", f"{self.name}={self.value} outside [{self.lower}, {self.upper}]")


@dataclass(frozen=True)
class CalibrationSpace:
    parameters: Tuple[ParameterRange, ...]
    candidates_per_sweep: int = CALIBRATION_CANDIDATES
    threshold: float = CALIBRATION_THRESHOLD
    max_rounds: int = CALIBRATION_MAX_ROUNDS

    def __post_init__(self):
        object.__setattr__(self, "parameters", tuple(self.parameters))
        if not self.parameters:
            raise InputError("SPACE_EMPTY", "calibration needs at least one parameter")
        names = [p.name for p in self.parameters]
        if len(set(names)) != len(names):
            raise InputError("PARAM_DUPLICATE", "a parameter appears twice in the calibration space")
        if self.candidates_per_sweep < 2:
            raise InputError("CANDIDATES_INVALID", "candidates_per_sweep must be >= 2")
        if not 0 < self.threshold <= 1:
            raise InputError("THRESHOLD_RANGE", f"threshold must lie in (0, 1], got {self.threshold}")
        if self.max_rounds < 1:
            raise InputError("ROUNDS_INVALID", "max_rounds must be >= 1")

    def values(self) -> Dict[str, float]:
        return {p.name: p.value for p in self.parameters}

    def with_values(self, values: Dict[str, float]) -> "CalibrationSpace":
        params = tuple(
            ParameterRange(p.name, p.lower, p.upper, values.get(p.name, p.value)) for p in self.parameters
        )
        return CalibrationSpace(params, self.candidates_per_sweep, self.threshold, self.max_rounds)

    def grid(self, k: int) -> List[float]:
        p = self.parameters[k]
        points = np.linspace(p.lower, p.upper, self.candidates_per_sweep).tolist()
        if p.value not in points:
            points.append(p.value)
        return sorted(points)


@dataclass(frozen=True)
class ScenarioInputs:
    """Everything a calibration co-simulation needs besides the parameters being tuned."""

    base_params: ZoneThermalParams
    initial_temp: float
    weather: TimeSeries
    occupancy: TimeSeries
    hvac_plan: TimeSeries
    method: str = "euler"

    def run(self, values: Dict[str, float]) -> TimeSeries:
        params = self.base_params.with_values(**values)
        return simulate(params, self.initial_temp, self.weather, self.occupancy, self.hvac_plan, self.method).temperatures


@dataclass(frozen=True)
class SweepResult:
    name: str
    value: float
    error: float
    evaluations: int


@dataclass(frozen=True)
class RoundRecord:
    round: int
    cvrmse: float
    mbe: float
    values: Dict[str, float]
    cosimulations: int
    joint_commit: bool


@dataclass(frozen=True)
class CalibrationResult:
    values: Dict[str, float]
    cvrmse: float
    mbe: float
    rounds: int
    cosimulations: int
    converged: bool
    history: Tuple[RoundRecord, ...] = field(default=())


# -------------------------
# Metrics
# -------------------------

def _residuals(measured: TimeSeries, simulated: TimeSeries) -> Tuple[np.ndarray, np.ndarray]:
    if len(measured) != len(simulated):
        raise InputError("TRACE_MISALIGNED", "measured and simulated traces differ in length")
    m = measured.to_numpy()
    if m.sum() == 0:
        raise InputError("MEASURED_ZERO_MEAN", "measured trace has zero mean")
    return m, m - simulated.to_numpy()


def cvrmse(measured: TimeSeries, simulated: TimeSeries) -> float:
    m, r = _residuals(measured, simulated)
    return float(np.sqrt(np.mean(r ** 2)) / np.mean(m))


def mbe(measured: TimeSeries, simulated: TimeSeries) -> float:
    m, r = _residuals(measured, simulated)
    return float(r.sum() / m.sum())


@dataclass(frozen=True)
class Guideline14Result:
    resolution: str
    mbe: float
    cvrmse: float
    mbe_limit: float
    cvrmse_limit: float

    @property
    def passed(self) -> bool:
        return abs(self.mbe) < self.mbe_limit and self.cvrmse < self.cvrmse_limit


def guideline14_check(measured: TimeSeries, simulated: TimeSeries, resolution: str = "hourly") -> Guideline14Result:
    if resolution not in GUIDELINE14:
        raise InputError("RESOLUTION_UNKNOWN", f"resolution must be one of {', '.join(GUIDELINE14)}")
    mbe_limit, cv_limit = GUIDELINE14[resolution]
    return Guideline14Result(resolution, mbe(measured, simulated), cvrmse(measured, simulated), mbe_limit, cv_limit)


# -------------------------
# Coordinate descent
# -------------------------

def _score_all(
    candidates: Sequence[Dict[str, float]],
    inputs: ScenarioInputs,
    measured: TimeSeries,
    workers: Optional[int],
) -> List[float]:
    def score(values: Dict[str, float]) -> float:
        return cvrmse(measured, inputs.run(values))

    if workers == 1 or len(candidates) <= 1:
        return [score(c) for c in candidates]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(score, candidates))


def sweep_parameter(
    k: int,
    space: CalibrationSpace,
    inputs: ScenarioInputs,
    measured: TimeSeries,
    incumbent_error: Optional[float] = None,
    workers: Optional[int] = None,
) -> SweepResult:
    """Best grid value for parameter k with the others held at their current values.

    Ties go to the candidate closest to the current value, then to the smaller one.
    """
    if not 0 <= k < len(space.parameters):
        raise InputError("PARAM_INDEX", f"parameter index {k} out of range")
    p = space.parameters[k]
    base = space.values()

    grid = space.grid(k)
    to_run = [v for v in grid if not (incumbent_error is not None and v == p.value)]
    errors = dict(zip(to_run, _score_all([{**base, p.name: v} for v in to_run], inputs, measured, workers)))
    if incumbent_error is not None:
        errors[p.value] = incumbent_error

    best = min(grid, key=lambda v: (errors[v], abs(v - p.value), v))
    logger.debug("sweep %s: best %.6g (cvrmse %.5f) over %d candidates", p.name, best, errors[best], len(grid))
    return SweepResult(p.name, best, errors[best], len(to_run))


def calibrate(
    space: CalibrationSpace,
    inputs: ScenarioInputs,
    measured: TimeSeries,
    workers: Optional[int] = None,
) -> CalibrationResult:
    current = space
    values = current.values()
    sim = inputs.run(values)
    error = cvrmse(measured, sim)
    cosims = 1
    history: List[RoundRecord] = []
    converged = False

    for rnd in range(1, space.max_rounds + 1):
        round_cosims = 0
        sweeps = []
        for k in range(len(current.parameters)):
            s = sweep_parameter(k, current, inputs, measured, incumbent_error=error, workers=workers)
            sweeps.append(s)
            round_cosims += s.evaluations

        joint = {**values, **{s.name: s.value for s in sweeps}}
        joint_commit = True
        if joint == values:
            new_values, new_error = values, error
        else:
            joint_error = cvrmse(measured, inputs.run(joint))
            round_cosims += 1
            if joint_error <= error:
                new_values, new_error = joint, joint_error
            else:
                best = min(sweeps, key=lambda s: s.error)
                new_values, new_error = {**values, best.name: best.value}, best.error
                joint_commit = False

        stalled = new_values == values
        values, error = new_values, new_error
        current = current.with_values(values)
        cosims += round_cosims

        sim = inputs.run(values)
        history.append(RoundRecord(rnd, error, mbe(measured, sim), dict(values), round_cosims, joint_commit))
        logger.info("calibration round %d: cvrmse=%.5f cosims=%d %s", rnd, error, round_cosims,
                    "joint" if joint_commit else "single-coordinate")

        if error < space.threshold:
            converged = True
            break
        if stalled:
            logger.warning("calibration stalled at cvrmse=%.5f after %d round(s)", error, rnd)
            break

    return CalibrationResult(
        values=dict(values),
        cvrmse=error,
        mbe=mbe(measured, sim),
        rounds=len(history),
        cosimulations=cosims,
        converged=converged,
        history=tuple(history),
    )


def needs_recalibration(
    values: Dict[str, float],
    inputs: ScenarioInputs,
    validation_trace: TimeSeries,
    threshold: float = CALIBRATION_THRESHOLD,
) -> bool:
    """True when a calibrated model no longer tracks a later measured trace."""
    return cvrmse(validation_trace, inputs.run(values)) > threshold


def error_landscape(
    space: CalibrationSpace,
    i: int,
    j: int,
    inputs: ScenarioInputs,
    measured: TimeSeries,
    n: int = CALIBRATION_CANDIDATES,
    workers: Optional[int] = None,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """CVRMSE over an n x n grid of parameters i and j; others held at current values."""
    if i == j:
        raise InputError("PARAM_INDEX", "landscape needs two distinct parameters")
    pi, pj = space.parameters[i], space.parameters[j]
    xs = np.linspace(pi.lower, pi.upper, n)
    ys = np.linspace(pj.lower, pj.upper, n)
    base = space.values()
    candidates = [{**base, pi.name: float(x), pj.name: float(y)} for x in xs for y in ys]
    grid = np.asarray(_score_all(candidates, inputs, measured, workers)).reshape(n, n)
    return xs, ys, grid
