from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from deskbms.config import DP_ACTION_LEVELS, DP_HORIZON_LIMIT, DP_TEMP_RESOLUTION, PENALTY_RHO
from deskbms.core.comfort import ComfortAssumptions, comfort_band
from deskbms.core.thermal import SimulationState, get_stepper, step_energy_wh
from deskbms.models import (
    InfeasibleError,
    InputError,
    TimeSeries,
    UnimplementedStrategyError,
    ZoneThermalParams,
    check_aligned,
)

logger = logging.getLogger(__name__)

Band = Tuple[float, float]


@dataclass(frozen=True)
class PenaltyWeights:
    rho_1: float = PENALTY_RHO  # per degC-step above the band
    rho_2: float = PENALTY_RHO  # per degC-step below the band
    occupied_only: bool = True

    def __post_init__(self):
        if not (self.rho_1 >= 0 and self.rho_2 >= 0):
            raise InputError("WEIGHT_NEGATIVE", "penalty weights must be >= 0")


@dataclass(frozen=True)
class ControlProblem:
    params: ZoneThermalParams
    initial_temp: float
    t_out: Tuple[float, ...]
    occupancy: Tuple[float, ...]
    bands: Tuple[Band, ...]
    dt: float
    start_time: float = 0.0
    action_levels: int = DP_ACTION_LEVELS
    method: str = "euler"

    def __post_init__(self):
        object.__setattr__(self, "t_out", tuple(float(v) for v in self.t_out))
        object.__setattr__(self, "occupancy", tuple(float(v) for v in self.occupancy))
        object.__setattr__(self, "bands", tuple((float(lo), float(hi)) for lo, hi in self.bands))
        if not (len(self.t_out) == len(self.occupancy) == len(self.bands)):
            raise InputError("TRACE_MISALIGNED", "problem traces differ in length")
        if self.action_levels < 2:
            raise InputError("ACTION_LEVELS", "need at least two action levels")
        if any(not lo <= hi for lo, hi in self.bands):
            raise InputError("BAND_INVALID", "every comfort band needs lower <= upper")
        get_stepper(self.method)

    @property
    def horizon(self) -> int:
        return len(self.t_out)

    def actions(self) -> List[float]:
        q = self.params.hvac_max_cooling
        top = self.action_levels - 1
        return [0.0 if k == 0 else (-q if k == top else -q * k / top) for k in range(self.action_levels)]

    def occupied(self, t: int) -> bool:
        return self.occupancy[t] > 0

    @staticmethod
    def from_series(
        params: ZoneThermalParams,
        initial_temp: float,
        weather: TimeSeries,
        occupancy: TimeSeries,
        humidity: TimeSeries,
        assumptions: ComfortAssumptions = ComfortAssumptions(),
        action_levels: int = DP_ACTION_LEVELS,
        method: str = "euler",
    ) -> "ControlProblem":
        check_aligned([weather, occupancy, humidity], ["weather", "occupancy", "humidity"])
        return ControlProblem(
            params=params,
            initial_temp=initial_temp,
            t_out=weather.values,
            occupancy=occupancy.values,
            bands=tuple(comfort_band(h, assumptions) for h in humidity.values),
            dt=weather.step,
            start_time=weather.start_time,
            action_levels=action_levels,
            method=method,
        )


@dataclass(frozen=True)
class AlphaBreakdown:
    energy_kwh: float
    overheat: float   # degC-steps above the band
    overcool: float   # degC-steps below the band
    alpha: float


@dataclass(frozen=True)
class PlanResult:
    strategy: str
    plan: Tuple[float, ...]
    temperatures: Tuple[float, ...]
    objective: float
    breakdown: AlphaBreakdown

    def plan_series(self, problem: ControlProblem) -> TimeSeries:
        return TimeSeries(problem.start_time, problem.dt, self.plan)


def _next_temp(problem: ControlProblem, stepper, t: int, temp: float, q_ac: float) -> float:
    state = SimulationState(indoor_temp=temp, cumulative_energy=0.0)
    return stepper(state, problem.params, problem.t_out[t], problem.occupancy[t], q_ac, problem.dt).indoor_temp


def _violation(problem: ControlProblem, t: int, temp: float) -> Tuple[float, float]:
    lo, hi = problem.bands[t]
    return max(0.0, temp - hi), max(0.0, lo - temp)


def _step_alpha(problem: ControlProblem, weights: PenaltyWeights, t: int, q_ac: float, temp: float) -> float:
    cost = step_energy_wh(q_ac, problem.dt, problem.params) / 1000.0
    if problem.occupied(t) or not weights.occupied_only:
        over, under = _violation(problem, t, temp)
        cost += weights.rho_1 * over + weights.rho_2 * under
    return cost


def penalty_alpha(plan: Sequence[float], problem: ControlProblem, weights: PenaltyWeights = PenaltyWeights()) -> AlphaBreakdown:
    """Energy (kWh) plus weighted band violations of the simulated plan."""
    if len(plan) != problem.horizon:
        raise InputError("TRACE_MISALIGNED", f"plan has {len(plan)} steps, problem has {problem.horizon}")
    stepper = get_stepper(problem.method)
    temp = problem.initial_temp
    alpha = energy = over_sum = under_sum = 0.0
    for t, q_ac in enumerate(plan):
        temp = _next_temp(problem, stepper, t, temp, q_ac)
        alpha += _step_alpha(problem, weights, t, q_ac, temp)
        energy += step_energy_wh(q_ac, problem.dt, problem.params) / 1000.0
        if problem.occupied(t) or not weights.occupied_only:
            over, under = _violation(problem, t, temp)
            over_sum += over
            under_sum += under
    return AlphaBreakdown(energy_kwh=energy, overheat=over_sum, overcool=under_sum, alpha=alpha)


def simulate_plan(plan: Sequence[float], problem: ControlProblem) -> Tuple[float, ...]:
    stepper = get_stepper(problem.method)
    temps, temp = [], problem.initial_temp
    for t, q_ac in enumerate(plan):
        temp = _next_temp(problem, stepper, t, temp, q_ac)
        temps.append(temp)
    return tuple(temps)


# -------------------------
# Solvers
# -------------------------

@dataclass
class _Node:
    temp: float
    cost: float
    parent: int
    action: float


def solve_mpc(
    problem: ControlProblem,
    weights: Optional[PenaltyWeights] = None,
    temp_resolution: float = DP_TEMP_RESOLUTION,
    horizon_limit: int = DP_HORIZON_LIMIT,
) -> PlanResult:
    """Forward dynamic programming over quantized temperature and discrete cooling levels.

    Without weights the comfort band is a hard constraint on occupied steps and
    the objective is energy in Wh. With weights the objective is alpha itself.
    States share a bin when floor(temp / temp_resolution) agrees, so halving the
    resolution splits every bin in two; `temp_resolution=0` keys states by exact temperature.
    """
    if problem.horizon > horizon_limit:
        raise InputError("HORIZON_LIMIT", f"horizon {problem.horizon} exceeds the DP limit {horizon_limit}")
    if temp_resolution < 0:
        raise InputError("RESOLUTION_NEGATIVE", "temp_resolution must be >= 0")

    stepper = get_stepper(problem.method)
    actions = problem.actions()
    layers: List[List[_Node]] = [[_Node(problem.initial_temp, 0.0, -1, 0.0)]]

    for t in range(problem.horizon):
        best: Dict[float, int] = {}
        layer: List[_Node] = []
        for pi, node in enumerate(layers[-1]):
            for q_ac in actions:
                temp = _next_temp(problem, stepper, t, node.temp, q_ac)
                if weights is None:
                    if problem.occupied(t) and _violation(problem, t, temp) != (0.0, 0.0):
                        continue
                    cost = node.cost + step_energy_wh(q_ac, problem.dt, problem.params)
                else:
                    cost = node.cost + _step_alpha(problem, weights, t, q_ac, temp)
                key = math.floor(temp / temp_resolution) if temp_resolution > 0 else temp
                j = best.get(key)
                if j is None:
                    best[key] = len(layer)
                    layer.append(_Node(temp, cost, pi, q_ac))
                elif cost < layer[j].cost:
                    layer[j] = _Node(temp, cost, pi, q_ac)
        if not layer:
            raise InfeasibleError(
                "BAND_UNREACHABLE", f"no action keeps the zone inside the comfort band at step {t}", step=t
            )
        layers.append(layer)

    idx = min(range(len(layers[-1])), key=lambda i: layers[-1][i].cost)
    objective = layers[-1][idx].cost
    plan: List[float] = []
    for depth in range(len(layers) - 1, 0, -1):
        node = layers[depth][idx]
        plan.append(node.action)
        idx = node.parent
    plan.reverse()

    breakdown = penalty_alpha(plan, problem, weights or PenaltyWeights())
    logger.debug("solve_mpc: horizon %d, %d final states, objective %.6g",
                 problem.horizon, len(layers[-1]), objective)
    return PlanResult("mpc", tuple(plan), simulate_plan(plan, problem), objective, breakdown)


def solve_ahc(problem: ControlProblem, weights: PenaltyWeights = PenaltyWeights()) -> PlanResult:
    """Myopic: cheapest action that keeps the next temperature in band when occupied."""
    stepper = get_stepper(problem.method)
    actions = problem.actions()
    plan: List[float] = []
    temp = problem.initial_temp
    for t in range(problem.horizon):
        choice = actions[-1]
        for q_ac in actions:
            nxt = _next_temp(problem, stepper, t, temp, q_ac)
            if not problem.occupied(t) or _violation(problem, t, nxt) == (0.0, 0.0):
                choice = q_ac
                break
        temp = _next_temp(problem, stepper, t, temp, choice)
        plan.append(choice)
    breakdown = penalty_alpha(plan, problem, weights)
    return PlanResult("ahc", tuple(plan), simulate_plan(plan, problem), breakdown.alpha, breakdown)


def solve_olc(problem: ControlProblem, weights: PenaltyWeights = PenaltyWeights()) -> PlanResult:
    raise UnimplementedStrategyError("STRATEGY_UNIMPLEMENTED", "the online competitive-ratio strategy is not implemented")


STRATEGIES: Dict[str, Callable[..., PlanResult]] = {
    "mpc": solve_mpc,
    "ahc": solve_ahc,
    "olc": solve_olc,
}


def solve(strategy: str, problem: ControlProblem, weights: Optional[PenaltyWeights] = None) -> PlanResult:
    try:
        fn = STRATEGIES[strategy]
    except KeyError:
        raise InputError("STRATEGY_UNKNOWN", f"unknown strategy '{strategy}' ({', '.join(STRATEGIES)})") from None
    if strategy == "mpc":
        return fn(problem, weights)
    return fn(problem, weights or PenaltyWeights())


def score_controller(
    actuation: Sequence[float],
    problem: ControlProblem,
    weights: PenaltyWeights = PenaltyWeights(),
) -> float:
    """Alpha of a realized actuation trace (e.g. a setpoint controller's Q_AC)."""
    if len(actuation) != problem.horizon:
        raise InputError("HORIZON_MISMATCH", f"run has {len(actuation)} steps, problem has {problem.horizon}")
    if problem.horizon == 0:
        return 0.0
    return penalty_alpha(list(actuation), problem, weights).alpha
