from __future__ import annotations

import json
import math
from dataclasses import asdict
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from deskbms.config import APP_NAME, APP_VERSION
from deskbms.core.calibration import CalibrationResult, Guideline14Result
from deskbms.core.counter import MatchResult, ReplayStats
from deskbms.core.forecast import RecipeScore, RegressionModel
from deskbms.core.scenario import ScenarioReport
from deskbms.core.strategy import PlanResult
from deskbms.models import ValidationResult


def _finite(x: Any) -> Any:
    """JSON has no NaN/inf; those become null."""
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _finite(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_finite(v) for v in x]
    return x


def _results(results: Sequence[ValidationResult]) -> List[Dict[str, Any]]:
    return [{"level": r.level, "code": r.code, "message": r.message, "field": r.field} for r in results]


def _header(kind: str, profile: Optional[str]) -> Dict[str, Any]:
    # no wall-clock stamp: identical inputs give byte-identical reports
    return {"tool": APP_NAME, "version": APP_VERSION, "kind": kind, "profile": profile}


def build_scenario_report_dict(
    report: ScenarioReport,
    issues: Sequence[ValidationResult] = (),
    profile: Optional[str] = None,
    transport: Optional[str] = None,
    strategy: Optional[PlanResult] = None,
) -> Dict[str, Any]:
    d = _header("scenario", profile)
    d["run"] = {"transport": transport}
    d["report"] = asdict(report)
    if strategy is not None:
        d["strategy"] = build_strategy_dict(strategy, report.alpha)
    d["results"] = _results(issues)
    return _finite(d)


def build_strategy_dict(result: PlanResult, controller_alpha: Optional[float] = None) -> Dict[str, Any]:
    """Objective breakdown of a solved plan, next to the realized controller's alpha."""
    return {
        "strategy": result.strategy,
        "objective": result.objective,
        "breakdown": asdict(result.breakdown),
        "steps": len(result.plan),
        "controller_alpha": controller_alpha,
    }


def build_calibration_dict(
    result: CalibrationResult,
    guideline: Optional[Guideline14Result] = None,
    initial_values: Optional[Dict[str, float]] = None,
    profile: Optional[str] = None,
) -> Dict[str, Any]:
    d = _header("calibration", profile)
    d["initial_values"] = initial_values
    d["values"] = dict(result.values)
    d["cvrmse"] = result.cvrmse
    d["mbe"] = result.mbe
    d["rounds"] = result.rounds
    d["cosimulations"] = result.cosimulations
    d["converged"] = result.converged
    d["history"] = [asdict(r) for r in result.history]
    if guideline is not None:
        d["guideline14"] = {**asdict(guideline), "passed": guideline.passed}
    return _finite(d)


def build_forecast_dict(
    model: Optional[RegressionModel],
    scores: Sequence[RecipeScore] = (),
    holdout_day: Optional[str] = None,
    profile: Optional[str] = None,
) -> Dict[str, Any]:
    d = _header("forecast", profile)
    d["model"] = model.to_json_dict() if model is not None else None
    d["holdout_day"] = holdout_day
    d["recipes"] = [
        {"label": s.label, "r_squared": s.r_squared, "rmse": s.rmse,
         "recipe": s.model.recipe if s.model is not None else None}
        for s in scores
    ]
    return _finite(d)


def build_count_dict(
    stats: ReplayStats,
    final_occupants: int,
    match: Optional[MatchResult] = None,
    metrics: Optional[Dict[str, Optional[float]]] = None,
) -> Dict[str, Any]:
    d = _header("count", None)
    d["replay"] = {**asdict(stats), "inconsistency_count": stats.inconsistency_count}
    d["final_occupants"] = final_occupants
    d["match"] = asdict(match) if match is not None else None
    d["metrics"] = metrics or {}
    return _finite(d)


def write_report_json(report: Dict[str, Any], path: str) -> str:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("w", encoding="utf-8") as f:
        json.dump(report, f, indent=2, ensure_ascii=False, allow_nan=False)
        f.write("\n")
    return str(p)
