# -*- coding: utf-8 -*-
from __future__ import annotations

import html
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from deskbms.core.manifest import build_scenario_report_dict, write_report_json
from deskbms.core.scenario import Scenario, ScenarioRun
from deskbms.core.strategy import PlanResult
from deskbms.core.traces import write_decision_log_csv, write_plan_csv, write_series_csv, write_setpoints_csv
from deskbms.models import TimeSeries, ValidationResult


def _esc(s: Any) -> str:
    return html.escape("" if s is None else str(s))


def _num(x: Optional[float], fmt: str = "{:.1f}", suffix: str = "") -> str:
    return "n/a" if x is None else fmt.format(x) + suffix


def _group_results(results: Sequence[ValidationResult]) -> Dict[str, List[ValidationResult]]:
    groups: Dict[str, List[ValidationResult]] = {"ERROR": [], "WARNING": [], "INFO": []}
    for r in results:
        groups.setdefault((r.level or "INFO").upper(), []).append(r)
    return groups


CSS = """
body { font-family: -apple-system, Segoe UI, Roboto, Arial, sans-serif; margin: 24px; }
h1 { margin: 0 0 6px 0; }
.sub { color: #444; margin: 0 0 18px 0; }
.card { border: 1px solid #ddd; border-radius: 10px; padding: 14px; margin: 12px 0; }
.row { display: flex; gap: 18px; flex-wrap: wrap; }
.kv { min-width: 200px; }
.k { color: #666; font-size: 12px; }
.v { font-weight: 600; font-size: 18px; }
table { width: 100%; border-collapse: collapse; margin-top: 8px; }
th, td { border-bottom: 1px solid #eee; padding: 6px 8px; text-align: right; font-size: 13px; }
th:first-child, td:first-child { text-align: left; }
th { background: #fafafa; }
.pill { display: inline-block; padding: 2px 8px; border-radius: 999px; font-size: 12px; font-weight: 700; }
.err { background: #ffe9e9; color: #8a0000; }
.warn { background: #fff4d6; color: #7a5200; }
.info { background: #e9f3ff; color: #003a7a; }
code { background: #f6f6f6; padding: 1px 4px; border-radius: 6px; }
.small { font-size: 12px; color: #555; }
"""


def _pill(level: str) -> str:
    cls = {"ERROR": "err", "WARNING": "warn"}.get(level.upper(), "info")
    return f'<span class="pill {cls}">{_esc(level.upper())}</span>'


def _kv(label: str, value: str) -> str:
    return f'<div class="kv"><div class="k">{_esc(label)}</div><div class="v">{_esc(value)}</div></div>'


def build_report_html(run: ScenarioRun, profile: Optional[str] = None, strategy: Optional[PlanResult] = None) -> str:
    rep = run.report
    if rep is None:
        raise ValueError("cannot render a cancelled run")
    groups = _group_results(run.issues)

    kwh = rep.energy_wh / 1000.0
    head = [
        _kv("Energy", f"{kwh:.1f} kWh"),
        _kv("Comfort (|PMV| <= 0.5)", _num(None if rep.comfort_fraction is None else 100 * rep.comfort_fraction, suffix=" %")),
        _kv("Mean PPD", _num(rep.mean_ppd, suffix=" %")),
        _kv("Penalty alpha", f"{rep.alpha:.2f}"),
    ]
    if rep.baseline_energy_wh is not None:
        head.insert(1, _kv("Always-on baseline", f"{rep.baseline_energy_wh / 1000.0:.1f} kWh"))
        head.insert(2, _kv("Savings", _num(rep.savings_pct, suffix=" %")))
    if strategy is not None:
        head.append(_kv(f"Plan alpha ({strategy.strategy})", f"{strategy.breakdown.alpha:.2f}"))

    day_rows = []
    for d, e in enumerate(rep.daily_energy_wh):
        base = rep.baseline_daily_energy_wh[d] if d < len(rep.baseline_daily_energy_wh) else None
        sav = rep.daily_savings_pct[d] if d < len(rep.daily_savings_pct) else None
        day_rows.append(
            f"<tr><td>Day {d + 1}</td><td>{e / 1000.0:.2f}</td>"
            f"<td>{_num(None if base is None else base / 1000.0, '{:.2f}')}</td>"
            f"<td>{_num(sav)}</td></tr>"
        )

    spread = ""
    if rep.savings_mean_pct is not None:
        spread = (f"<p class='small'>Daily savings {rep.savings_mean_pct:.1f} % "
                  f"(std {rep.savings_std_pct:.1f} %)</p>")

    decisions = "".join(
        f"<li><code>{_esc(k)}</code> - {v}</li>" for k, v in rep.decision_counts.items()
    ) or "<li class='small'>No controller decisions.</li>"
    log_note = f"<p class='small'>Decision log: <code>{_esc(rep.decision_log)}</code></p>" if rep.decision_log else ""

    issue_rows = "".join(
        f"<tr><td>{_pill(r.level)}</td><td><code>{_esc(r.code)}</code></td><td>{_esc(r.message)}</td></tr>"
        for level in ("ERROR", "WARNING", "INFO") for r in groups.get(level, [])
    ) or '<tr><td colspan="3" class="small">No findings.</td></tr>'

    return f"""<!doctype html>
<html>
<head>
  <meta charset="utf-8">
  <title>Scenario Report - {_esc(rep.name)}</title>
  <style>{CSS}</style>
</head>
<body>
  <h1>Scenario Report - {_esc(rep.name)}</h1>
  <p class="sub">Profile {_esc(profile or rep.name)} - controller <code>{_esc(rep.controller)}</code>,
    transport <code>{_esc(run.transport)}</code>, {_esc(rep.method)} integration,
    {rep.steps} steps of {rep.dt:g} s</p>

  <div class="card"><div class="row">{''.join(head)}</div></div>

  <div class="card">
    <h2>Daily Energy (kWh)</h2>
    {spread}
    <table>
      <thead><tr><th>Day</th><th>Controller</th><th>Baseline</th><th>Savings %</th></tr></thead>
      <tbody>{''.join(day_rows)}</tbody>
    </table>
  </div>

  <div class="card">
    <h2>Comfort</h2>
    <p class="small">{rep.occupied_steps} occupied step(s), {rep.out_of_range_steps} outside the PMV temperature range.
      Overheat {rep.alpha_overheat:.2f} K-steps, overcool {rep.alpha_overcool:.2f} K-steps.</p>
    <h3>Controller decisions</h3>
    <ul>{decisions}</ul>
    {log_note}
  </div>

  <div class="card">
    <h2>Findings</h2>
    <p class="small">{len(groups["ERROR"])} error(s), {len(groups["WARNING"])} warning(s), {len(groups["INFO"])} info</p>
    <table>
      <thead><tr><th>Level</th><th>Code</th><th>Message</th></tr></thead>
      <tbody>{issue_rows}</tbody>
    </table>
  </div>
</body>
</html>
"""


def write_report_html(html_text: str, report_path: str) -> str:
    p = Path(report_path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(html_text, encoding="utf-8")
    return str(p)


def write_run_traces_csv(run: ScenarioRun, weather: TimeSeries, occupancy: TimeSeries, path: str) -> str:
    """Companion CSV: one row per step, both controllers side by side."""
    columns: Dict[str, TimeSeries] = {"t_out_c": weather, "occupancy": occupancy}
    for label, r in (("", run.controlled), ("baseline_", run.baseline)):
        if r is None:
            continue
        columns[f"{label}t_in_c"] = r.temperatures
        columns[f"{label}setpoint_c"] = r.setpoints
        columns[f"{label}q_ac_w"] = r.plan
    return str(write_series_csv(columns, Path(path)))


def write_run_bundle(
    run: ScenarioRun,
    scenario: Scenario,
    out_dir: str,
    prefix: str = "",
    profile: Optional[str] = None,
    strategy: Optional[PlanResult] = None,
    plan_path: Optional[str] = None,
) -> List[Tuple[str, str]]:
    """Writes every artifact of a finished run into out_dir; returns (label, path) pairs."""
    if run.report is None:
        raise ValueError("cannot export a cancelled run")
    out = Path(out_dir)
    written: List[Tuple[str, str]] = []

    if run.controlled.decisions:
        log = write_decision_log_csv([d.as_row() for d in run.controlled.decisions], out / f"{prefix}decisions.csv")
        run = replace(run, report=replace(run.report, decision_log=log.name))
        written.append(("Decision log", str(log)))
    written.append(("Setpoints CSV", str(write_setpoints_csv(run.controlled.setpoints, out / f"{prefix}setpoints.csv"))))
    if strategy is not None:
        target = Path(plan_path) if plan_path else out / f"{prefix}{strategy.strategy}_plan.csv"
        written.append(("Plan CSV", str(write_plan_csv(scenario.weather.with_values(strategy.plan), target))))

    report = build_scenario_report_dict(run.report, run.issues, profile, run.transport, strategy)
    written.append(("Report JSON", write_report_json(report, str(out / f"{prefix}report.json"))))
    written.append(("Report HTML", write_report_html(build_report_html(run, profile, strategy), str(out / f"{prefix}report.html"))))
    written.append(("Traces CSV", write_run_traces_csv(run, scenario.weather, scenario.occupancy, str(out / f"{prefix}traces.csv"))))
    return written
