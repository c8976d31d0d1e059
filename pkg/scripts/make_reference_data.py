from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from deskbms.cli import main as cli_main  # noqa: E402
from deskbms.core.generator import GeneratorKnobs, generate_mosque_scenario, reference_weather  # noqa: E402
from deskbms.core.profiles import REFERENCE_ZONE  # noqa: E402
from deskbms.core.thermal import run_thermostat  # noqa: E402
from deskbms.core.traces import write_plan_csv, write_schedule_csv, write_trace_csv  # noqa: E402


def main():
    root = Path("reference_data")

    # 7-day scenario with 28 days of history, as the reference profile uses it
    cli_main(["generate", "--seed", "7", "--days", "7", "--out", str(root / "scenario"), "--name", "reference-csv"])

    # measured trace for `calibrate --measured`: the reference zone under its thermostat schedule
    knobs = GeneratorKnobs(seed=7, days=7, history_days=0)
    mosque = generate_mosque_scenario(knobs)
    occupancy = mosque.scenario_slice(knobs)
    weather, _ = reference_weather(occupancy.start_time, len(occupancy), occupancy.step)
    setpoints = occupancy.with_values(24.0 if o > 0 else 28.0 for o in occupancy.values)
    truth = run_thermostat(REFERENCE_ZONE, 28.0, weather, occupancy, setpoints)

    cal = root / "calibration"
    write_trace_csv(weather, cal / "weather.csv")
    write_trace_csv(occupancy, cal / "occupancy.csv")
    write_plan_csv(truth.plan, cal / "plan.csv")
    write_trace_csv(truth.temperatures, cal / "measured.csv")

    # eight weeks of occupancy for `forecast --holdout`
    fknobs = GeneratorKnobs(seed=7, days=56, history_days=0)
    fmosque = generate_mosque_scenario(fknobs)
    write_trace_csv(fmosque.occupancy, root / "forecast" / "history.csv")
    write_schedule_csv(fmosque.schedule, root / "forecast" / "schedule.csv")

    print(f"Created reference data at: {root.resolve()}")


if __name__ == "__main__":
    main()
