import logging
import os
from dataclasses import replace
from pathlib import Path

from PySide6.QtCore import Qt, QObject, QThread, Signal
from PySide6.QtWidgets import (
    QMainWindow,
    QWidget,
    QVBoxLayout,
    QHBoxLayout,
    QLabel,
    QLineEdit,
    QPushButton,
    QFileDialog,
    QComboBox,
    QListWidget,
    QListWidgetItem,
    QPlainTextEdit,
    QSplitter,
    QMessageBox,
    QProgressBar,
    QSpinBox,
    QDoubleSpinBox,
)

from deskbms.config import APP_NAME, APP_VERSION
from deskbms.core.profiles import (
    CONTROLLERS,
    TRANSPORTS,
    ScenarioProfile,
    default_profiles,
    ensure_default_profiles_on_disk,
    load_profile,
    profiles_dir,
    save_profile,
)
from deskbms.core.reporting import write_run_bundle
from deskbms.core.scenario import build_scenario, run_scenario
from deskbms.core.validator import has_errors, validate_profile
from deskbms.models import DeskBmsError

logger = logging.getLogger(__name__)

LEVEL_PRIORITY = {"ERROR": 0, "WARNING": 1, "INFO": 2}
LEVEL_COLORS = {"ERROR": Qt.red, "WARNING": Qt.darkYellow}


def _summary_text(rep) -> str:
    parts = [f"{rep.controller}: {rep.energy_wh / 1000.0:.1f} kWh over {rep.steps} steps"]
    if rep.savings_pct is not None:
        parts.append(f"{rep.savings_pct:.1f}% below always-on ({rep.baseline_energy_wh / 1000.0:.1f} kWh)")
    if rep.comfort_fraction is not None:
        parts.append(f"comfortable {100 * rep.comfort_fraction:.1f}% of occupied steps")
    return " | ".join(parts)


class _LogEmitter(QObject):
    line = Signal(str)


class QtLogHandler(logging.Handler):
    """Forwards log records to the GUI thread through a Signal."""

    def __init__(self):
        super().__init__(level=logging.INFO)
        self.emitter = _LogEmitter()
        self.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))

    def emit(self, record):
        try:
            self.emitter.line.emit(self.format(record))
        except RuntimeError:
            # emitter already deleted during shutdown
            pass


class ScenarioWorker(QObject):
    progress = Signal(int, int, str)   # current, total, message
    finished = Signal(object, object)  # ScenarioRun, Scenario
    failed = Signal(str)

    def __init__(self, profile: ScenarioProfile, base_dir: Path):
        super().__init__()
        self.profile = profile
        self.base_dir = base_dir
        self._cancelled = False

    def cancel(self):
        self._cancelled = True

    def run(self):
        def _is_cancelled():
            return self._cancelled

        def _progress(i, total, controller):
            self.progress.emit(i, total, f"{controller}: step {i}/{total}")

        try:
            scenario = build_scenario(self.profile, self.base_dir)
            run = run_scenario(scenario, progress_cb=_progress, is_cancelled=_is_cancelled)
        except DeskBmsError as e:
            self.failed.emit(f"{e.code}: {e.message}")
            return
        except Exception as e:
            logger.exception("scenario run failed")
            self.failed.emit(f"INTERNAL: {e}")
            return
        self.finished.emit(run, scenario)


class MainWindow(QMainWindow):
    def __init__(self):
        super().__init__()
        self.setWindowTitle(f"{APP_NAME} (v{APP_VERSION})")
        self.setMinimumSize(1020, 680)

        self._last_run = None
        self._last_scenario = None
        self._run_thread = None
        self._run_worker = None

        root = QWidget()
        self.setCentralWidget(root)

        main_layout = QVBoxLayout(root)
        main_layout.setContentsMargins(12, 12, 12, 12)
        main_layout.setSpacing(10)

        # -------------------------
        # Profile + overrides
        # -------------------------
        prof_row = QHBoxLayout()

        self.profile_combo = QComboBox()
        self.controller_combo = QComboBox()
        self.controller_combo.addItems(list(CONTROLLERS))
        self.transport_combo = QComboBox()
        self.transport_combo.addItems(list(TRANSPORTS))
        self.forecast_combo = QComboBox()
        self.forecast_combo.addItems(["model", "perfect"])

        prof_row.addWidget(QLabel("Profile:"))
        prof_row.addWidget(self.profile_combo, 1)
        prof_row.addWidget(QLabel("Controller:"))
        prof_row.addWidget(self.controller_combo)
        prof_row.addWidget(QLabel("Transport:"))
        prof_row.addWidget(self.transport_combo)
        prof_row.addWidget(QLabel("Forecast:"))
        prof_row.addWidget(self.forecast_combo)
        main_layout.addLayout(prof_row)

        knob_row = QHBoxLayout()

        self.days_spin = QSpinBox()
        self.days_spin.setRange(1, 60)
        self.seed_spin = QSpinBox()
        self.seed_spin.setRange(0, 2_000_000_000)
        self.sp_oc_spin = QDoubleSpinBox()
        self.sp_oc_spin.setRange(10.0, 40.0)
        self.sp_oc_spin.setSingleStep(0.5)
        self.sp_uo_spin = QDoubleSpinBox()
        self.sp_uo_spin.setRange(10.0, 40.0)
        self.sp_uo_spin.setSingleStep(0.5)

        knob_row.addWidget(QLabel("Days:"))
        knob_row.addWidget(self.days_spin)
        knob_row.addWidget(QLabel("Seed:"))
        knob_row.addWidget(self.seed_spin)
        knob_row.addWidget(QLabel("Occupied setpoint (degC):"))
        knob_row.addWidget(self.sp_oc_spin)
        knob_row.addWidget(QLabel("Unoccupied setpoint (degC):"))
        knob_row.addWidget(self.sp_uo_spin)
        knob_row.addStretch(1)

        self.btn_profile_reload = QPushButton("Reload Profile")
        self.btn_profile_reload.clicked.connect(self.on_reload_profile_clicked)
        self.btn_profile_save = QPushButton("Save Profile")
        self.btn_profile_save.clicked.connect(self.on_save_profile_clicked)
        knob_row.addWidget(self.btn_profile_reload)
        knob_row.addWidget(self.btn_profile_save)
        main_layout.addLayout(knob_row)

        # -------------------------
        # Output folder + actions
        # -------------------------
        out_row = QHBoxLayout()
        self.output_edit = QLineEdit()
        self.output_edit.setPlaceholderText("Select report folder...")
        btn_output = QPushButton("Browse...")
        btn_output.clicked.connect(self.pick_output_folder)

        self.btn_validate = QPushButton("Validate")
        self.btn_validate.clicked.connect(self.on_validate_clicked)
        self.btn_run = QPushButton("Run Scenario")
        self.btn_run.clicked.connect(self.on_run_clicked)
        self.btn_export = QPushButton("Export Report")
        self.btn_export.setEnabled(False)  # enabled after a finished run
        self.btn_export.clicked.connect(self.on_export_clicked)

        out_row.addWidget(QLabel("Reports:"))
        out_row.addWidget(self.output_edit, 1)
        out_row.addWidget(btn_output)
        out_row.addWidget(self.btn_validate)
        out_row.addWidget(self.btn_run)
        out_row.addWidget(self.btn_export)
        main_layout.addLayout(out_row)

        # -------------------------
        # Run status
        # -------------------------
        status_row = QHBoxLayout()
        self.progress = QProgressBar()
        self.progress.setRange(0, 100)
        self.progress.setFormat("%p% of simulated steps")
        self.step_label = QLabel("idle")
        self.step_label.setMinimumWidth(160)
        self.btn_cancel = QPushButton("Cancel Run")
        self.btn_cancel.setEnabled(False)
        self.btn_cancel.clicked.connect(self.on_cancel_clicked)
        for w, stretch in ((self.step_label, 0), (self.progress, 1), (self.btn_cancel, 0)):
            status_row.addWidget(w, stretch)
        main_layout.addLayout(status_row)

        self.summary_label = QLabel("No scenario run yet.")
        self.summary_label.setTextInteractionFlags(Qt.TextSelectableByMouse)
        main_layout.addWidget(self.summary_label)

        # -------------------------
        # Findings | controller log
        # -------------------------
        self.results_list = QListWidget()
        self.log_box = QPlainTextEdit()
        self.log_box.setReadOnly(True)
        self.log_box.setMaximumBlockCount(5000)
        self.log_box.setPlaceholderText("deskbms log records and run milestones")

        panes = QSplitter(Qt.Vertical)
        for title, body in (("Findings", self.results_list), ("Controller log", self.log_box)):
            pane = QWidget()
            pane_layout = QVBoxLayout(pane)
            pane_layout.setContentsMargins(0, 4, 0, 0)
            pane_layout.addWidget(QLabel(f"<b>{title}</b>"))
            pane_layout.addWidget(body, 1)
            panes.addWidget(pane)
        panes.setStretchFactor(0, 3)
        panes.setStretchFactor(1, 2)
        main_layout.addWidget(panes, 1)

        # Stable IDs (useful for UI tests)
        self.profile_combo.setObjectName("profile_combo")
        self.controller_combo.setObjectName("controller_combo")
        self.transport_combo.setObjectName("transport_combo")
        self.forecast_combo.setObjectName("forecast_combo")
        self.days_spin.setObjectName("days_spin")
        self.seed_spin.setObjectName("seed_spin")
        self.output_edit.setObjectName("output_edit")
        self.btn_validate.setObjectName("btn_validate")
        self.btn_run.setObjectName("btn_run")
        self.btn_export.setObjectName("btn_export")
        self.btn_cancel.setObjectName("btn_cancel")
        self.results_list.setObjectName("results_list")
        self.log_box.setObjectName("log_box")
        self.progress.setObjectName("progress")

        self._log_handler = QtLogHandler()
        self._log_handler.emitter.line.connect(self.log)
        logging.getLogger("deskbms").addHandler(self._log_handler)
        if logging.getLogger("deskbms").getEffectiveLevel() > logging.INFO:
            logging.getLogger("deskbms").setLevel(logging.INFO)

        self._repo_root = str(Path(__file__).resolve().parents[2])  # .../deskbms/ui/main_window.py -> repo root
        ensure_default_profiles_on_disk(self._repo_root)

        self._active_profile = None
        names = sorted(p.stem for p in profiles_dir(self._repo_root).glob("*.json")) or list(default_profiles())
        self.profile_combo.addItems(names)
        self.profile_combo.currentTextChanged.connect(self.on_profile_changed)
        self.profile_combo.setCurrentText("reference")
        self.on_profile_changed(self.profile_combo.currentText())

        self.log("Ready. Pick a profile, then Validate / Run Scenario.")

    def closeEvent(self, event):
        logging.getLogger("deskbms").removeHandler(self._log_handler)
        if self._run_worker:
            self._run_worker.cancel()
        super().closeEvent(event)

    # -------------------------
    # UI Helpers
    # -------------------------
    def log(self, msg: str):
        self.log_box.appendPlainText(msg)

    def add_result(self, level: str, message: str):
        lvl = level.upper().strip()
        item = QListWidgetItem(f"[{lvl}] {message}")
        item.setForeground(LEVEL_COLORS.get(lvl, Qt.darkGreen))
        self.results_list.addItem(item)

    def _show_results(self, results):
        for r in sorted(results, key=lambda r: (LEVEL_PRIORITY.get(r.level.upper(), 3), r.code)):
            suffix = f" ({r.field})" if r.field else ""
            self.add_result(r.level, f"{r.code}: {r.message}{suffix}")

    def pick_output_folder(self):
        folder = QFileDialog.getExistingDirectory(self, "Select Report Folder")
        if folder:
            self.output_edit.setText(os.path.normpath(folder))
            self.log(f"Report folder set: {folder}")

    def _set_busy(self, busy: bool):
        self.btn_cancel.setEnabled(busy)
        for b in (self.btn_validate, self.btn_run, self.btn_profile_reload, self.btn_profile_save):
            b.setEnabled(not busy)
        self.btn_export.setEnabled(not busy and self._last_run is not None and self._last_run.report is not None)

    # -------------------------
    # Profiles
    # -------------------------
    def on_profile_changed(self, name: str):
        if not name:
            return
        try:
            prof = load_profile(self._repo_root, name)
        except DeskBmsError as e:
            self.log(f"Profile load failed ({e.code}); using built-in defaults.")
            prof = default_profiles().get(name, default_profiles()["reference"])
        self._active_profile = prof
        self._apply_profile_to_editor(prof)
        self.log(f"Profile loaded: {prof.name}")

    def _apply_profile_to_editor(self, prof: ScenarioProfile):
        self.controller_combo.setCurrentText(prof.controller)
        self.transport_combo.setCurrentText(prof.transport)
        self.forecast_combo.setCurrentText(prof.forecast.source)
        self.days_spin.setValue(prof.generator.days)
        self.seed_spin.setValue(prof.generator.seed)
        self.sp_oc_spin.setValue(prof.policy.setpoint_oc)
        self.sp_uo_spin.setValue(prof.policy.setpoint_uo)

    def _read_profile_from_editor(self) -> ScenarioProfile:
        base = self._active_profile or default_profiles()["reference"]
        return replace(
            base,
            name=self.profile_combo.currentText().strip() or base.name,
            controller=self.controller_combo.currentText(),
            transport=self.transport_combo.currentText(),
            forecast=replace(base.forecast, source=self.forecast_combo.currentText()),
            generator=replace(base.generator, days=self.days_spin.value(), seed=self.seed_spin.value()),
            policy=replace(base.policy, setpoint_oc=self.sp_oc_spin.value(), setpoint_uo=self.sp_uo_spin.value()),
        )

    def on_reload_profile_clicked(self):
        self.on_profile_changed(self.profile_combo.currentText())

    def on_save_profile_clicked(self):
        try:
            prof = self._read_profile_from_editor()
            path = save_profile(self._repo_root, prof)
        except (DeskBmsError, OSError) as e:
            QMessageBox.critical(self, "Save Failed", str(e))
            return
        self._active_profile = prof
        self.add_result("INFO", f"Profile saved: {path}")
        self.log(f"Profile saved: {path}")

    # -------------------------
    # Validate / Run
    # -------------------------
    def _validated_profile(self):
        try:
            profile = self._read_profile_from_editor()
        except DeskBmsError as e:
            self.add_result("ERROR", f"{e.code}: {e.message}")
            return None, []
        results = validate_profile(profile, profiles_dir(self._repo_root))
        return profile, results

    def on_validate_clicked(self):
        self.results_list.clear()
        profile, results = self._validated_profile()
        if profile is None:
            return
        errors = sum(1 for r in results if r.level == "ERROR")
        warnings = sum(1 for r in results if r.level == "WARNING")
        self.add_result("INFO", f"Validation: {errors} error(s), {warnings} warning(s)")
        self._show_results(results)

    def on_run_clicked(self):
        self.results_list.clear()
        profile, results = self._validated_profile()
        if profile is None:
            return
        if has_errors(results):
            self._show_results(results)
            self.add_result("ERROR", "Run blocked due to errors.")
            return

        self._last_run = None
        self.progress.setValue(0)
        self.step_label.setText("starting")
        self._set_busy(True)
        self.log("---- RUN START ----")
        self.add_result("INFO", f"Running '{profile.name}' ({profile.controller}, {profile.generator.days} day(s))...")

        self._run_thread = QThread()
        self._run_worker = ScenarioWorker(profile, profiles_dir(self._repo_root))
        self._run_worker.moveToThread(self._run_thread)

        self._run_thread.started.connect(self._run_worker.run)
        self._run_worker.progress.connect(self._on_run_progress)
        self._run_worker.finished.connect(self._on_run_finished)
        self._run_worker.failed.connect(self._on_run_failed)

        for sig in (self._run_worker.finished, self._run_worker.failed):
            sig.connect(self._run_thread.quit)
            sig.connect(self._run_worker.deleteLater)
        self._run_thread.finished.connect(self._run_thread.deleteLater)
        self._run_thread.finished.connect(self._on_thread_done)

        self._run_thread.start()

    def _on_thread_done(self):
        self._run_thread = None
        self._run_worker = None

    def _on_run_progress(self, current: int, total: int, message: str):
        self.progress.setValue(int((current / max(total, 1)) * 100))
        self.step_label.setText(f"{message}: step {current}/{total}")
        if current == 1:
            self.log(f"{message} controller started ({total} steps)")

    def _on_run_failed(self, message: str):
        self.add_result("ERROR", f"Run failed: {message}")
        self.step_label.setText("failed")
        self.log("---- RUN FAILED ----")
        self._set_busy(False)

    def _on_run_finished(self, run, scenario):
        self._last_run, self._last_scenario = run, scenario
        rep = run.report
        if rep is None:
            self.step_label.setText("cancelled")
            self.summary_label.setText("Run cancelled; nothing to export.")
        else:
            self.progress.setValue(100)
            self.step_label.setText("done")
            self.summary_label.setText(_summary_text(rep))
            self.add_result("INFO", f"Energy: {rep.energy_wh / 1000.0:.1f} kWh")
            if rep.comfort_fraction is not None:
                self.add_result("INFO", f"Comfort: {100 * rep.comfort_fraction:.1f}% of occupied steps within |PMV| <= 0.5")
        self._show_results(run.issues)
        self.log("---- RUN DONE ----")
        self._set_busy(False)

    def on_cancel_clicked(self):
        if self._run_worker:
            self._run_worker.cancel()
            self.step_label.setText("cancelling...")
            self.add_result("WARNING", "Cancel requested; the run stops after the current step.")

    # -------------------------
    # Export
    # -------------------------
    def on_export_clicked(self):
        run = self._last_run
        if run is None or run.report is None:
            QMessageBox.information(self, "Nothing to Export", "Run a scenario first.")
            return
        out_dir = self.output_edit.text().strip()
        if not out_dir:
            QMessageBox.warning(self, "Missing Folder", "Please choose a report folder.")
            return

        name = run.report.name
        try:
            written = write_run_bundle(run, self._last_scenario, out_dir, prefix=f"{name}_", profile=name)
        except (DeskBmsError, OSError) as e:
            self.add_result("ERROR", f"EXPORT_FAILED: {e}")
            QMessageBox.critical(self, "Export Failed", f"Export failed:\n{e}")
            return

        for label, path in written:
            self.add_result("INFO", f"{label} written: {path}")
            self.log(f"{label} exported: {path}")
