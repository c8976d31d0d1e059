import tempfile
import time
import unittest
from pathlib import Path

from PySide6.QtCore import Qt
from PySide6.QtTest import QTest
from PySide6.QtWidgets import QApplication

from deskbms.ui.main_window import MainWindow


class TestMainWindowUI(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.app = QApplication.instance() or QApplication([])

    def setUp(self):
        self.window = MainWindow()
        self.window.show()
        QTest.qWaitForWindowExposed(self.window)

    def tearDown(self):
        self.window.close()

    def _wait_for_run(self, timeout_s=120.0):
        deadline = time.monotonic() + timeout_s
        while self.window._run_worker is not None or self.window._last_run is None:
            if time.monotonic() > deadline:
                self.fail("scenario run did not finish")
            QTest.qWait(50)

    def test_reference_profile_is_loaded(self):
        self.assertEqual(self.window.profile_combo.currentText(), "reference")
        self.assertEqual(self.window.controller_combo.currentText(), "hvac-mpc")
        self.assertIn("Profile loaded: reference", self.window.log_box.toPlainText())

    def test_validate_updates_results_list(self):
        btn = self.window.findChild(type(self.window.btn_validate), "btn_validate")
        QTest.mouseClick(btn, Qt.LeftButton)

        results = self.window.findChild(type(self.window.results_list), "results_list")
        texts = [results.item(i).text() for i in range(results.count())]
        self.assertEqual(texts[0], "[INFO] Validation: 0 error(s), 0 warning(s)")
        self.assertTrue(any("PROFILE_OK" in t for t in texts))

    def test_inverted_setpoints_are_reported(self):
        self.window.sp_oc_spin.setValue(30.0)
        self.window.sp_uo_spin.setValue(24.0)
        QTest.mouseClick(self.window.btn_run, Qt.LeftButton)
        texts = [self.window.results_list.item(i).text() for i in range(self.window.results_list.count())]
        self.assertTrue(texts[0].startswith("[ERROR] SETPOINT_ORDER"))
        self.assertIsNone(self.window._run_worker)

    def test_run_then_export(self):
        with tempfile.TemporaryDirectory() as out_dir:
            self.window.controller_combo.setCurrentText("baseline")
            self.window.days_spin.setValue(1)
            self.window.output_edit.setText(out_dir)
            self.assertFalse(self.window.btn_export.isEnabled())

            QTest.mouseClick(self.window.btn_run, Qt.LeftButton)
            self._wait_for_run()

            self.assertEqual(self.window.progress.value(), 100)
            self.assertIn("---- RUN DONE ----", self.window.log_box.toPlainText())
            self.assertTrue(self.window.summary_label.text().startswith("baseline: "))
            self.assertTrue(self.window.btn_export.isEnabled())

            QTest.mouseClick(self.window.btn_export, Qt.LeftButton)
            written = sorted(p.name for p in Path(out_dir).iterdir())
            self.assertEqual(written, ["reference_report.html", "reference_report.json",
                                       "reference_setpoints.csv", "reference_traces.csv"])


if __name__ == "__main__":
    unittest.main()
