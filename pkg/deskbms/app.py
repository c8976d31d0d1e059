import sys

from PySide6.QtWidgets import QApplication

from deskbms.config import APP_NAME, APP_VERSION
from deskbms.ui.main_window import MainWindow


def run_app() -> int:
    """Opens the scenario runner; returns the Qt exit code for the CLI to pass on."""
    app = QApplication.instance() or QApplication(sys.argv)
    app.setApplicationName(APP_NAME)
    app.setApplicationVersion(APP_VERSION)

    window = MainWindow()
    window.show()
    return app.exec()
