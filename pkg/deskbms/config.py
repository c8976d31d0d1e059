APP_NAME = "Desk BMS"
APP_VERSION = "1.0.0"

DEFAULT_DT_S = 600
DEFAULT_SETPOINT_OC = 24.0
DEFAULT_SETPOINT_UO = 28.0
DEFAULT_DEADBAND = 0.5

CALIBRATION_THRESHOLD = 0.02
CALIBRATION_CANDIDATES = 11
CALIBRATION_MAX_ROUNDS = 20

IDLE_TIMEOUT_S = 30 * 60

FORECAST_WINDOW_DAYS = 30
FORECAST_EVENT_WINDOW_MIN = 45.0
FORECAST_HORIZON_S = 24 * 3600
FORECAST_RIDGE = 1e-8
ONSET_THRESHOLD = 0.05

DP_TEMP_RESOLUTION = 0.05
DP_ACTION_LEVELS = 5
DP_HORIZON_LIMIT = 288
PENALTY_RHO = 1000.0

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
