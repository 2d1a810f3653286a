"""wheelsim: software twin of a multi-modal assistive wheelchair controller
and its remote health-monitoring pipeline."""

__version__ = "0.1.0"

from .arbitration import (
    ArbitrationState,
    ControlInputs,
    HazardStillActive,
    ModeId,
    MotionCommand,
    MotionDirection,
    arbitrate,
    clear_safe_halt,
    debounce_ok,
    run_loop,
    select_mode,
)
from .calibration import (
    CalibrationCoefficients,
    CalibratedVital,
    RawSample,
    apply_calibration,
    generate_vital_trace,
    quantize_accel,
    quantize_temperature,
    two_point_fit,
)
from .detectors import (
    AlertEvent,
    AlertKind,
    DetectorConfig,
    Severity,
    classify,
    detect_convulsion,
    detect_fall,
    detect_heart_attack,
)
from .protocol import FeedRecord, decode_frame, encode_frame
from .analytics import AgreementReport, PairedReadings, bland_altman, rmse
