"""Desk-scale simulator and metrics harness for semantic point-cloud
transmission over a modeled quantum-secured fiber link."""

from .codec import (
    CodecDescriptor,
    CodecKind,
    SemanticCode,
    baseline_decode,
    baseline_encode,
    load_external_codes,
    power_normalize,
    save_code_archive,
)
from .errors import (
    ArchiveFormatError,
    ArgumentError,
    CalibrationError,
    ConfigError,
    DegenerateChannelError,
    KeyExhaustionError,
    NormalizationError,
    PointCloudParseError,
    ProtocolStateError,
    QscError,
    ReportIOError,
    RunError,
    ValidationError,
)
from .link import (
    CapacityConfig,
    CapacityMode,
    ChannelParams,
    LinkBudget,
    binary_entropy,
    calibrate_duty_factor,
    calibrate_misalignment,
    capacity_lines,
    click_probability,
    info_rate,
    link_budget,
    qber_model,
    simulate_gates,
    transmittance,
)
from .pipeline import (
    TimingModel,
    TransmissionReport,
    batch_saturation_report,
    calibrate_timing,
    compute_edr,
    compute_rte,
    emit_report,
    load_dataset,
    simulate_run,
)
from .pointcloud import (
    CloudFormat,
    KnnGraph,
    PointCloud,
    chamfer_distance,
    knn_graph,
    load_pointcloud,
    save_pointcloud,
)
from .protocol import (
    EveModel,
    Frame,
    KeyPool,
    Phase,
    SessionConfig,
    SessionReport,
    SessionState,
    distill_key,
    otp_decrypt,
    otp_encrypt,
    qber_gate,
    run_session,
    transmit_frame,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
