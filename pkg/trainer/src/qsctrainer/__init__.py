"""Desk-scale trainer for learned point-cloud codecs.

Trains an encoder/decoder pair end-to-end against a set-based
reconstruction loss and exports power-normalized semantic codes in the
archive format consumed by the companion simulator package.  The two
packages couple only through file formats, never through imports.
"""

from .clouds import CLOUD_SUFFIXES, load_cloud, load_dataset, save_cloud
from .data import synthetic_clouds
from .errors import (
    ArgumentError,
    CloudFormatError,
    ConfigError,
    ConstructionError,
    ExportError,
    NormalizationError,
    TrainerError,
    TrainingError,
)
from .export import (
    ARCHIVE_MAGIC,
    ARCHIVE_POWER_TOL,
    ARCHIVE_VERSION,
    export_codes,
    write_code_archive,
)
from .loss import chamfer_loss
from .models import (
    Decoder,
    DecoderSpec,
    Encoder,
    EncoderSpec,
    GRAPH_STAGE_COUNT,
    build_models,
    knn_indices,
)
from .train import (
    DEFAULT_LR_HALVE_EPOCHS,
    TrainConfig,
    TrainResult,
    load_train_config,
    simulate_channel_noise,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "ARCHIVE_MAGIC",
    "ARCHIVE_POWER_TOL",
    "ARCHIVE_VERSION",
    "ArgumentError",
    "CLOUD_SUFFIXES",
    "CloudFormatError",
    "ConfigError",
    "ConstructionError",
    "DEFAULT_LR_HALVE_EPOCHS",
    "Decoder",
    "DecoderSpec",
    "Encoder",
    "EncoderSpec",
    "ExportError",
    "GRAPH_STAGE_COUNT",
    "NormalizationError",
    "TrainConfig",
    "TrainResult",
    "TrainerError",
    "TrainingError",
    "build_models",
    "chamfer_loss",
    "export_codes",
    "knn_indices",
    "load_cloud",
    "load_dataset",
    "load_train_config",
    "save_cloud",
    "simulate_channel_noise",
    "synthetic_clouds",
    "train",
    "write_code_archive",
]
