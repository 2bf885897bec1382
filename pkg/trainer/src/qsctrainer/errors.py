"""Exception hierarchy for the trainer package."""

from __future__ import annotations


class TrainerError(Exception):
    """Base class for all errors raised by this package."""


class ArgumentError(TrainerError, ValueError):
    """An argument value violates a documented precondition."""


class CloudFormatError(TrainerError, ValueError):
    """A point-cloud file on disk is malformed."""


class ConstructionError(TrainerError, ValueError):
    """Encoder and decoder specifications are mutually inconsistent."""


class NormalizationError(TrainerError, ValueError):
    """A code vector has zero power and cannot be normalized."""


class TrainingError(TrainerError, RuntimeError):
    """Training diverged or was fed data it cannot consume."""


class ExportError(TrainerError, RuntimeError):
    """A code archive could not be written or failed its power check."""


class ConfigError(TrainerError, ValueError):
    """A training-config file is malformed or holds out-of-range values."""
