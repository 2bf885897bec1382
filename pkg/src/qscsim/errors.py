"""Exception types shared across the simulator."""


class QscError(Exception):
    """Base class for all simulator errors."""


class PointCloudParseError(QscError):
    """Cloud file could not be parsed; message names the offending line or byte offset."""


class ValidationError(QscError, ValueError):
    """A value violates a type invariant (non-finite coordinate, bad probability, ...)."""


class ArgumentError(QscError, ValueError):
    """An operation was called with arguments outside its stated domain."""


class NormalizationError(QscError, ValueError):
    """Power normalization is undefined for the given vector (zero norm)."""


class ArchiveFormatError(QscError):
    """A semantic-code archive is malformed; message names the record index when known."""


class DegenerateChannelError(QscError):
    """Channel parameters leave no click source at all (no photons, no darks)."""


class ProtocolStateError(QscError):
    """A session operation was invoked in the wrong phase."""


class KeyExhaustionError(QscError):
    """The preshared key pool cannot cover the requested number of bits."""


class CalibrationError(QscError):
    """Timing calibration cannot produce a model from the given rows."""


class RunError(QscError):
    """A pipeline run failed; message names the cloud identifier when applicable."""


class ConfigError(QscError):
    """Run configuration is invalid; message starts with the offending field path."""


class ReportIOError(QscError):
    """A report file could not be written or read; message names the path."""
