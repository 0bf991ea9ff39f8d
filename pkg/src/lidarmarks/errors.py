"""Exception types shared across the package."""


class LidarMarksError(Exception):
    """Base class for all package errors."""


class SchemaError(LidarMarksError):
    """A file header or payload does not match the documented schema."""


class CorruptionError(LidarMarksError):
    """A binary payload is truncated or has trailing garbage.

    Carries the byte offset at which the problem was detected.
    """

    def __init__(self, message, byte_offset):
        super().__init__(f"{message} (byte offset {byte_offset})")
        self.byte_offset = byte_offset


class StructuralError(LidarMarksError):
    """Index out of bounds, length mismatch, or inconsistent containers."""


class DegenerateInputError(LidarMarksError):
    """Too few or geometrically degenerate points for an estimator."""


class ConfigError(LidarMarksError):
    """Invalid configuration value, unknown key, or unknown profile."""


class PipelineStageError(LidarMarksError):
    """A pipeline stage failed on non-empty input; names the stage."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}': {cause}")
        self.stage = stage
