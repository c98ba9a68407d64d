"""Exception hierarchy shared across the toolkit."""


class VoxstatsError(Exception):
    """Base class for all toolkit errors."""


class DecodeError(VoxstatsError):
    """Malformed or truncated audio container."""


class UnsupportedFormat(VoxstatsError):
    """Audio format outside the supported PCM16/float32, 1-2 channel set."""


class ManifestError(VoxstatsError):
    """Bad manifest record; carries the 1-based line number."""

    def __init__(self, line_no, message):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class ConfigError(VoxstatsError):
    """Invalid or inconsistent configuration values."""


class EmptyResult(VoxstatsError):
    """Input too short to produce any output frames."""


class FeatureError(VoxstatsError):
    """Clip rejected by the feature extraction preconditions."""


class TrainError(VoxstatsError):
    """Training data violates a classifier precondition."""


class PredictError(VoxstatsError):
    """Prediction input incompatible with the trained model."""


class ShapeError(VoxstatsError):
    """Tensor shape incompatible with a network layer."""


class BuildError(VoxstatsError):
    """Layer stack could not be assembled into a consistent shape chain."""
