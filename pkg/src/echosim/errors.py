"""Exception types shared across the engine."""


class EchosimError(Exception):
    """Base class for all engine errors."""


class ConfigError(EchosimError):
    """Invalid configuration value or combination (CLI exit code 2)."""


class ShapeError(EchosimError):
    """Input does not meet a length/shape precondition."""


class WavParseError(EchosimError):
    """Malformed or unsupported WAV data; message names the offending chunk."""


class EpisodeDoneError(EchosimError):
    """step() called on a finished episode."""


class BatchError(EchosimError):
    """A batch worker failed; message names the environment seed."""


class ComparisonError(EchosimError):
    """Benchmark reports are not comparable (mismatched configurations)."""
