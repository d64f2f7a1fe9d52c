"""Exception types shared across the package.

The CLI maps these onto stable exit codes, so new failure modes should
reuse an existing class where the meaning fits.
"""


class KgmetaError(Exception):
    """Base class for all library errors."""


class DimensionError(KgmetaError):
    """Operand shapes are inconsistent; the message names the operand."""


class EvaluationError(KgmetaError):
    """A numeric evaluation produced a non-finite or unusable value."""


class UnknownIdError(KgmetaError):
    """An entity or relation id does not resolve in the vocabulary."""


class CannotCorruptError(KgmetaError):
    """Negative sampling is impossible (fewer than two entities)."""


class ConfigError(KgmetaError):
    """A configuration value is missing, malformed, or inconsistent."""


class CorpusParseError(KgmetaError):
    """A corpus, triple, split, or support file failed to parse."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f" [{path}" + (f":{line}" if line is not None else "") + "]"
        super().__init__(message + where)


class DataError(KgmetaError):
    """Input data violates a contract (bad label, empty class, ...)."""


class SamplingError(KgmetaError):
    """No episode can be sampled under the requested shape."""


class EncodingError(KgmetaError):
    """A sentence cannot be encoded (empty token sequence)."""


class OverlapError(KgmetaError):
    """Train and test task ids overlap."""
