"""Exception hierarchy shared across the pipeline.

The CLI maps these onto process exit codes: ConfigError -> 2,
DataError (and subclasses) -> 3, NumericError -> 4.
"""


class KgfuseError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(KgfuseError):
    """Invalid configuration value or malformed config file."""


class DataError(KgfuseError):
    """Problem with input data (parsing, validation, vocabulary, lookup)."""


class ParseError(DataError):
    """Malformed record in a dataset file; message names field and line."""


class ValidationError(DataError):
    """Record parsed but violates an invariant (span bounds, overlap, ...)."""


class VocabularyError(DataError):
    """Surface string not covered by the entity/relation vocabulary."""


class MissingEmbeddingError(DataError):
    """External embedding table has no vector for a requested id."""


class FileFormatError(DataError):
    """Binary or text artifact file does not match its declared format."""


class NumericError(KgfuseError):
    """Numerical failure (divergence, NaN parameters) during training."""
