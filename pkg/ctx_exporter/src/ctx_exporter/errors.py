"""Exception hierarchy for the exporter."""


class ExporterError(Exception):
    """Base class for everything this package raises on purpose."""


class CorpusError(ExporterError):
    """Corpus file missing, malformed, or violating record invariants."""


class ModelLoadError(ExporterError):
    """The named encoder or its tokenizer could not be loaded."""


class ExportError(ExporterError):
    """Inference or serialization failed after inputs validated."""
