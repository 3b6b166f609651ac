"""Frozen-encoder embedding exporter for relation corpora."""

from .corpus import MARKER_TOKENS, CorpusDoc, mark_text, read_corpus
from .errors import CorpusError, ExporterError, ExportError, ModelLoadError
from .exporter import ExportJob, ExportReport, export_embeddings, write_ctxe

__version__ = "0.1.0"

__all__ = [
    "MARKER_TOKENS",
    "CorpusDoc",
    "mark_text",
    "read_corpus",
    "CorpusError",
    "ExporterError",
    "ExportError",
    "ModelLoadError",
    "ExportJob",
    "ExportReport",
    "export_embeddings",
    "write_ctxe",
    "__version__",
]
