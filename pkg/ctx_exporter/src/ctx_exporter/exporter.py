"""Batch inference over a marked corpus and CTXE serialization.

The encoder is frozen: no gradients, eval mode, first-position pooling
only. The output file format is:

    magic "CTXE" | u32 count | u32 dim | records
    record: u16 id byte length | id UTF-8 | dim little-endian f32

matching the external-embedding reader of the downstream pipeline.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field

import numpy as np
import torch

from .corpus import MARKER_TOKENS, CorpusDoc, mark_text, read_corpus
from .errors import ExportError, ExporterError, ModelLoadError

log = logging.getLogger(__name__)

_CTXE_MAGIC = b"CTXE"
_CTXE_HEADER = struct.Struct("<4sII")
_IDLEN = struct.Struct("<H")

# New embedding rows for the marker tokens are drawn after seeding the
# global torch generator, so repeated exports of the same corpus and
# model produce byte-identical files.
_RESIZE_SEED = 0


@dataclass
class ExportJob:
    """Everything one export run needs.

    Pooling is fixed to the first-position token vector; there is no
    mean-pooling alternative. The output dimension always equals the
    encoder's hidden size.
    """

    corpus_path: str
    model_name: str
    output_path: str
    batch_size: int = 32
    max_sequence_length: int = 128

    def validate(self) -> None:
        if self.batch_size < 1:
            raise ExporterError("batch_size must be >= 1")
        # room for [CLS], [SEP], and at least one marked token per entity
        if self.max_sequence_length < 8:
            raise ExporterError("max_sequence_length must be >= 8")


@dataclass
class ExportReport:
    """Outcome counters: what was written, truncated, or dropped."""

    written: int = 0
    dim: int = 0
    truncated_ids: list[str] = field(default_factory=list)
    skipped_ids: list[str] = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return not self.skipped_ids


def _load_encoder(model_name: str):
    from transformers import AutoModel, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(model_name)
        model = AutoModel.from_pretrained(model_name)
    except Exception as exc:
        raise ModelLoadError(f"cannot load encoder {model_name!r}: {exc}") from exc
    if not getattr(tokenizer, "is_fast", False):
        raise ModelLoadError(
            f"encoder {model_name!r} has no fast tokenizer; span-safe "
            "truncation needs character offset mappings"
        )
    added = tokenizer.add_special_tokens({"additional_special_tokens": list(MARKER_TOKENS)})
    if added:
        torch.manual_seed(_RESIZE_SEED)
        model.resize_token_embeddings(len(tokenizer))
    model.eval()
    return tokenizer, model


def _survives_truncation(encoding, spans: list[tuple[int, int]], max_len: int) -> bool:
    """True when head truncation to max_len keeps both marked segments.

    Token i of the untruncated sequence survives iff i <= max_len - 2:
    truncation keeps the leading tokens and re-appends the final
    separator. Special tokens carry (0, 0) offsets and never overlap.
    """
    last = 0
    for i, (a, b) in enumerate(encoding["offset_mapping"]):
        if b <= a:
            continue
        for s, e in spans:
            if a < e and b > s:
                last = max(last, i)
    return last <= max_len - 2


def _first_position_vectors(model, tokenizer, texts: list[str], max_len: int) -> np.ndarray:
    enc = tokenizer(
        texts,
        return_tensors="pt",
        padding=True,
        truncation=True,
        max_length=max_len,
    )
    with torch.no_grad():
        out = model(input_ids=enc["input_ids"], attention_mask=enc["attention_mask"])
    vecs = out.last_hidden_state[:, 0, :].to(torch.float32).numpy()
    if not np.isfinite(vecs).all():
        raise ExportError("encoder produced non-finite values")
    return vecs


def write_ctxe(path: str, ids: list[str], matrix: np.ndarray) -> None:
    """Serialize vectors in corpus order from a single writer."""
    dim = int(matrix.shape[1]) if matrix.ndim == 2 else 0
    with open(path, "wb") as f:
        f.write(_CTXE_HEADER.pack(_CTXE_MAGIC, len(ids), dim))
        for doc_id, vec in zip(ids, matrix):
            encoded = doc_id.encode("utf-8")
            if len(encoded) > 0xFFFF:
                raise ExportError(f"document id too long to serialize: {doc_id[:32]!r}...")
            f.write(_IDLEN.pack(len(encoded)))
            f.write(encoded)
            f.write(np.asarray(vec, dtype="<f4").tobytes())


def export_embeddings(job: ExportJob) -> ExportReport:
    """Run the frozen encoder over the corpus and write the CTXE file.

    Documents longer than the length budget are head-truncated and their
    ids logged; a document whose marked-entity segments would be cut is
    skipped instead, logged, and counted in the report. An empty corpus
    yields a header-only file.
    """
    job.validate()
    docs = read_corpus(job.corpus_path)
    tokenizer, model = _load_encoder(job.model_name)
    dim = int(model.config.hidden_size)
    report = ExportReport(dim=dim)

    kept: list[CorpusDoc] = []
    texts: list[str] = []
    for doc in docs:
        marked, spans = mark_text(doc)
        probe = tokenizer(marked, return_offsets_mapping=True, truncation=False)
        if len(probe["input_ids"]) > job.max_sequence_length:
            if not _survives_truncation(probe, spans, job.max_sequence_length):
                log.warning("skipping %s: an entity span crosses the length budget", doc.id)
                report.skipped_ids.append(doc.id)
                continue
            log.info("truncating %s to %d tokens", doc.id, job.max_sequence_length)
            report.truncated_ids.append(doc.id)
        kept.append(doc)
        texts.append(marked)

    rows = []
    for start in range(0, len(texts), job.batch_size):
        batch = texts[start : start + job.batch_size]
        rows.append(_first_position_vectors(model, tokenizer, batch, job.max_sequence_length))
    matrix = np.concatenate(rows, axis=0) if rows else np.zeros((0, dim), dtype=np.float32)
    if matrix.shape[1] != dim:
        raise ExportError(f"encoder emitted dim {matrix.shape[1]}, config says {dim}")

    write_ctxe(job.output_path, [d.id for d in kept], matrix)
    report.written = len(kept)
    return report
