"""Contextual document vectors: a builtin trainable encoder or external lookup.

The builtin encoder mean-pools a trainable V x d table over hashed tokens
(FNV-1a of the lowercased token, V = 2^16 by default); markers are hashed
like any other token so entity positions reach the representation. The
external mode serves vectors precomputed by any pretrained encoder from
the "CTXE" file format:

    magic "CTXE" | u32 count | u32 dim | records
    record: u16 id-length | UTF-8 id bytes | dim little-endian f32
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .corpus import MarkedDocument
from .errors import ConfigError, FileFormatError, MissingEmbeddingError

DEFAULT_DIM = 128
DEFAULT_VOCAB_SIZE = 1 << 16

_FNV_OFFSET = 2166136261
_FNV_PRIME = 16777619


def fnv1a(token: str) -> int:
    """32-bit FNV-1a of the lowercased token's UTF-8 bytes."""
    h = _FNV_OFFSET
    for byte in token.lower().encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & 0xFFFFFFFF
    return h


@dataclass
class EmbeddingTable:
    """Externally computed id -> vector map."""

    dim: int
    vectors: dict[str, np.ndarray] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.vectors)

    def lookup(self, doc_id: str) -> np.ndarray:
        try:
            return self.vectors[doc_id]
        except KeyError:
            raise MissingEmbeddingError(f"no embedding for document id {doc_id!r}") from None


@dataclass
class ContextEncoder:
    """Produces the d_c document vector, from the builtin table or a file."""

    mode: str  # "builtin" | "external"
    dim: int
    token_emb: np.ndarray | None = None  # builtin: (vocab_size, dim)
    table: EmbeddingTable | None = None  # external

    @property
    def vocab_size(self) -> int:
        return 0 if self.token_emb is None else self.token_emb.shape[0]

    def token_ids(self, doc: MarkedDocument) -> np.ndarray:
        return np.array([fnv1a(t) % self.vocab_size for t in doc.tokens], dtype=np.int64)


def builtin_encoder(
    rng: np.random.Generator,
    dim: int = DEFAULT_DIM,
    vocab_size: int = DEFAULT_VOCAB_SIZE,
    init_scale: float | None = None,
) -> ContextEncoder:
    """Trainable hashed-token encoder with uniform(-s, s) initialization."""
    if init_scale is None:
        init_scale = 0.5 / np.sqrt(dim)
    emb = rng.uniform(-init_scale, init_scale, size=(vocab_size, dim))
    return ContextEncoder(mode="builtin", dim=dim, token_emb=emb)


def external_encoder(table: EmbeddingTable) -> ContextEncoder:
    return ContextEncoder(mode="external", dim=table.dim, table=table)


def encode_document(enc: ContextEncoder, doc: MarkedDocument) -> np.ndarray:
    """The document's contextual vector H_c.

    Builtin mode returns the mean embedding of the hashed tokens (marker
    tokens included); external mode looks the document id up in the table.
    Pure in (encoder parameters, doc); order-free by construction in
    builtin mode since mean pooling ignores token positions.
    """
    if enc.mode == "external":
        return enc.table.lookup(doc.id)
    if not doc.tokens:
        raise ConfigError(f"document {doc.id!r} has no tokens")
    return enc.token_emb[enc.token_ids(doc)].mean(axis=0)


# ---------------------------------------------------------------------------
# CTXE file format

_CTXE_MAGIC = b"CTXE"
_CTXE_HEADER = struct.Struct("<4sII")
_IDLEN = struct.Struct("<H")


def write_embeddings(path: str, table: EmbeddingTable) -> None:
    """Write an EmbeddingTable as a CTXE file (ids in insertion order)."""
    with open(path, "wb") as f:
        f.write(_CTXE_HEADER.pack(_CTXE_MAGIC, len(table.vectors), table.dim))
        for doc_id, vec in table.vectors.items():
            encoded = doc_id.encode("utf-8")
            if len(encoded) > 0xFFFF:
                raise ConfigError(f"document id too long to serialize: {doc_id[:32]!r}...")
            if vec.shape != (table.dim,):
                raise ConfigError(f"vector for {doc_id!r} has shape {vec.shape}, expected ({table.dim},)")
            f.write(_IDLEN.pack(len(encoded)))
            f.write(encoded)
            f.write(np.asarray(vec, dtype="<f4").tobytes())


def load_external_embeddings(path: str) -> EmbeddingTable:
    """Load a CTXE file, validating structure and finiteness.

    Errors name the byte offset of the violation: bad magic, truncated
    record, or non-finite vector entries.
    """
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < _CTXE_HEADER.size:
        raise FileFormatError(f"{path}: truncated header at byte 0")
    magic, count, dim = _CTXE_HEADER.unpack_from(data, 0)
    if magic != _CTXE_MAGIC:
        raise FileFormatError(f"{path}: bad magic {magic!r} at byte 0 (expected {_CTXE_MAGIC!r})")
    table = EmbeddingTable(dim=dim)
    offset = _CTXE_HEADER.size
    vec_bytes = dim * 4
    for i in range(count):
        if offset + _IDLEN.size > len(data):
            raise FileFormatError(f"{path}: truncated record {i} at byte {offset}")
        (id_len,) = _IDLEN.unpack_from(data, offset)
        offset += _IDLEN.size
        if offset + id_len + vec_bytes > len(data):
            raise FileFormatError(f"{path}: truncated record {i} at byte {offset}")
        doc_id = data[offset : offset + id_len].decode("utf-8")
        offset += id_len
        vec = np.frombuffer(data, dtype="<f4", count=dim, offset=offset).astype(np.float64)
        if not np.all(np.isfinite(vec)):
            raise FileFormatError(f"{path}: non-finite value in record {doc_id!r} at byte {offset}")
        offset += vec_bytes
        table.vectors[doc_id] = vec
    if offset != len(data):
        raise FileFormatError(f"{path}: {len(data) - offset} trailing bytes at byte {offset}")
    return table


def inspect_ctxe_header(path: str) -> dict:
    with open(path, "rb") as f:
        raw = f.read(_CTXE_HEADER.size)
    if len(raw) < _CTXE_HEADER.size:
        raise FileFormatError(f"{path}: truncated header at byte 0")
    magic, count, dim = _CTXE_HEADER.unpack(raw)
    if magic != _CTXE_MAGIC:
        raise FileFormatError(f"{path}: bad magic {magic!r} at byte 0")
    return {"magic": _CTXE_MAGIC.decode(), "count": count, "dim": dim}


# builtin encoder checkpoint: magic "ENCB", u32 vocab, u32 dim, f32 matrix

_ENCB_MAGIC = b"ENCB"
_ENCB_HEADER = struct.Struct("<4sII")


def save_builtin_encoder(path: str, enc: ContextEncoder) -> None:
    if enc.mode != "builtin":
        raise ConfigError("only builtin encoders have trainable parameters to save")
    with open(path, "wb") as f:
        f.write(_ENCB_HEADER.pack(_ENCB_MAGIC, enc.vocab_size, enc.dim))
        f.write(enc.token_emb.astype("<f4").tobytes())


def inspect_encb_header(path: str) -> dict:
    with open(path, "rb") as f:
        raw = f.read(_ENCB_HEADER.size)
    if len(raw) < _ENCB_HEADER.size:
        raise FileFormatError(f"{path}: truncated header")
    magic, vocab, dim = _ENCB_HEADER.unpack(raw)
    if magic != _ENCB_MAGIC:
        raise FileFormatError(f"{path}: bad magic {magic!r}")
    return {"magic": _ENCB_MAGIC.decode(), "vocab_size": vocab, "dim": dim}


def load_builtin_encoder(path: str) -> ContextEncoder:
    with open(path, "rb") as f:
        raw = f.read(_ENCB_HEADER.size)
        if len(raw) < _ENCB_HEADER.size:
            raise FileFormatError(f"{path}: truncated header")
        magic, vocab, dim = _ENCB_HEADER.unpack(raw)
        if magic != _ENCB_MAGIC:
            raise FileFormatError(f"{path}: bad magic {magic!r} (expected {_ENCB_MAGIC!r})")
        body = f.read(vocab * dim * 4)
    if len(body) != vocab * dim * 4:
        raise FileFormatError(f"{path}: truncated embedding matrix")
    emb = np.frombuffer(body, dtype="<f4").astype(np.float64).reshape(vocab, dim)
    return ContextEncoder(mode="builtin", dim=dim, token_emb=emb)
