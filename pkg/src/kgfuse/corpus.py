"""Relation-extraction corpus ingestion and preparation.

Handles the canonical JSONL record format
``{"id", "text", "e1_start", "e1_end", "e2_start", "e2_end", "label"}``
(character offsets, end-exclusive), a TSV loader for exports with
pre-inserted entity markers, deterministic marker insertion, triple
extraction from training documents, and the held-out-entity-pair split
used by the generalization harness.

Tokenization is frozen to whitespace plus punctuation splitting: a token
is either a maximal ``\\w+`` run or a single non-word non-space character.
Entity identity throughout the pipeline is the lowercased surface string.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, ParseError, ValidationError

log = logging.getLogger(__name__)

# Marker pair assignment is fixed: << >> always wraps e1, [[ ]] always
# wraps e2, regardless of which entity appears first in the text.
E1_OPEN, E1_CLOSE = "<<", ">>"
E2_OPEN, E2_CLOSE = "[[", "]]"
MARKER_TOKENS = (E1_OPEN, E1_CLOSE, E2_OPEN, E2_CLOSE)

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


def tokenize(text: str) -> list[str]:
    """Split text into word tokens and single punctuation tokens."""
    return _TOKEN_RE.findall(text)


def tokenize_with_spans(text: str) -> list[tuple[str, int, int]]:
    """Tokenize, returning (token, char_start, char_end) triples."""
    return [(m.group(), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


@dataclass
class RelationDocument:
    """One labeled example: a document, two entity spans, a relation label."""

    id: str
    text: str
    e1_span: tuple[int, int]
    e2_span: tuple[int, int]
    e1_text: str
    e2_text: str
    label: str

    def validate(self) -> None:
        """Check span bounds, non-overlap, and surface-text agreement."""
        n = len(self.text)
        for name, (start, end) in (("e1", self.e1_span), ("e2", self.e2_span)):
            if not (0 <= start < end <= n):
                raise ValidationError(
                    f"doc {self.id!r}: {name} span ({start}, {end}) out of bounds "
                    f"for text of length {n}"
                )
        s1, e1 = self.e1_span
        s2, e2 = self.e2_span
        if not (e1 <= s2 or e2 <= s1):
            raise ValidationError(f"doc {self.id!r}: entity spans overlap")
        if self.text[s1:e1] != self.e1_text:
            raise ValidationError(f"doc {self.id!r}: e1 span does not match e1 text")
        if self.text[s2:e2] != self.e2_text:
            raise ValidationError(f"doc {self.id!r}: e2 span does not match e2 text")

    def entity_pair(self) -> tuple[str, str]:
        """Directed (head, tail) identity pair: lowercased surface strings."""
        return (self.e1_text.lower(), self.e2_text.lower())


@dataclass
class MarkedDocument:
    """Token sequence with the four entity markers inserted."""

    id: str
    tokens: list[str]
    label: str
    head_entity: str  # lowercased e1 surface, the KG-facing identity
    tail_entity: str  # lowercased e2 surface


@dataclass
class SplitSpec:
    """Train/dev/test document lists with disjoint ids."""

    train: list[RelationDocument]
    dev: list[RelationDocument] = field(default_factory=list)
    test: list[RelationDocument] = field(default_factory=list)

    def validate(self) -> None:
        seen: dict[str, str] = {}
        for name, docs in (("train", self.train), ("dev", self.dev), ("test", self.test)):
            for d in docs:
                if d.id in seen and seen[d.id] != name:
                    raise ValidationError(
                        f"doc id {d.id!r} appears in both {seen[d.id]} and {name}"
                    )
                seen[d.id] = name


def _token_range_for_span(
    spans: list[tuple[str, int, int]], start: int, end: int, doc_id: str, name: str
) -> tuple[int, int]:
    """Indices [i, j) of tokens overlapping the char interval [start, end)."""
    idx = [i for i, (_, s, e) in enumerate(spans) if not (e <= start or s >= end)]
    if not idx:
        raise ValidationError(f"doc {doc_id!r}: {name} span contains no tokens")
    if idx != list(range(idx[0], idx[-1] + 1)):
        raise ValidationError(f"doc {doc_id!r}: {name} span maps to non-contiguous tokens")
    return idx[0], idx[-1] + 1


def insert_entity_markers(doc: RelationDocument) -> MarkedDocument:
    """Wrap e1 in << >> and e2 in [[ ]] at token level.

    All non-marker tokens are exactly ``tokenize(doc.text)``, so removing
    the four markers recovers the original tokenization.
    """
    doc.validate()
    spans = tokenize_with_spans(doc.text)
    r1 = _token_range_for_span(spans, *doc.e1_span, doc.id, "e1")
    r2 = _token_range_for_span(spans, *doc.e2_span, doc.id, "e2")
    if not (r1[1] <= r2[0] or r2[1] <= r1[0]):
        raise ValidationError(f"doc {doc.id!r}: entity token ranges intersect")

    tokens = [t for t, _, _ in spans]
    # Insert the later range first so earlier indices stay valid.
    inserts = sorted(
        [(r1, E1_OPEN, E1_CLOSE), (r2, E2_OPEN, E2_CLOSE)],
        key=lambda item: item[0][0],
        reverse=True,
    )
    for (i, j), opener, closer in inserts:
        tokens[j:j] = [closer]
        tokens[i:i] = [opener]
    return MarkedDocument(
        id=doc.id,
        tokens=tokens,
        label=doc.label,
        head_entity=doc.e1_text.lower(),
        tail_entity=doc.e2_text.lower(),
    )


def strip_markers(marked: MarkedDocument) -> list[str]:
    """Remove the four marker tokens, recovering the original tokenization."""
    return [t for t in marked.tokens if t not in MARKER_TOKENS]


def parse_re_dataset(path: str, format: str = "jsonl") -> list[RelationDocument]:
    """Load a relation-extraction split from a JSONL or TSV file.

    JSONL is the canonical format (explicit char offsets). TSV rows are
    ``id<TAB>text-with-markers<TAB>label``; the marked text is tokenized on
    whitespace, the four markers located and removed, and offsets recomputed
    against the single-space rejoin of the remaining tokens.
    """
    if format == "jsonl":
        return _parse_jsonl(path)
    if format == "tsv":
        return _parse_tsv(path)
    raise ConfigError(f"unknown dataset format {format!r} (expected 'jsonl' or 'tsv')")


_JSONL_FIELDS = ("id", "text", "e1_start", "e1_end", "e2_start", "e2_end", "label")


def _parse_jsonl(path: str) -> list[RelationDocument]:
    docs = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            for fld in _JSONL_FIELDS:
                if fld not in rec:
                    raise ParseError(f"{path}:{lineno}: missing field '{fld}'")
            text = rec["text"]
            doc = RelationDocument(
                id=str(rec["id"]),
                text=text,
                e1_span=(int(rec["e1_start"]), int(rec["e1_end"])),
                e2_span=(int(rec["e2_start"]), int(rec["e2_end"])),
                e1_text=text[int(rec["e1_start"]) : int(rec["e1_end"])],
                e2_text=text[int(rec["e2_start"]) : int(rec["e2_end"])],
                label=str(rec["label"]),
            )
            try:
                doc.validate()
            except ValidationError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from exc
            docs.append(doc)
    return docs


def _parse_tsv(path: str) -> list[RelationDocument]:
    docs = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) != 3:
                raise ParseError(f"{path}:{lineno}: expected 3 tab-separated columns, got {len(cols)}")
            doc_id, marked_text, label = cols
            try:
                doc = _document_from_marked_text(doc_id, marked_text, label)
            except DataError as exc:
                raise type(exc)(f"{path}:{lineno}: {exc}") from exc
            docs.append(doc)
    return docs


def _document_from_marked_text(doc_id: str, marked_text: str, label: str) -> RelationDocument:
    """Reverse marker insertion for whitespace-tokenized marked text."""
    tokens = marked_text.split()
    for marker in MARKER_TOKENS:
        count = tokens.count(marker)
        if count != 1:
            raise ParseError(f"marker {marker!r} occurs {count} times (expected exactly 1)")
    i1, j1 = tokens.index(E1_OPEN), tokens.index(E1_CLOSE)
    i2, j2 = tokens.index(E2_OPEN), tokens.index(E2_CLOSE)
    if not (i1 < j1 and i2 < j2) or not (j1 < i2 or j2 < i1):
        raise ParseError("entity markers are interleaved or reversed")

    plain: list[str] = []
    e1_idx: list[int] = []
    e2_idx: list[int] = []
    for k, tok in enumerate(tokens):
        if tok in MARKER_TOKENS:
            continue
        if i1 < k < j1:
            e1_idx.append(len(plain))
        if i2 < k < j2:
            e2_idx.append(len(plain))
        plain.append(tok)
    if not e1_idx or not e2_idx:
        raise ParseError("empty entity between markers")

    text = " ".join(plain)
    starts = []
    pos = 0
    for tok in plain:
        starts.append(pos)
        pos += len(tok) + 1
    span_of = lambda idx: (starts[idx[0]], starts[idx[-1]] + len(plain[idx[-1]]))
    e1_span, e2_span = span_of(e1_idx), span_of(e2_idx)
    doc = RelationDocument(
        id=doc_id,
        text=text,
        e1_span=e1_span,
        e2_span=e2_span,
        e1_text=text[e1_span[0] : e1_span[1]],
        e2_text=text[e2_span[0] : e2_span[1]],
        label=label,
    )
    doc.validate()
    return doc


def extract_triples(docs: list[RelationDocument]) -> list[tuple[str, str, str]]:
    """Project training documents onto (head, relation, tail) surface triples.

    One triple per document with a nonempty label; duplicates are retained
    (the KG deduplicates). Documents with empty labels are skipped and the
    skip count is logged. Call this on the training split only.
    """
    triples = []
    skipped = 0
    for doc in docs:
        if not doc.label:
            skipped += 1
            continue
        head, tail = doc.entity_pair()
        triples.append((head, doc.label, tail))
    if skipped:
        log.info("extract_triples: skipped %d documents with empty labels", skipped)
    return triples


def make_heldout_relation_split(
    docs: list[RelationDocument], holdout_fraction: float, seed: int
) -> tuple[list[RelationDocument], list[RelationDocument]]:
    """Partition docs so held-out entity pairs never reach KGE training.

    Distinct directed (head, tail) pairs are shuffled deterministically and
    a ``holdout_fraction`` share is assigned to the returned test list; the
    remaining documents form the KGE-training list. No pair appears on both
    sides.
    """
    if not (0.0 < holdout_fraction < 1.0):
        raise ConfigError(f"holdout_fraction must be in (0, 1), got {holdout_fraction}")
    pairs = sorted({d.entity_pair() for d in docs})
    if len(pairs) < 2:
        raise DataError(
            f"need at least 2 distinct entity pairs to hold out, got {len(pairs)}"
        )
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(pairs))
    n_hold = int(round(holdout_fraction * len(pairs)))
    n_hold = min(max(n_hold, 1), len(pairs) - 1)
    held = {pairs[i] for i in order[:n_hold]}
    kge_train = [d for d in docs if d.entity_pair() not in held]
    re_test = [d for d in docs if d.entity_pair() in held]
    return kge_train, re_test


def write_jsonl(path: str, docs: list[RelationDocument]) -> None:
    """Write documents in the canonical JSONL record format."""
    with open(path, "w", encoding="utf-8") as f:
        for d in docs:
            rec = {
                "id": d.id,
                "text": d.text,
                "e1_start": d.e1_span[0],
                "e1_end": d.e1_span[1],
                "e2_start": d.e2_span[0],
                "e2_end": d.e2_span[1],
                "label": d.label,
            }
            f.write(json.dumps(rec) + "\n")
