"""Corpus reading and entity-marker insertion.

Input is JSONL, one record per line, with the fields
``{"id", "text", "e1_start", "e1_end", "e2_start", "e2_end", "label"}``
and end-exclusive character offsets. The first entity is wrapped in
``<< >>`` and the second in ``[[ ]]``, whichever order they appear in
the text; the marker pair assignment follows the entity role, not the
position.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import CorpusError

E1_OPEN, E1_CLOSE = "<<", ">>"
E2_OPEN, E2_CLOSE = "[[", "]]"
MARKER_TOKENS = (E1_OPEN, E1_CLOSE, E2_OPEN, E2_CLOSE)

_FIELDS = ("id", "text", "e1_start", "e1_end", "e2_start", "e2_end", "label")


@dataclass
class CorpusDoc:
    """One input record: a document with two entity character spans."""

    id: str
    text: str
    e1_span: tuple[int, int]
    e2_span: tuple[int, int]
    label: str

    def validate(self) -> None:
        n = len(self.text)
        for name, (start, end) in (("e1", self.e1_span), ("e2", self.e2_span)):
            if not (0 <= start < end <= n):
                raise CorpusError(
                    f"doc {self.id!r}: {name} span ({start}, {end}) out of bounds "
                    f"for text of length {n}"
                )
        s1, e1 = self.e1_span
        s2, e2 = self.e2_span
        if not (e1 <= s2 or e2 <= s1):
            raise CorpusError(f"doc {self.id!r}: entity spans overlap")


def read_corpus(path: str) -> list[CorpusDoc]:
    """Parse and validate a JSONL corpus file.

    Ids must be unique: the output file promises exactly one vector per
    corpus id, so a duplicate is a hard error, not a last-wins overwrite.
    """
    docs = []
    seen: set[str] = set()
    try:
        f = open(path, encoding="utf-8")
    except OSError as exc:
        raise CorpusError(f"cannot read corpus {path}: {exc}") from exc
    with f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            missing = [k for k in _FIELDS if k not in rec]
            if missing:
                raise CorpusError(f"{path}:{lineno}: missing fields {missing}")
            doc = CorpusDoc(
                id=str(rec["id"]),
                text=rec["text"],
                e1_span=(int(rec["e1_start"]), int(rec["e1_end"])),
                e2_span=(int(rec["e2_start"]), int(rec["e2_end"])),
                label=str(rec["label"]),
            )
            doc.validate()
            if doc.id in seen:
                raise CorpusError(f"{path}:{lineno}: duplicate document id {doc.id!r}")
            seen.add(doc.id)
            docs.append(doc)
    return docs


def mark_text(doc: CorpusDoc) -> tuple[str, list[tuple[int, int]]]:
    """Insert the four markers; return the marked text and span intervals.

    The returned intervals are the character ranges, in the marked text,
    of the two marked-entity segments including their markers. Truncation
    must never cut into either interval.
    """
    (s1, e1), (s2, e2) = doc.e1_span, doc.e2_span
    text = doc.text
    if e1 <= s2:
        marked = (
            text[:s1] + E1_OPEN + " " + text[s1:e1] + " " + E1_CLOSE
            + text[e1:s2] + E2_OPEN + " " + text[s2:e2] + " " + E2_CLOSE + text[e2:]
        )
        first = (s1, e1 + 6)
        second = (s2 + 6, e2 + 12)
    else:
        marked = (
            text[:s2] + E2_OPEN + " " + text[s2:e2] + " " + E2_CLOSE
            + text[e2:s1] + E1_OPEN + " " + text[s1:e1] + " " + E1_CLOSE + text[e1:]
        )
        first = (s2, e2 + 6)
        second = (s1 + 6, e1 + 12)
    return marked, [first, second]
