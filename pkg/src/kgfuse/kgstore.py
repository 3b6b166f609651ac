"""Indexed triple store over integer-encoded entities and relations.

Provides the vocabulary encoding, the deduplicated knowledge graph with a
(head, tail) pair index for filtered ranking, negative sampling against
graph membership, and the text serialization used by the CLI.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import ConfigError, FileFormatError, VocabularyError

NEG_STRATEGIES = ("corrupt_relation", "corrupt_entity", "mixed")

# mixed-strategy slot probabilities: relation, head, tail
DEFAULT_SLOT_PROBS = (0.5, 0.25, 0.25)


class Vocab:
    """Bijective string <-> dense id map, ids contiguous from 0.

    Built from the sorted set of strings so the assignment is a canonical
    function of the string set, independent of input ordering.
    """

    def __init__(self, strings: Iterable[str]):
        self._strings = sorted(set(strings))
        self._ids = {s: i for i, s in enumerate(self._strings)}

    def __len__(self) -> int:
        return len(self._strings)

    def __contains__(self, s: str) -> bool:
        return s in self._ids

    def id_of(self, s: str) -> int:
        try:
            return self._ids[s]
        except KeyError:
            raise VocabularyError(f"string {s!r} not in vocabulary") from None

    def string_of(self, i: int) -> str:
        return self._strings[i]

    @property
    def strings(self) -> list[str]:
        return list(self._strings)

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for s in self._strings:
                f.write(s + "\n")

    @classmethod
    def load(cls, path: str) -> "Vocab":
        with open(path, encoding="utf-8") as f:
            strings = [line.rstrip("\n") for line in f if line.rstrip("\n")]
        vocab = cls.__new__(cls)
        vocab._strings = strings
        vocab._ids = {s: i for i, s in enumerate(strings)}
        if sorted(vocab._ids.values()) != list(range(len(strings))):
            raise FileFormatError(f"{path}: duplicate vocabulary entries")
        return vocab


@dataclass(frozen=True)
class KnowledgeGraph:
    """Immutable deduplicated triple set with a (head, tail) -> relations index."""

    n_entities: int
    n_relations: int
    triples: frozenset[tuple[int, int, int]]
    pair_index: dict[tuple[int, int], frozenset[int]] = field(repr=False)

    def __len__(self) -> int:
        return len(self.triples)

    def contains(self, h: int, r: int, t: int) -> bool:
        return (h, r, t) in self.triples

    def relations_for(self, h: int, t: int) -> frozenset[int]:
        return self.pair_index.get((h, t), frozenset())

    def sorted_triples(self) -> list[tuple[int, int, int]]:
        """Triples in canonical (h, r, t) order, for deterministic iteration."""
        return sorted(self.triples)


def _make_kg(id_triples: Iterable[tuple[int, int, int]], n_entities: int, n_relations: int) -> KnowledgeGraph:
    triples = frozenset(id_triples)
    for h, r, t in triples:
        if not (0 <= h < n_entities and 0 <= t < n_entities):
            raise VocabularyError(f"entity id out of range in triple ({h}, {r}, {t})")
        if not (0 <= r < n_relations):
            raise VocabularyError(f"relation id out of range in triple ({h}, {r}, {t})")
    index: dict[tuple[int, int], set[int]] = {}
    for h, r, t in triples:
        index.setdefault((h, t), set()).add(r)
    pair_index = {pair: frozenset(rels) for pair, rels in index.items()}
    return KnowledgeGraph(
        n_entities=n_entities,
        n_relations=n_relations,
        triples=triples,
        pair_index=pair_index,
    )


def build_kg(
    surface_triples: Iterable[tuple[str, str, str]],
    entity_vocab: Vocab,
    relation_vocab: Vocab,
) -> KnowledgeGraph:
    """Encode surface triples through the vocabularies and deduplicate."""
    id_triples = [
        (entity_vocab.id_of(h), relation_vocab.id_of(r), entity_vocab.id_of(t))
        for h, r, t in surface_triples
    ]
    return _make_kg(id_triples, len(entity_vocab), len(relation_vocab))


def build_vocabs(surface_triples: Iterable[tuple[str, str, str]]) -> tuple[Vocab, Vocab]:
    """Entity and relation vocabularies covering the given surface triples."""
    triples = list(surface_triples)
    entities = [h for h, _, _ in triples] + [t for _, _, t in triples]
    relations = [r for _, r, _ in triples]
    return Vocab(entities), Vocab(relations)


@dataclass(frozen=True)
class NegativeSample:
    """A corrupted triple; ``flagged`` means no true negative was found."""

    triple: tuple[int, int, int]
    flagged: bool


def sample_negative(
    triple: tuple[int, int, int],
    kg: KnowledgeGraph,
    rng: np.random.Generator,
    strategy: str = "mixed",
    slot_probs: tuple[float, float, float] = DEFAULT_SLOT_PROBS,
    max_retries: int = 100,
) -> NegativeSample:
    """Corrupt exactly one slot of a triple into a non-edge of the graph.

    Retries up to ``max_retries`` times; if every candidate is a true triple
    the last candidate is returned flagged so the caller may skip it.
    """
    if strategy not in NEG_STRATEGIES:
        raise ConfigError(f"unknown negative sampling strategy {strategy!r}")
    if kg.n_entities < 2 or kg.n_relations < 2:
        raise ConfigError("negative sampling requires at least 2 entities and 2 relations")
    h, r, t = triple
    candidate = triple
    for _ in range(max_retries):
        if strategy == "corrupt_relation":
            slot = 0
        elif strategy == "corrupt_entity":
            slot = 1 + int(rng.integers(2))
        else:
            u = rng.random()
            slot = 0 if u < slot_probs[0] else (1 if u < slot_probs[0] + slot_probs[1] else 2)
        if slot == 0:
            candidate = (h, _draw_other(rng, kg.n_relations, r), t)
        elif slot == 1:
            candidate = (_draw_other(rng, kg.n_entities, h), r, t)
        else:
            candidate = (h, r, _draw_other(rng, kg.n_entities, t))
        if not kg.contains(*candidate):
            return NegativeSample(candidate, flagged=False)
    return NegativeSample(candidate, flagged=True)


def _draw_other(rng: np.random.Generator, n: int, exclude: int) -> int:
    """Uniform draw from range(n) excluding one value."""
    v = int(rng.integers(n - 1))
    return v + 1 if v >= exclude else v


def save_kg(path: str, kg: KnowledgeGraph) -> None:
    """Write the header + tab-separated id-triple text format."""
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"#entities {kg.n_entities}\n")
        f.write(f"#relations {kg.n_relations}\n")
        for h, r, t in kg.sorted_triples():
            f.write(f"{h}\t{r}\t{t}\n")


def load_kg(path: str) -> KnowledgeGraph:
    """Read the text format written by :func:`save_kg`."""
    with open(path, encoding="utf-8") as f:
        header_e = f.readline().split()
        header_r = f.readline().split()
        if len(header_e) != 2 or header_e[0] != "#entities":
            raise FileFormatError(f"{path}: missing '#entities N' header")
        if len(header_r) != 2 or header_r[0] != "#relations":
            raise FileFormatError(f"{path}: missing '#relations M' header")
        n_entities, n_relations = int(header_e[1]), int(header_r[1])
        triples = []
        for lineno, line in enumerate(f, 3):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise FileFormatError(f"{path}:{lineno}: expected 'h\\tr\\tt'")
            triples.append((int(parts[0]), int(parts[1]), int(parts[2])))
    return _make_kg(triples, n_entities, n_relations)
