"""Synthetic corpora and graphs with controllable signal routing.

The generator assigns every entity a type and derives a relation for each
ordered type pair from a table built so that no additive function of the
two entities alone can reproduce it (it always contains a 2x2 sub-table
with the same two relations swapped across the diagonal, the classic XOR
pattern). Documents then come in two kinds:

* pair-determined: the label is the table relation of the entity pair and
  the surrounding context is pure noise, so only a model that consults
  pair-level knowledge can classify them;
* context-determined: the label is uniform random and a matching cue
  token appears in the context, so a bag-of-words encoder can classify
  them and the pair carries no signal.

The two kinds draw their entity pairs from disjoint pools. Context
documents relabel their pairs at random, which turns those pairs into
multi-relation noise once triples are extracted; keeping them off the
pair-determined pool means each pair-determined pair maps to exactly one
relation in the extracted graph, so the two signal routes stay separable.

Two small benchmark graphs accompany the corpus generator: a block graph
whose relation is a function of the endpoint types, and a graph mixing a
symmetric relation with a forward/backward inverse pair, which separates
scoring families that can and cannot represent antisymmetry.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .corpus import RelationDocument, SplitSpec
from .errors import ConfigError, DataError


@dataclass
class SyntheticConfig:
    n_entity_types: int = 4
    n_relations: int = 4
    n_entities: int = 40
    n_pairs: int = 300
    n_context_pairs: int = 300
    n_docs: int = 1500
    pair_determined_fraction: float = 0.75
    noise_vocab: int = 200
    train_fraction: float = 0.7
    dev_fraction: float = 0.15
    seed: int = 0

    def validate(self) -> None:
        if self.n_entity_types < 2:
            raise ConfigError("need at least 2 entity types")
        if self.n_relations < 2:
            raise ConfigError("need at least 2 relations")
        if self.n_entities < self.n_entity_types:
            raise ConfigError("need at least one entity per type")
        max_pairs = self.n_entities * (self.n_entities - 1)
        if not (1 <= self.n_pairs <= max_pairs):
            raise ConfigError(f"n_pairs must be in [1, {max_pairs}]")
        if self.n_context_pairs < 0 or self.n_pairs + self.n_context_pairs > max_pairs:
            raise ConfigError(
                f"n_pairs + n_context_pairs must be at most {max_pairs} distinct pairs"
            )
        if self.n_docs < self.n_pairs + 10:
            raise ConfigError("n_docs must exceed n_pairs by at least 10")
        if not (0.0 <= self.pair_determined_fraction <= 1.0):
            raise ConfigError("pair_determined_fraction must be in [0, 1]")
        if self.pair_determined_fraction < 1.0 and self.n_context_pairs == 0:
            raise ConfigError("context-determined docs need n_context_pairs > 0")
        if self.noise_vocab < 2:
            raise ConfigError("noise_vocab must be >= 2")
        if not (0.0 < self.train_fraction < 1.0) or not (0.0 <= self.dev_fraction < 1.0):
            raise ConfigError("split fractions out of range")
        if self.train_fraction + self.dev_fraction >= 1.0:
            raise ConfigError("train_fraction + dev_fraction must leave room for test")


def _has_xor_cell(table: np.ndarray) -> bool:
    """True if some 2x2 sub-table is [[a, b], [b, a]] with a != b."""
    t = table.shape[0]
    for i in range(t):
        for i2 in range(i + 1, t):
            for j in range(t):
                for j2 in range(j + 1, t):
                    a, b = table[i, j], table[i, j2]
                    if a != b and table[i2, j] == b and table[i2, j2] == a:
                        return True
    return False


def make_pair_table(n_types: int, n_relations: int, rng: np.random.Generator) -> np.ndarray:
    """Random (type, type) -> relation table covering every relation.

    Built as sigma[(rho[i] + kappa[j]) mod R]: additive structure modulo R
    plus wraparound, which guarantees XOR sub-tables when rho and kappa
    are permutations (the T == R default). Other shapes are resampled
    until the coverage and XOR properties hold.
    """
    for _ in range(200):
        if n_types == n_relations:
            rho = rng.permutation(n_relations)
            kappa = rng.permutation(n_relations)
        else:
            rho = rng.integers(0, n_relations, size=n_types)
            kappa = rng.integers(0, n_relations, size=n_types)
        sigma = rng.permutation(n_relations)
        table = sigma[(rho[:, None] + kappa[None, :]) % n_relations]
        if len(np.unique(table)) == n_relations and _has_xor_cell(table):
            return table
    raise DataError(
        f"could not build a usable pair table for {n_types} types / {n_relations} relations"
    )


def _sample_ordered_pairs(n: int, k: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """k distinct ordered pairs (h, t), h != t, from n items."""
    flat = rng.choice(n * (n - 1), size=k, replace=False)
    pairs = []
    for idx in np.sort(flat):
        h, rem = divmod(int(idx), n - 1)
        t = rem if rem < h else rem + 1
        pairs.append((h, t))
    return pairs


def _noise_run(rng: np.random.Generator, noise_vocab: int, lo: int = 1, hi: int = 5) -> list[str]:
    k = int(rng.integers(lo, hi + 1))
    return [f"w{int(v):03d}" for v in rng.integers(0, noise_vocab, size=k)]


def _compose_doc(
    doc_id: str,
    head: str,
    tail: str,
    label: str,
    rng: np.random.Generator,
    noise_vocab: int,
    cue: str | None,
) -> RelationDocument:
    pre = _noise_run(rng, noise_vocab)
    mid = _noise_run(rng, noise_vocab)
    post = _noise_run(rng, noise_vocab)
    if cue is not None:
        run = (pre, mid, post)[int(rng.integers(3))]
        run.insert(int(rng.integers(len(run) + 1)), cue)
    tokens = pre + [head] + mid + [tail] + post
    head_idx = len(pre)
    tail_idx = head_idx + 1 + len(mid)
    starts = []
    pos = 0
    for tok in tokens:
        starts.append(pos)
        pos += len(tok) + 1
    doc = RelationDocument(
        id=doc_id,
        text=" ".join(tokens),
        e1_span=(starts[head_idx], starts[head_idx] + len(head)),
        e2_span=(starts[tail_idx], starts[tail_idx] + len(tail)),
        e1_text=head,
        e2_text=tail,
        label=label,
    )
    doc.validate()
    return doc


@dataclass
class SyntheticCorpus:
    split: SplitSpec
    manifest: dict = field(default_factory=dict)


def generate_corpus(cfg: SyntheticConfig) -> SyntheticCorpus:
    """Build a train/dev/test corpus plus a ground-truth manifest.

    Every sampled entity pair gets one pair-determined training document,
    so the graph built from training triples covers the pairs the test
    split asks about; remaining documents are spread across splits.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    n_t = cfg.n_entity_types
    entities = [f"ent{k:03d}" for k in range(cfg.n_entities)]
    etype = [k % n_t for k in range(cfg.n_entities)]
    relations = [f"rel{m}" for m in range(cfg.n_relations)]
    table = make_pair_table(n_t, cfg.n_relations, rng)
    all_pairs = _sample_ordered_pairs(cfg.n_entities, cfg.n_pairs + cfg.n_context_pairs, rng)
    pool_split = rng.permutation(len(all_pairs))
    pairs = [all_pairs[i] for i in sorted(pool_split[: cfg.n_pairs])]
    context_pairs = [all_pairs[i] for i in sorted(pool_split[cfg.n_pairs :])]

    counter = 0

    def next_id() -> str:
        nonlocal counter
        counter += 1
        return f"doc{counter:06d}"

    def pair_label(h: int, t: int) -> str:
        return relations[int(table[etype[h], etype[t]])]

    # Coverage block: one pair-determined training doc per pair.
    train: list[RelationDocument] = []
    kinds: dict[str, str] = {}
    for h, t in pairs:
        doc = _compose_doc(
            next_id(), entities[h], entities[t], pair_label(h, t), rng, cfg.noise_vocab, cue=None
        )
        train.append(doc)
        kinds[doc.id] = "pair"

    rest: list[RelationDocument] = []
    for _ in range(cfg.n_docs - cfg.n_pairs):
        if rng.random() < cfg.pair_determined_fraction:
            h, t = pairs[int(rng.integers(len(pairs)))]
            label, cue, kind = pair_label(h, t), None, "pair"
        else:
            h, t = context_pairs[int(rng.integers(len(context_pairs)))]
            label = relations[int(rng.integers(cfg.n_relations))]
            cue, kind = f"cue{label}", "context"
        doc = _compose_doc(next_id(), entities[h], entities[t], label, rng, cfg.noise_vocab, cue)
        rest.append(doc)
        kinds[doc.id] = kind

    order = rng.permutation(len(rest))
    n_train_extra = int(round(cfg.train_fraction * len(rest)))
    n_dev = int(round(cfg.dev_fraction * len(rest)))
    n_dev = max(1, min(n_dev, len(rest) - n_train_extra - 1))
    train += [rest[i] for i in order[:n_train_extra]]
    dev = [rest[i] for i in order[n_train_extra : n_train_extra + n_dev]]
    test = [rest[i] for i in order[n_train_extra + n_dev :]]
    if not dev or not test:
        raise ConfigError("split fractions leave an empty dev or test split")
    split = SplitSpec(train=train, dev=dev, test=test)
    split.validate()

    def kind_counts(docs: list[RelationDocument]) -> dict[str, int]:
        out = {"pair": 0, "context": 0}
        for d in docs:
            out[kinds[d.id]] += 1
        return out

    manifest = {
        "seed": cfg.seed,
        "n_entity_types": n_t,
        "n_relations": cfg.n_relations,
        "n_entities": cfg.n_entities,
        "n_pairs": cfg.n_pairs,
        "n_context_pairs": cfg.n_context_pairs,
        "n_docs": cfg.n_docs,
        "pair_determined_fraction": cfg.pair_determined_fraction,
        "noise_vocab": cfg.noise_vocab,
        "relations": relations,
        "entity_types": {entities[k]: etype[k] for k in range(cfg.n_entities)},
        "pair_table": table.tolist(),
        "pairs": [[entities[h], entities[t], pair_label(h, t)] for h, t in pairs],
        "context_pairs": [[entities[h], entities[t]] for h, t in context_pairs],
        "doc_kind": kinds,
        "split_sizes": {"train": len(train), "dev": len(dev), "test": len(test)},
        "kind_counts": {
            "train": kind_counts(train),
            "dev": kind_counts(dev),
            "test": kind_counts(test),
        },
    }
    return SyntheticCorpus(split=split, manifest=manifest)


def write_manifest(path: str, corpus: SyntheticCorpus) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(corpus.manifest, f, indent=2, sort_keys=True)
        f.write("\n")


# ---------------------------------------------------------------------------
# benchmark graphs


def block_kg(
    n_entities: int = 40,
    n_types: int = 4,
    n_pairs: int = 300,
    seed: int = 0,
) -> list[tuple[str, str, str]]:
    """Graph whose relation is a pure function of the endpoint types.

    Fully consistent and low-rank, so a capable scoring family should
    reach near-perfect relation ranking on its own training triples.
    """
    rng = np.random.default_rng(seed)
    entities = [f"ent{k:03d}" for k in range(n_entities)]
    etype = [k % n_types for k in range(n_entities)]
    table = make_pair_table(n_types, n_types, rng)
    pairs = _sample_ordered_pairs(n_entities, n_pairs, rng)
    return [
        (entities[h], f"rel{int(table[etype[h], etype[t]])}", entities[t]) for h, t in pairs
    ]


def antisymmetry_kg(
    n_entities: int = 30,
    n_sym_pairs: int = 60,
    n_dir_pairs: int = 60,
    seed: int = 0,
) -> list[tuple[str, str, str]]:
    """Graph mixing a symmetric relation with an inverse relation pair.

    Symmetric pairs appear in both directions under ``rsym``; directional
    pairs appear as (a, rfwd, b) and (b, rbwd, a). A scoring family that
    cannot tell a relation from its inverse, or cannot represent a
    symmetric relation without collapsing entities, loses ranking
    accuracy here.
    """
    rng = np.random.default_rng(seed)
    n_slots = n_entities * (n_entities - 1) // 2
    if n_sym_pairs + n_dir_pairs > n_slots:
        raise ConfigError(f"requested {n_sym_pairs + n_dir_pairs} pairs, only {n_slots} available")
    flat = rng.choice(n_slots, size=n_sym_pairs + n_dir_pairs, replace=False)
    combos = []
    for idx in np.sort(flat):
        # decode index into the (a < b) combination at that position
        a = 0
        idx = int(idx)
        row = n_entities - 1
        while idx >= row:
            idx -= row
            a += 1
            row -= 1
        combos.append((a, a + 1 + idx))
    order = rng.permutation(len(combos))
    ents = [f"ent{k:03d}" for k in range(n_entities)]
    triples: list[tuple[str, str, str]] = []
    for pos in order[:n_sym_pairs]:
        a, b = combos[int(pos)]
        triples.append((ents[a], "rsym", ents[b]))
        triples.append((ents[b], "rsym", ents[a]))
    for pos in order[n_sym_pairs:]:
        a, b = combos[int(pos)]
        triples.append((ents[a], "rfwd", ents[b]))
        triples.append((ents[b], "rbwd", ents[a]))
    return triples
