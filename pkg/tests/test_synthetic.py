"""Synthetic corpus generator and benchmark graph tests."""

import numpy as np
import pytest

from kgfuse.corpus import extract_triples
from kgfuse.errors import ConfigError, DataError
from kgfuse.synthetic import (
    SyntheticConfig,
    _has_xor_cell,
    antisymmetry_kg,
    block_kg,
    generate_corpus,
    make_pair_table,
)


def _small_cfg(**overrides):
    base = dict(
        n_entity_types=4,
        n_relations=4,
        n_entities=16,
        n_pairs=30,
        n_context_pairs=30,
        n_docs=200,
        pair_determined_fraction=0.5,
        noise_vocab=50,
        seed=0,
    )
    base.update(overrides)
    return SyntheticConfig(**base)


# ---------------------------------------------------------------------------
# pair table


def test_xor_cell_detection():
    assert _has_xor_cell(np.array([[0, 1], [1, 0]]))
    assert not _has_xor_cell(np.array([[0, 1], [0, 1]]))  # column-determined
    assert not _has_xor_cell(np.array([[2, 2], [2, 2]]))
    # the crossing needs non-adjacent rows and columns here
    spread = np.array([[0, 9, 1], [9, 9, 9], [1, 9, 0]])
    assert _has_xor_cell(spread)


def test_pair_table_covers_all_relations_and_crosses():
    for seed in range(5):
        rng = np.random.default_rng(seed)
        table = make_pair_table(4, 4, rng)
        assert table.shape == (4, 4)
        assert set(np.unique(table)) == set(range(4))
        assert _has_xor_cell(table)


def test_pair_table_rectangular_shapes():
    rng = np.random.default_rng(1)
    table = make_pair_table(6, 4, rng)
    assert table.shape == (6, 6)
    assert set(np.unique(table)) == set(range(4))
    assert _has_xor_cell(table)


def test_pair_table_impossible_shape_raises():
    # a 2x2 table cannot cover 5 relations
    with pytest.raises(DataError):
        make_pair_table(2, 5, np.random.default_rng(0))


def test_pair_table_no_row_or_column_determines_the_relation():
    """An XOR cell means neither endpoint type alone fixes the relation."""
    table = make_pair_table(4, 4, np.random.default_rng(3))
    t = table.shape[0]
    found = False
    for i in range(t):
        for i2 in range(i + 1, t):
            for j in range(t):
                for j2 in range(j + 1, t):
                    a, b = table[i, j], table[i, j2]
                    if a != b and table[i2, j] == b and table[i2, j2] == a:
                        found = True
    assert found


# ---------------------------------------------------------------------------
# config validation


def test_synthetic_config_validation():
    _small_cfg().validate()
    with pytest.raises(ConfigError):
        _small_cfg(n_entity_types=1).validate()
    with pytest.raises(ConfigError):
        _small_cfg(n_relations=1).validate()
    with pytest.raises(ConfigError):
        _small_cfg(n_entities=3).validate()
    with pytest.raises(ConfigError):
        _small_cfg(n_pairs=0).validate()
    with pytest.raises(ConfigError):
        _small_cfg(n_pairs=200, n_context_pairs=200).validate()  # over 16*15 pairs
    with pytest.raises(ConfigError):
        _small_cfg(n_docs=35).validate()
    with pytest.raises(ConfigError):
        _small_cfg(pair_determined_fraction=1.5).validate()
    with pytest.raises(ConfigError):
        _small_cfg(pair_determined_fraction=0.5, n_context_pairs=0).validate()
    with pytest.raises(ConfigError):
        _small_cfg(noise_vocab=1).validate()
    with pytest.raises(ConfigError):
        _small_cfg(train_fraction=0.9, dev_fraction=0.2).validate()


# ---------------------------------------------------------------------------
# corpus generation


def test_generate_corpus_is_deterministic():
    a = generate_corpus(_small_cfg())
    b = generate_corpus(_small_cfg())
    assert a.manifest == b.manifest
    for split in ("train", "dev", "test"):
        docs_a = getattr(a.split, split)
        docs_b = getattr(b.split, split)
        assert [(d.id, d.text, d.label) for d in docs_a] == [
            (d.id, d.text, d.label) for d in docs_b
        ]


def test_generate_corpus_split_accounting():
    corpus = generate_corpus(_small_cfg())
    sizes = corpus.manifest["split_sizes"]
    assert sizes["train"] == len(corpus.split.train)
    assert sizes["dev"] == len(corpus.split.dev)
    assert sizes["test"] == len(corpus.split.test)
    assert sum(sizes.values()) == 200
    all_docs = corpus.split.train + corpus.split.dev + corpus.split.test
    assert len({d.id for d in all_docs}) == 200


def test_generated_documents_have_consistent_spans():
    corpus = generate_corpus(_small_cfg(seed=4))
    for doc in corpus.split.train + corpus.split.dev + corpus.split.test:
        s1, e1 = doc.e1_span
        s2, e2 = doc.e2_span
        assert doc.text[s1:e1] == doc.e1_text
        assert doc.text[s2:e2] == doc.e2_text
        assert e1 <= s2  # head mention precedes tail mention


def test_every_sampled_pair_has_a_training_document():
    corpus = generate_corpus(_small_cfg(seed=1))
    want = {(h, t): rel for h, t, rel in corpus.manifest["pairs"]}
    seen = {}
    for doc in corpus.split.train:
        if corpus.manifest["doc_kind"][doc.id] == "pair":
            seen.setdefault((doc.e1_text, doc.e2_text), doc.label)
    assert set(want) == set(seen)
    for pair, rel in want.items():
        assert seen[pair] == rel


def test_pair_and_context_pools_are_disjoint():
    corpus = generate_corpus(_small_cfg(seed=2))
    pool_a = {(h, t) for h, t, _ in corpus.manifest["pairs"]}
    pool_b = {(h, t) for h, t in corpus.manifest["context_pairs"]}
    assert pool_a and pool_b
    assert not pool_a & pool_b
    # each document draws from the pool matching its kind
    for doc in corpus.split.train + corpus.split.dev + corpus.split.test:
        kind = corpus.manifest["doc_kind"][doc.id]
        pair = (doc.e1_text, doc.e2_text)
        assert pair in (pool_a if kind == "pair" else pool_b), doc.id


def test_pair_documents_follow_the_type_table_exactly():
    corpus = generate_corpus(_small_cfg(seed=3))
    table = np.array(corpus.manifest["pair_table"])
    etype = corpus.manifest["entity_types"]
    relations = corpus.manifest["relations"]
    for doc in corpus.split.train + corpus.split.dev + corpus.split.test:
        if corpus.manifest["doc_kind"][doc.id] != "pair":
            continue
        want = relations[int(table[etype[doc.e1_text], etype[doc.e2_text]])]
        assert doc.label == want, doc.id


def test_context_documents_carry_their_cue_token():
    corpus = generate_corpus(_small_cfg(seed=5))
    for doc in corpus.split.train + corpus.split.dev + corpus.split.test:
        kind = corpus.manifest["doc_kind"][doc.id]
        has_cue = f"cue{doc.label}" in doc.text.split()
        assert has_cue == (kind == "context"), doc.id


def test_training_graph_gives_each_pair_pool_pair_one_relation():
    corpus = generate_corpus(_small_cfg(seed=6))
    pool_a = {(h.lower(), t.lower()) for h, t, _ in corpus.manifest["pairs"]}
    by_pair = {}
    for h, r, t in extract_triples(corpus.split.train):
        by_pair.setdefault((h, t), set()).add(r)
    for pair in pool_a:
        assert len(by_pair[pair]) == 1, pair


def test_kind_counts_reflect_the_mixture_fraction():
    corpus = generate_corpus(_small_cfg(n_docs=400, seed=7))
    counts = corpus.manifest["kind_counts"]
    total_pair = sum(c["pair"] for c in counts.values())
    total_context = sum(c["context"] for c in counts.values())
    assert total_pair + total_context == 400
    # 30 coverage docs are always pair-kind; the rest split near 50/50
    rest = 400 - 30
    context_frac = total_context / rest
    assert 0.38 < context_frac < 0.62


def test_all_pair_determined_corpus_has_no_context_docs():
    cfg = _small_cfg(pair_determined_fraction=1.0, n_context_pairs=0)
    corpus = generate_corpus(cfg)
    counts = corpus.manifest["kind_counts"]
    assert all(c["context"] == 0 for c in counts.values())
    assert corpus.manifest["context_pairs"] == []


def test_manifest_table_keeps_generation_invariants():
    corpus = generate_corpus(_small_cfg(seed=8))
    table = np.array(corpus.manifest["pair_table"])
    assert set(np.unique(table)) == set(range(4))
    assert _has_xor_cell(table)


# ---------------------------------------------------------------------------
# benchmark graphs


def test_block_kg_relation_is_a_function_of_endpoint_types():
    triples = block_kg(n_entities=20, n_types=4, n_pairs=80, seed=0)
    assert len(triples) == 80
    by_type_pair = {}
    for h, r, t in triples:
        key = (int(h[3:]) % 4, int(t[3:]) % 4)
        by_type_pair.setdefault(key, set()).add(r)
    for key, rels in by_type_pair.items():
        assert len(rels) == 1, key


def test_block_kg_is_deterministic():
    assert block_kg(seed=3) == block_kg(seed=3)
    assert block_kg(seed=3) != block_kg(seed=4)


def test_antisymmetry_kg_structure():
    triples = antisymmetry_kg(n_entities=20, n_sym_pairs=30, n_dir_pairs=25, seed=0)
    assert len(triples) == 2 * 30 + 2 * 25
    tset = set(triples)
    sym_pairs = {(h, t) for h, r, t in triples if r == "rsym"}
    fwd = [(h, t) for h, r, t in triples if r == "rfwd"]
    bwd = {(h, t) for h, r, t in triples if r == "rbwd"}
    assert len(fwd) == 25 and len(bwd) == 25
    for h, t in sym_pairs:
        assert (t, "rsym", h) in tset
    for h, t in fwd:
        assert (t, "rbwd", h) in tset
        assert (h, "rbwd", t) not in tset  # inverses never share a direction
    # symmetric and directional pair sets are disjoint (as unordered pairs)
    undirected_sym = {frozenset(p) for p in sym_pairs}
    undirected_dir = {frozenset(p) for p in fwd}
    assert not undirected_sym & undirected_dir


def test_antisymmetry_kg_rejects_oversubscription():
    with pytest.raises(ConfigError):
        antisymmetry_kg(n_entities=5, n_sym_pairs=8, n_dir_pairs=8)
