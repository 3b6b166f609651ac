"""Top-level acceptance checks for the pipeline.

One test per criterion; each appends a single [PASS]/[FAIL] line to the
terminal summary with the measured numbers and elapsed time.
"""

import json
import os
import time

import numpy as np

import oracle
from kgfuse.cli import main
from kgfuse.corpus import MarkedDocument
from kgfuse.encoder import builtin_encoder
from kgfuse.fusion import (
    RelationInference,
    TrainReConfig,
    evaluate_re,
    fuse,
    init_classifier,
    predict_batch,
    train_re,
)
from kgfuse.kge import (
    COMPLEX,
    DISTMULT,
    MODEL_KINDS,
    TRANSE,
    KgeTrainConfig,
    evaluate_link_prediction,
    init_model,
    rank_relations,
    train_kge,
)
from kgfuse.kgstore import Vocab, build_kg, build_vocabs
from kgfuse.synthetic import antisymmetry_kg, block_kg


def _random_pair(rng, n_entities, n_relations):
    pos = (
        int(rng.integers(n_entities)),
        int(rng.integers(n_relations)),
        int(rng.integers(n_entities)),
    )
    slot = int(rng.integers(3))
    neg = list(pos)
    limit = n_relations if slot == 1 else n_entities
    while True:
        cand = int(rng.integers(limit))
        if cand != pos[slot]:
            neg[slot] = cand
            break
    return pos, tuple(neg)


def test_gradients_match_finite_differences_everywhere(record_criterion):
    """Analytic gradients agree with central differences for all three models."""
    start = time.perf_counter()
    rng = np.random.default_rng(20240601)
    margin = 2.0
    worst = 0.0
    configs = 0
    for kind in MODEL_KINDS:
        for dim in (2, 4, 8):
            for _ in range(12):
                for _ in range(50):
                    model = init_model(kind, dim, 6, 4, rng)
                    pos, neg = _random_pair(rng, 6, 4)
                    if kind != TRANSE or oracle.transe_config_is_smooth(model, pos, neg, margin):
                        break
                err = oracle.fd_gradient_max_rel_err(
                    model, pos, neg, margin=margin, l2_lambda=1e-3, eps=1e-5
                )
                worst = max(worst, err)
                configs += 1
    elapsed = time.perf_counter() - start
    ok = worst < 1e-4 and configs >= 100 and elapsed < 10.0
    record_criterion(
        "gradient-correctness",
        ok,
        f"max rel err {worst:.2e} over {configs} configs, d in {{2,4,8}} ({elapsed:.1f}s)",
    )


def test_ranking_matches_brute_force_oracle(record_criterion):
    """Tie-aware filtered/raw relation ranking equals an explicit sort oracle."""
    start = time.perf_counter()
    queries = 0
    exact = True
    for seed in range(50):
        rng = np.random.default_rng(31337 + seed)
        kg = oracle.random_kg(rng, max_entities=10, max_relations=5)
        kind = MODEL_KINDS[seed % len(MODEL_KINDS)]
        model = init_model(kind, 4, kg.n_entities, kg.n_relations, rng)
        triples = kg.sorted_triples()
        for mode in ("raw", "filtered"):
            for h, r, t in triples:
                got = rank_relations(model, h, t, r, kg, mode=mode)
                want = oracle.brute_force_rank(model, h, t, r, kg, mode)
                exact = exact and got == want
                queries += 1
            metrics = evaluate_link_prediction(model, triples, kg, mode=mode, hits_ns=(1, 10))
            want = oracle.brute_force_lp_metrics(model, triples, kg, mode, hits_ns=(1, 10))
            exact = exact and metrics.mrr == want["mrr"] and metrics.hits_at == want["hits_at"]
    elapsed = time.perf_counter() - start
    ok = exact and elapsed < 10.0
    record_criterion(
        "ranking-oracle",
        ok,
        f"exact on {queries} queries across 50 random graphs, both modes ({elapsed:.1f}s)",
    )


def test_typed_block_graph_is_learnable(record_criterion):
    """ComplEx recovers a type-determined relation assignment near-perfectly."""
    start = time.perf_counter()
    triples = block_kg(n_entities=40, n_types=4, n_pairs=300, seed=0)
    entity_vocab, relation_vocab = build_vocabs(triples)
    kg = build_kg(triples, entity_vocab, relation_vocab)
    cfg = KgeTrainConfig(kind=COMPLEX, dim=50, epochs=60, l2_lambda=1e-3, seed=0)
    model, _ = train_kge(kg, cfg)
    metrics = evaluate_link_prediction(model, kg.sorted_triples(), kg, mode="filtered")
    model_b, _ = train_kge(kg, cfg)
    deterministic = all(
        np.array_equal(t, model_b.tables()[n]) for n, t in model.tables().items()
    )
    elapsed = time.perf_counter() - start
    ok = (
        metrics.hits_at[1] >= 0.95
        and metrics.mrr >= 0.97
        and cfg.epochs <= 100
        and deterministic
        and elapsed < 60.0
    )
    record_criterion(
        "learnability",
        ok,
        f"filtered Hits@1 {metrics.hits_at[1]:.3f} (>=0.95), MRR {metrics.mrr:.3f} (>=0.97), "
        f"{cfg.epochs} epochs, rerun bit-identical ({elapsed:.1f}s)",
    )


def test_scoring_families_order_by_expressiveness(record_criterion):
    """On mixed symmetric/antisymmetric structure: ComplEx > DistMult >= TransE."""
    start = time.perf_counter()
    triples = antisymmetry_kg(n_entities=30, n_sym_pairs=60, n_dir_pairs=60, seed=0)
    entity_vocab, relation_vocab = build_vocabs(triples)
    kg = build_kg(triples, entity_vocab, relation_vocab)
    mrr = {}
    for kind in (TRANSE, DISTMULT, COMPLEX):
        cfg = KgeTrainConfig(kind=kind, dim=50, epochs=80, seed=0)  # same budget per model
        model, _ = train_kge(kg, cfg)
        mrr[kind] = evaluate_link_prediction(model, kg.sorted_triples(), kg).mrr
    elapsed = time.perf_counter() - start
    ok = mrr[COMPLEX] > mrr[DISTMULT] and mrr[DISTMULT] >= mrr[TRANSE] and elapsed < 120.0
    record_criterion(
        "model-family-ordering",
        ok,
        f"MRR complex {mrr[COMPLEX]:.4f} > distmult {mrr[DISTMULT]:.4f} >= "
        f"transe {mrr[TRANSE]:.4f} ({elapsed:.1f}s)",
    )


def _fallback_corpus(n_per_label=30, seed=0):
    rng = np.random.default_rng(seed)
    docs = []
    for label_idx, label in enumerate(("activates", "blocks", "binds")):
        for i in range(n_per_label):
            head = f"drug{i % 6}"
            tail = f"gene{i % 5}"
            noise = [f"w{int(rng.integers(40))}" for _ in range(4)]
            tokens = ["<<", head, ">>", f"cue{label_idx}"] + noise + ["[[", tail, "]]"]
            docs.append(
                MarkedDocument(
                    id=f"{label}-{i}", tokens=tokens, label=label,
                    head_entity=head, tail_entity=tail,
                )
            )
    train = [d for i, d in enumerate(docs) if i % 4 != 3]
    dev = [d for i, d in enumerate(docs) if i % 4 == 3]
    return train, dev


def test_fusion_fallback_is_exact(record_criterion):
    """Absent relation vectors leave the contextual path untouched, bit for bit."""
    start = time.perf_counter()
    rng = np.random.default_rng(11)

    # direct combination: the no-relation branch returns H_c itself
    clf = init_classifier(["a", "b"], 32, 16, rng, rng)
    h_c = rng.standard_normal(32)
    passthrough = fuse(clf, h_c, None) is h_c
    clf_cat = init_classifier(["a", "b"], 32, 16, rng, rng, fusion_mode="concat")
    padded = fuse(clf_cat, h_c, None)
    concat_exact = np.array_equal(padded[:32], h_c) and not padded[32:].any()

    # batch predictions: provider-less equals provider-with-every-doc-fallback
    train, dev = _fallback_corpus()
    enc = builtin_encoder(rng, dim=16, vocab_size=512)
    result = train_re(train, dev, None, enc, TrainReConfig(epochs=5, batch_size=32, seed=0))
    oov_inf = RelationInference(
        model=init_model(COMPLEX, 8, 4, 3, np.random.default_rng(0)),
        entity_vocab=Vocab(["none-of", "the-corpus", "entities", "match"]),
    )
    pred_a, probs_a = predict_batch(result.classifier, result.encoder, None, dev)
    pred_b, probs_b = predict_batch(result.classifier, result.encoder, oov_inf, dev)
    batch_exact = np.array_equal(pred_a, pred_b) and np.array_equal(probs_a, probs_b)

    # whole training arms: no provider == provider forcibly ignored
    vocab = Vocab([f"drug{i}" for i in range(6)] + [f"gene{i}" for i in range(5)])
    real_inf = RelationInference(
        model=init_model(COMPLEX, 8, len(vocab), 3, np.random.default_rng(1)),
        entity_vocab=vocab,
    )
    base = dict(epochs=6, patience=6, batch_size=32, seed=2, d_r=16)
    arm_without = train_re(train, dev, None, enc, TrainReConfig(**base))
    arm_forced = train_re(train, dev, real_inf, enc, TrainReConfig(force_no_kge=True, **base))
    m_without = evaluate_re(arm_without.classifier, arm_without.encoder, None, dev)
    m_forced = evaluate_re(
        arm_forced.classifier, arm_forced.encoder, real_inf, dev, force_no_kge=True
    )
    arms_identical = (
        arm_without.history == arm_forced.history
        and np.array_equal(arm_without.encoder.token_emb, arm_forced.encoder.token_emb)
        and np.array_equal(arm_without.classifier.head_w, arm_forced.classifier.head_w)
        and m_without.to_dict() == m_forced.to_dict()
    )

    elapsed = time.perf_counter() - start
    ok = passthrough and concat_exact and batch_exact and arms_identical
    record_criterion(
        "fusion-exactness",
        ok,
        "fallback returns H_c bit-exact (add & concat), all-fallback predictions and "
        f"forced-absent training arm identical to the context-only arm ({elapsed:.1f}s)",
    )


def test_relation_fusion_beats_context_only_on_mixed_corpus(tmp_path, record_criterion):
    """With half the labels determined by the entity pair, fusion must win clearly."""
    start = time.perf_counter()
    corpus = str(tmp_path / "corpus")
    out = str(tmp_path / "ablation")
    assert main(
        [
            "gen-synthetic", "--out", corpus, "--seed", "0",
            "--set", "synthetic.n_docs=5000",
            "--set", "synthetic.n_relations=6",
            "--set", "synthetic.n_entity_types=6",
            "--set", "synthetic.n_entities=60",
            "--set", "synthetic.n_pairs=500",
            "--set", "synthetic.n_context_pairs=500",
            "--set", "synthetic.pair_determined_fraction=0.5",
        ]
    ) == 0
    assert main(
        [
            "ablate", "--corpus", corpus, "--out", out,
            "--set", "ablate.seeds=0,1,2",
            "--set", "encoder.dim=64",
            "--set", "fusion.epochs=60",
            "--set", "fusion.patience=8",
            "--set", "kge.dim=50",
            "--set", "kge.epochs=60",
        ]
    ) == 0
    with open(os.path.join(out, "ablation.json"), encoding="utf-8") as f:
        payload = json.load(f)
    mean_delta = payload["mean_delta_macro_f1"]
    per_seed = [r["delta_macro_f1"] for r in payload["runs"]]
    elapsed = time.perf_counter() - start
    ok = mean_delta >= 0.05 and len(per_seed) == 3 and elapsed < 300.0
    record_criterion(
        "ablation-direction",
        ok,
        f"macro-F1 delta {mean_delta:+.4f} (>= +0.05) over seeds 0,1,2 "
        f"(per-seed {', '.join(f'{d:+.3f}' for d in per_seed)}; 5000 docs, 6 labels, "
        f"50% pair-determined; {elapsed:.0f}s)",
    )


def test_fusion_generalizes_to_pairs_outside_the_graph(tmp_path, record_criterion):
    """Fused arm must not lose to context-only on pairs the graph never saw."""
    start = time.perf_counter()
    corpus = str(tmp_path / "corpus")
    out = str(tmp_path / "holdout")
    assert main(
        [
            "gen-synthetic", "--out", corpus, "--seed", "0",
            "--set", "synthetic.n_docs=2000",
            "--set", "synthetic.pair_determined_fraction=1.0",
            "--set", "synthetic.n_context_pairs=0",
            "--set", "synthetic.n_pairs=300",
            "--set", "synthetic.n_entities=40",
        ]
    ) == 0
    assert main(
        [
            "holdout", "--corpus", corpus, "--out", out,
            "--set", "holdout.fraction=0.2",
            "--set", "kge.dim=16",
            "--set", "kge.l2=0.01",
            "--set", "kge.epochs=300",
            "--set", "encoder.dim=64",
            "--set", "fusion.epochs=60",
            "--set", "fusion.patience=8",
        ]
    ) == 0
    with open(os.path.join(out, "holdout.json"), encoding="utf-8") as f:
        payload = json.load(f)
    with_f1 = payload["with_kge"]["macro_f1"]
    without_f1 = payload["no_kge"]["macro_f1"]
    fallback = payload["fallback_rate"]
    elapsed = time.perf_counter() - start
    ok = (
        with_f1 >= without_f1
        and payload["pair_disjoint"] is True
        and 0.0 <= fallback <= 1.0
        and elapsed < 300.0
    )
    record_criterion(
        "held-out-pairs",
        ok,
        f"held-out macro-F1 with fusion {with_f1:.4f} >= without {without_f1:.4f} "
        f"(20% of pairs excluded from the graph; fallback rate {fallback:.3f}; {elapsed:.0f}s)",
    )


def _file_bytes(*parts):
    with open(os.path.join(*parts), "rb") as f:
        return f.read()


def test_commands_rerun_bit_identically_from_resolved_config(tmp_path, record_criterion):
    """Every stage rerun from its resolved.cfg reproduces its artifacts exactly."""
    start = time.perf_counter()
    small = [
        "--set", "synthetic.n_entities=16",
        "--set", "synthetic.n_pairs=40",
        "--set", "synthetic.n_context_pairs=40",
        "--set", "synthetic.n_docs=160",
        "--set", "kge.dim=8",
        "--set", "kge.epochs=8",
        "--set", "kge.batch_size=64",
        "--set", "encoder.dim=16",
        "--set", "encoder.vocab_size=2048",
        "--set", "fusion.epochs=4",
        "--set", "fusion.batch_size=64",
    ]
    corpus_a, corpus_b = str(tmp_path / "corpus-a"), str(tmp_path / "corpus-b")
    assert main(["gen-synthetic", "--out", corpus_a, "--seed", "3"] + small) == 0
    assert main(
        ["gen-synthetic", "--config", os.path.join(corpus_a, "resolved.cfg"), "--out", corpus_b]
    ) == 0
    same = {
        "corpus": all(
            _file_bytes(corpus_a, n) == _file_bytes(corpus_b, n)
            for n in ("train.jsonl", "dev.jsonl", "test.jsonl", "manifest.json")
        )
    }

    kg_dir = str(tmp_path / "kg")
    assert main(
        ["build-kg", "--docs", os.path.join(corpus_a, "train.jsonl"), "--out", kg_dir]
    ) == 0

    kge_a, kge_b = str(tmp_path / "kge-a"), str(tmp_path / "kge-b")
    assert main(["train-kge", "--kg", kg_dir, "--out", kge_a, "--seed", "3"] + small) == 0
    assert main(
        ["train-kge", "--config", os.path.join(kge_a, "resolved.cfg"), "--kg", kg_dir, "--out", kge_b]
    ) == 0
    same["kge-checkpoint"] = _file_bytes(kge_a, "model.kge") == _file_bytes(kge_b, "model.kge")
    same["kge-losses"] = _file_bytes(kge_a, "losses.csv") == _file_bytes(kge_b, "losses.csv")

    lp_a, lp_b = str(tmp_path / "lp-a"), str(tmp_path / "lp-b")
    model_path = os.path.join(kge_a, "model.kge")
    assert main(["eval-lp", "--kg", kg_dir, "--model", model_path, "--out", lp_a]) == 0
    assert main(["eval-lp", "--kg", kg_dir, "--model", model_path, "--out", lp_b]) == 0
    same["lp-metrics"] = _file_bytes(lp_a, "lp_metrics.json") == _file_bytes(lp_b, "lp_metrics.json")

    re_a, re_b = str(tmp_path / "re-a"), str(tmp_path / "re-b")
    re_args = ["--corpus", corpus_a, "--kg", kg_dir, "--kge", model_path]
    assert main(["train-re"] + re_args + ["--out", re_a, "--seed", "3"] + small) == 0
    assert main(
        ["train-re", "--config", os.path.join(re_a, "resolved.cfg")] + re_args + ["--out", re_b]
    ) == 0
    same["re-classifier"] = _file_bytes(re_a, "fuse.bin") == _file_bytes(re_b, "fuse.bin")
    same["re-encoder"] = _file_bytes(re_a, "encoder.bin") == _file_bytes(re_b, "encoder.bin")
    same["re-history"] = _file_bytes(re_a, "history.csv") == _file_bytes(re_b, "history.csv")

    met_a, met_b = str(tmp_path / "met-a"), str(tmp_path / "met-b")
    ev = ["eval-re", "--docs", os.path.join(corpus_a, "test.jsonl"), "--model", re_a,
          "--kg", kg_dir, "--kge", model_path]
    assert main(ev + ["--out", met_a]) == 0
    assert main(ev + ["--out", met_b]) == 0
    same["re-metrics"] = _file_bytes(met_a, "re_metrics.json") == _file_bytes(met_b, "re_metrics.json")

    elapsed = time.perf_counter() - start
    ok = all(same.values())
    failing = [k for k, v in same.items() if not v]
    record_criterion(
        "determinism",
        ok,
        f"{len(same)} artifact groups bit-identical on rerun from resolved.cfg"
        + (f"; MISMATCH in {failing}" if failing else "")
        + f" ({elapsed:.1f}s)",
    )


def test_metric_scorer_matches_confusion_matrix_oracle(record_criterion):
    """Accuracy, macro-F1, micro-F1 equal an independent matrix computation."""
    from kgfuse.fusion import compute_re_metrics

    start = time.perf_counter()
    rng = np.random.default_rng(2718)
    exact = True
    for trial in range(500):
        n_labels = int(rng.integers(2, 9))
        labels = [f"l{j}" for j in range(n_labels)]
        n = int(rng.integers(1, 81))
        gold = [labels[i] for i in rng.integers(0, n_labels, size=n)]
        pred = [labels[i] for i in rng.integers(0, n_labels, size=n)]
        ours = compute_re_metrics(gold, pred, labels)
        ref = oracle.confusion_matrix_metrics(gold, pred, labels)
        exact = (
            exact
            and ours.accuracy == ref["accuracy"]
            and ours.macro_f1 == ref["macro_f1"]
            and ours.micro_f1 == ref["micro_f1"]
            and all(
                ours.per_label[lab][k] == ref["per_label"][lab][k]
                for lab in labels
                for k in ("precision", "recall", "f1")
            )
        )
    elapsed = time.perf_counter() - start
    record_criterion(
        "metric-scorer",
        exact,
        f"exact equality on 500 random prediction sets, 2-8 labels ({elapsed:.1f}s)",
    )
