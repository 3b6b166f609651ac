"""Command-line pipeline: corpus generation through fused classification.

Subcommands cover each stage and write their artifacts plus a manifest
(master seed, per-stage seeds, inputs) and the fully resolved config into
the output directory, so any run can be reproduced from what it left
behind. Exit codes: 0 success, 2 configuration error, 3 data error,
4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import config as cfgmod
from .corpus import (
    extract_triples,
    insert_entity_markers,
    make_heldout_relation_split,
    parse_re_dataset,
    write_jsonl,
)
from .encoder import (
    ContextEncoder,
    builtin_encoder,
    external_encoder,
    inspect_ctxe_header,
    inspect_encb_header,
    load_builtin_encoder,
    load_external_embeddings,
    save_builtin_encoder,
)
from .errors import ConfigError, DataError, KgfuseError, NumericError
from .fusion import (
    RelationInference,
    TrainReConfig,
    evaluate_re,
    inspect_fuse_header,
    load_classifier,
    predict_batch,
    save_classifier,
    train_re,
)
from .kge import (
    KgeTrainConfig,
    evaluate_link_prediction,
    inspect_header,
    load_model,
    save_model,
    train_kge,
)
from .kgstore import Vocab, build_kg, build_vocabs, load_kg, save_kg
from .synthetic import SyntheticConfig, generate_corpus, write_manifest


def _write_json(path: str, obj) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def _write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        w.writerows(rows)


def _out_dir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _load_cfg(args) -> dict[str, object]:
    return cfgmod.load_config(
        path=getattr(args, "config", None),
        overrides=getattr(args, "set", None),
        seed=getattr(args, "seed", None),
    )


def _marked(docs):
    return [insert_entity_markers(d) for d in docs]


def _load_split_file(path: str, fmt: str):
    docs = parse_re_dataset(path, format=fmt)
    if not docs:
        raise DataError(f"{path}: no documents")
    return docs


def _corpus_file(corpus_dir: str, name: str) -> str:
    path = os.path.join(corpus_dir, name)
    if not os.path.exists(path):
        raise DataError(f"corpus directory {corpus_dir!r} has no {name}")
    return path


def _load_kg_dir(kg_dir: str):
    kg = load_kg(os.path.join(kg_dir, "kg.txt"))
    entity_vocab = Vocab.load(os.path.join(kg_dir, "entities.txt"))
    relation_vocab = Vocab.load(os.path.join(kg_dir, "relations.txt"))
    if len(entity_vocab) != kg.n_entities or len(relation_vocab) != kg.n_relations:
        raise DataError(f"{kg_dir}: vocabulary sizes do not match graph header")
    return kg, entity_vocab, relation_vocab


def _make_encoder(cfg: dict, master: int, ctxe: str | None) -> ContextEncoder:
    if cfg["encoder.mode"] == "external" or ctxe:
        if not ctxe:
            raise ConfigError("encoder.mode=external requires --ctxe FILE")
        return external_encoder(load_external_embeddings(ctxe))
    rng = np.random.default_rng(cfgmod.stage_seed(master, "encoder"))
    return builtin_encoder(rng, dim=cfg["encoder.dim"], vocab_size=cfg["encoder.vocab_size"])


def _fusion_cfg(cfg: dict, master: int, force_no_kge: bool) -> TrainReConfig:
    return TrainReConfig(
        epochs=cfg["fusion.epochs"],
        learning_rate=cfg["fusion.learning_rate"],
        patience=cfg["fusion.patience"],
        batch_size=cfg["fusion.batch_size"],
        dropout=cfg["fusion.dropout"],
        fusion_mode=cfg["fusion.mode"],
        seed=cfgmod.stage_seed(master, "fusion"),
        class_weights=cfg["fusion.class_weights"],
        force_no_kge=force_no_kge,
    )


def _kge_cfg(cfg: dict, master: int) -> KgeTrainConfig:
    return KgeTrainConfig(
        kind=cfg["kge.kind"],
        dim=cfg["kge.dim"],
        epochs=cfg["kge.epochs"],
        learning_rate=cfg["kge.learning_rate"],
        optimizer=cfg["kge.optimizer"],
        margin=cfg["kge.margin"],
        l2_lambda=cfg["kge.l2"],
        negatives_per_positive=cfg["kge.negatives"],
        batch_size=cfg["kge.batch_size"],
        seed=cfgmod.stage_seed(master, "kge"),
        neg_strategy=cfg["kge.neg_strategy"],
    )


def _rel_inf(cfg: dict, kg_dir: str, kge_path: str) -> RelationInference:
    entity_vocab = Vocab.load(os.path.join(kg_dir, "entities.txt"))
    model = load_model(kge_path)
    return RelationInference(
        model=model,
        entity_vocab=entity_vocab,
        min_score=cfgmod.optional_float(cfg, "fusion.min_score"),
    )


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen_synthetic(args) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(args)
    master = int(cfg["seed"])
    synth = SyntheticConfig(
        n_entity_types=cfg["synthetic.n_entity_types"],
        n_relations=cfg["synthetic.n_relations"],
        n_entities=cfg["synthetic.n_entities"],
        n_pairs=cfg["synthetic.n_pairs"],
        n_context_pairs=cfg["synthetic.n_context_pairs"],
        n_docs=cfg["synthetic.n_docs"],
        pair_determined_fraction=cfg["synthetic.pair_determined_fraction"],
        noise_vocab=cfg["synthetic.noise_vocab"],
        train_fraction=cfg["synthetic.train_fraction"],
        dev_fraction=cfg["synthetic.dev_fraction"],
        seed=cfgmod.stage_seed(master, "synthetic"),
    )
    corpus = generate_corpus(synth)
    write_jsonl(os.path.join(out, "train.jsonl"), corpus.split.train)
    write_jsonl(os.path.join(out, "dev.jsonl"), corpus.split.dev)
    write_jsonl(os.path.join(out, "test.jsonl"), corpus.split.test)
    write_manifest(os.path.join(out, "manifest.json"), corpus)
    cfgmod.write_resolved(os.path.join(out, "resolved.cfg"), cfg)
    sizes = corpus.manifest["split_sizes"]
    print(f"wrote {sizes['train']} train / {sizes['dev']} dev / {sizes['test']} test docs to {out}")
    return 0


def cmd_build_kg(args) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(args)
    fmt = args.format or cfg["corpus.format"]
    docs = _load_split_file(args.docs, fmt)
    triples = extract_triples(docs)
    if not triples:
        raise DataError(f"{args.docs}: no labeled documents to extract triples from")
    entity_vocab, relation_vocab = build_vocabs(triples)
    kg = build_kg(triples, entity_vocab, relation_vocab)
    save_kg(os.path.join(out, "kg.txt"), kg)
    entity_vocab.save(os.path.join(out, "entities.txt"))
    relation_vocab.save(os.path.join(out, "relations.txt"))
    _write_json(
        os.path.join(out, "kg_manifest.json"),
        {
            "command": "build-kg",
            "source": args.docs,
            "documents": len(docs),
            "surface_triples": len(triples),
            "unique_triples": len(kg),
            "entities": kg.n_entities,
            "relations": kg.n_relations,
        },
    )
    print(f"graph: {kg.n_entities} entities, {kg.n_relations} relations, {len(kg)} triples")
    return 0


def cmd_train_kge(args) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(args)
    master = int(cfg["seed"])
    kg, _, _ = _load_kg_dir(args.kg)
    tcfg = _kge_cfg(cfg, master)
    model, losses = train_kge(kg, tcfg)
    save_model(os.path.join(out, "model.kge"), model)
    _write_csv(
        os.path.join(out, "losses.csv"),
        ["epoch", "loss"],
        [(i, f"{v:.6f}") for i, v in enumerate(losses)],
    )
    cfgmod.write_resolved(os.path.join(out, "resolved.cfg"), cfg)
    _write_json(
        os.path.join(out, "manifest.json"),
        {
            "command": "train-kge",
            "kg": args.kg,
            "master_seed": master,
            "stage_seeds": {"kge": tcfg.seed},
            "kind": tcfg.kind,
            "dim": tcfg.dim,
            "epochs_run": len(losses),
            "final_loss": losses[-1],
        },
    )
    print(f"trained {tcfg.kind} (dim {tcfg.dim}), final epoch loss {losses[-1]:.4f}")
    return 0


def cmd_eval_lp(args) -> int:
    cfg = _load_cfg(args)
    kg, entity_vocab, relation_vocab = _load_kg_dir(args.kg)
    model = load_model(args.model)
    mode = args.mode or cfg["lp.mode"]
    try:
        hits_ns = tuple(int(x) for x in str(cfg["lp.hits"]).split(","))
    except ValueError:
        raise ConfigError(f"lp.hits: cannot parse {cfg['lp.hits']!r} as comma-separated ints") from None
    if args.triples:
        surface = []
        with open(args.triples, encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                parts = line.rstrip("\n").split("\t")
                if len(parts) != 3:
                    raise DataError(f"{args.triples}:{lineno}: expected h<TAB>r<TAB>t")
                surface.append(tuple(parts))
        triples = [
            (entity_vocab.id_of(h), relation_vocab.id_of(r), entity_vocab.id_of(t))
            for h, r, t in surface
        ]
    else:
        triples = kg.sorted_triples()
    metrics = evaluate_link_prediction(model, triples, kg, mode=mode, hits_ns=hits_ns)
    payload = metrics.to_dict()
    payload["queries"] = len(triples)
    print(json.dumps(payload, indent=2, sort_keys=True))
    if args.out:
        _out_dir(args)
        _write_json(os.path.join(args.out, "lp_metrics.json"), payload)
    return 0


def cmd_train_re(args) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(args)
    master = int(cfg["seed"])
    fmt = cfg["corpus.format"]
    train_docs = _marked(_load_split_file(_corpus_file(args.corpus, "train.jsonl"), fmt))
    dev_path = os.path.join(args.corpus, "dev.jsonl")
    dev_docs = _marked(_load_split_file(dev_path, fmt)) if os.path.exists(dev_path) else []

    rel_inf = None
    if not args.no_kge:
        if not (args.kg and args.kge):
            raise ConfigError("train-re needs --kg and --kge unless --no-kge is given")
        rel_inf = _rel_inf(cfg, args.kg, args.kge)
    encoder = _make_encoder(cfg, master, args.ctxe)
    tcfg = _fusion_cfg(cfg, master, force_no_kge=False)
    result = train_re(train_docs, dev_docs, rel_inf, encoder, tcfg)

    save_classifier(os.path.join(out, "fuse.bin"), result.classifier)
    if result.encoder.mode == "builtin":
        save_builtin_encoder(os.path.join(out, "encoder.bin"), result.encoder)
    _write_csv(
        os.path.join(out, "history.csv"),
        ["epoch", "split", "metric", "value"],
        [(e, s, m, f"{v:.6f}") for e, s, m, v in result.history],
    )
    cfgmod.write_resolved(os.path.join(out, "resolved.cfg"), cfg)
    _write_json(
        os.path.join(out, "manifest.json"),
        {
            "command": "train-re",
            "corpus": args.corpus,
            "kg": args.kg,
            "kge": args.kge,
            "ctxe": args.ctxe,
            "master_seed": master,
            "stage_seeds": {
                "encoder": cfgmod.stage_seed(master, "encoder"),
                "fusion": tcfg.seed,
            },
            "labels": result.classifier.labels,
            "best_epoch": result.best_epoch,
            "best_dev_macro_f1": result.best_dev_macro_f1,
        },
    )
    if dev_docs:
        print(f"best dev macro-F1 {result.best_dev_macro_f1:.4f} at epoch {result.best_epoch}")
    else:
        print(f"trained for {result.best_epoch + 1} best-loss epochs (no dev split)")
    return 0


def cmd_eval_re(args) -> int:
    cfg = _load_cfg(args)
    fmt = cfg["corpus.format"]
    docs = _marked(_load_split_file(args.docs, fmt))
    clf = load_classifier(os.path.join(args.model, "fuse.bin"))
    enc_path = os.path.join(args.model, "encoder.bin")
    if args.ctxe:
        encoder = external_encoder(load_external_embeddings(args.ctxe))
    elif os.path.exists(enc_path):
        encoder = load_builtin_encoder(enc_path)
    else:
        raise ConfigError(f"{args.model}: no encoder.bin; pass --ctxe for external encodings")
    rel_inf = None
    if not args.no_kge:
        if not (args.kg and args.kge):
            raise ConfigError("eval-re needs --kg and --kge unless --no-kge is given")
        rel_inf = _rel_inf(cfg, args.kg, args.kge)
    metrics = evaluate_re(clf, encoder, rel_inf, docs)
    payload = metrics.to_dict()
    payload["documents"] = len(docs)
    print(json.dumps(payload, indent=2, sort_keys=True))
    if args.out:
        _out_dir(args)
        _write_json(os.path.join(args.out, "re_metrics.json"), payload)
    return 0


def _kind_accuracy(docs, pred_labels, doc_kind: dict[str, str]) -> dict[str, float]:
    """Accuracy split by document kind, when the corpus manifest names kinds."""
    hits: dict[str, list[int]] = {}
    for doc, pred in zip(docs, pred_labels):
        kind = doc_kind.get(doc.id)
        if kind is None:
            continue
        hits.setdefault(kind, []).append(int(pred == doc.label))
    return {k: float(np.mean(v)) for k, v in sorted(hits.items()) if v}


def cmd_ablate(args) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(args)
    fmt = cfg["corpus.format"]
    train_raw = _load_split_file(_corpus_file(args.corpus, "train.jsonl"), fmt)
    dev_docs = _marked(_load_split_file(_corpus_file(args.corpus, "dev.jsonl"), fmt))
    test_docs = _marked(_load_split_file(_corpus_file(args.corpus, "test.jsonl"), fmt))
    train_docs = _marked(train_raw)

    doc_kind: dict[str, str] = {}
    manifest_path = os.path.join(args.corpus, "manifest.json")
    if os.path.exists(manifest_path):
        with open(manifest_path, encoding="utf-8") as f:
            doc_kind = json.load(f).get("doc_kind", {})

    triples = extract_triples(train_raw)
    entity_vocab, relation_vocab = build_vocabs(triples)
    kg = build_kg(triples, entity_vocab, relation_vocab)

    try:
        run_seeds = [int(s) for s in str(cfg["ablate.seeds"]).split(",")]
    except ValueError:
        raise ConfigError(f"ablate.seeds: cannot parse {cfg['ablate.seeds']!r}") from None
    min_score = cfgmod.optional_float(cfg, "fusion.min_score")

    runs = []
    for run_seed in run_seeds:
        model, _ = train_kge(kg, _kge_cfg(cfg, run_seed))
        rel_inf = RelationInference(model=model, entity_vocab=entity_vocab, min_score=min_score)
        encoder = _make_encoder(cfg, run_seed, args.ctxe)
        arms = {}
        for arm, inf in (("with_kge", rel_inf), ("no_kge", None)):
            tcfg = _fusion_cfg(cfg, run_seed, force_no_kge=inf is None)
            result = train_re(train_docs, dev_docs, inf, encoder, tcfg)
            metrics = evaluate_re(result.classifier, result.encoder, inf, test_docs)
            entry = metrics.to_dict()
            if doc_kind:
                pred_ids, _ = predict_batch(result.classifier, result.encoder, inf, test_docs)
                preds = [result.classifier.labels[int(i)] for i in pred_ids]
                entry["accuracy_by_kind"] = _kind_accuracy(test_docs, preds, doc_kind)
            entry["best_epoch"] = result.best_epoch
            arms[arm] = entry
        delta = arms["with_kge"]["macro_f1"] - arms["no_kge"]["macro_f1"]
        runs.append({"seed": run_seed, **arms, "delta_macro_f1": delta})
        print(
            f"seed {run_seed}: with_kge macro-F1 {arms['with_kge']['macro_f1']:.4f}, "
            f"no_kge {arms['no_kge']['macro_f1']:.4f}, delta {delta:+.4f}"
        )
    mean_delta = float(np.mean([r["delta_macro_f1"] for r in runs]))
    payload = {"runs": runs, "mean_delta_macro_f1": mean_delta, "seeds": run_seeds}
    _write_json(os.path.join(out, "ablation.json"), payload)
    cfgmod.write_resolved(os.path.join(out, "resolved.cfg"), cfg)
    print(f"mean test macro-F1 delta (with - without relation fusion): {mean_delta:+.4f}")
    return 0


def cmd_holdout(args) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(args)
    master = int(cfg["seed"])
    fmt = cfg["corpus.format"]
    all_train = _load_split_file(_corpus_file(args.corpus, "train.jsonl"), fmt)
    dev_path = os.path.join(args.corpus, "dev.jsonl")
    dev_docs = _marked(_load_split_file(dev_path, fmt)) if os.path.exists(dev_path) else []

    kept_raw, held_raw = make_heldout_relation_split(
        all_train, cfg["holdout.fraction"], cfgmod.stage_seed(master, "holdout")
    )
    triples = extract_triples(kept_raw)
    if not triples:
        raise DataError("held-in split has no labeled documents")
    entity_vocab, relation_vocab = build_vocabs(triples)
    kg = build_kg(triples, entity_vocab, relation_vocab)

    # The point of the harness: no held-out pair may leak into the graph.
    for doc in held_raw:
        h, t = doc.entity_pair()
        if h in entity_vocab and t in entity_vocab:
            if kg.relations_for(entity_vocab.id_of(h), entity_vocab.id_of(t)):
                raise DataError(f"held-out pair ({h}, {t}) leaked into the graph")

    model, _ = train_kge(kg, _kge_cfg(cfg, master))
    rel_inf = RelationInference(
        model=model, entity_vocab=entity_vocab, min_score=cfgmod.optional_float(cfg, "fusion.min_score")
    )
    encoder = _make_encoder(cfg, master, args.ctxe)
    kept_docs = _marked(kept_raw)
    held_docs = _marked(held_raw)
    result = train_re(kept_docs, dev_docs, rel_inf, encoder, _fusion_cfg(cfg, master, False))

    fallbacks = sum(1 for d in held_docs if rel_inf.for_doc(d) is None)
    metrics = evaluate_re(result.classifier, result.encoder, rel_inf, held_docs)
    baseline = train_re(kept_docs, dev_docs, None, encoder, _fusion_cfg(cfg, master, True))
    base_metrics = evaluate_re(baseline.classifier, baseline.encoder, None, held_docs)

    payload = {
        "holdout_fraction": cfg["holdout.fraction"],
        "kept_docs": len(kept_raw),
        "held_out_docs": len(held_raw),
        "held_out_pairs": len({d.entity_pair() for d in held_raw}),
        "pair_disjoint": True,
        "fallback_rate": fallbacks / len(held_docs),
        "with_kge": metrics.to_dict(),
        "no_kge": base_metrics.to_dict(),
        "delta_macro_f1": metrics.macro_f1 - base_metrics.macro_f1,
    }
    _write_json(os.path.join(out, "holdout.json"), payload)
    cfgmod.write_resolved(os.path.join(out, "resolved.cfg"), cfg)
    print(
        f"held out {payload['held_out_pairs']} pairs ({len(held_raw)} docs); "
        f"fallback rate {payload['fallback_rate']:.3f}; "
        f"macro-F1 with/without fusion {metrics.macro_f1:.4f}/{base_metrics.macro_f1:.4f}"
    )
    return 0


def cmd_inspect(args) -> int:
    path = args.path
    with open(path, "rb") as f:
        magic = f.read(4)
    if magic == b"KGE1":
        info = inspect_header(path)
    elif magic == b"CTXE":
        info = inspect_ctxe_header(path)
    elif magic == b"FUSE":
        info = inspect_fuse_header(path)
    elif magic == b"ENCB":
        info = inspect_encb_header(path)
    elif magic[:4] == b"#ent":
        kg = load_kg(path)
        info = {
            "format": "kg-text",
            "entities": kg.n_entities,
            "relations": kg.n_relations,
            "triples": len(kg),
        }
    else:
        raise DataError(f"{path}: unrecognized file magic {magic!r}")
    print(json.dumps(info, indent=2, sort_keys=True))
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    p.add_argument("--seed", type=int, help="master seed (overrides config)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kgfuse",
        description="Knowledge-enriched relation extraction pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synthetic", help="generate a synthetic labeled corpus")
    _add_common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_synthetic)

    p = sub.add_parser("build-kg", help="extract a graph from training documents")
    _add_common(p)
    p.add_argument("--docs", required=True, help="training documents (JSONL or TSV)")
    p.add_argument("--format", choices=["jsonl", "tsv"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_kg)

    p = sub.add_parser("train-kge", help="pretrain graph embeddings")
    _add_common(p)
    p.add_argument("--kg", required=True, help="directory from build-kg")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_kge)

    p = sub.add_parser("eval-lp", help="relation-ranking metrics for a trained model")
    _add_common(p)
    p.add_argument("--kg", required=True)
    p.add_argument("--model", required=True, help="model.kge checkpoint")
    p.add_argument("--mode", choices=["raw", "filtered"])
    p.add_argument("--triples", help="optional h<TAB>r<TAB>t query file (default: all graph triples)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval_lp)

    p = sub.add_parser("train-re", help="train the fused relation classifier")
    _add_common(p)
    p.add_argument("--corpus", required=True, help="directory with train.jsonl (and dev.jsonl)")
    p.add_argument("--kg", help="directory from build-kg")
    p.add_argument("--kge", help="model.kge checkpoint")
    p.add_argument("--ctxe", help="external document embeddings (CTXE)")
    p.add_argument("--no-kge", action="store_true", help="context-only arm: no relation fusion")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_re)

    p = sub.add_parser("eval-re", help="score a trained classifier on labeled documents")
    _add_common(p)
    p.add_argument("--docs", required=True, help="labeled documents (JSONL)")
    p.add_argument("--model", required=True, help="directory from train-re")
    p.add_argument("--kg")
    p.add_argument("--kge")
    p.add_argument("--ctxe")
    p.add_argument("--no-kge", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval_re)

    p = sub.add_parser("ablate", help="paired runs with and without relation fusion")
    _add_common(p)
    p.add_argument("--corpus", required=True, help="directory with train/dev/test.jsonl")
    p.add_argument("--ctxe")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("holdout", help="generalization to entity pairs absent from the graph")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--ctxe")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_holdout)

    p = sub.add_parser("inspect", help="print the header of any artifact file")
    p.add_argument("path")
    p.set_defaults(func=cmd_inspect)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2
    except NumericError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return 4
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 3
    except KgfuseError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
