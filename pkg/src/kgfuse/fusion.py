"""Fuse contextual and relational representations and classify relations.

The canonical combination adds the projected relation vector to the
document vector:

    nu_d = H_c + dropout(W* @ H_r + b)    when H_r was inferred
    nu_d = H_c                            otherwise (exact, no-op branch)

``fusion_mode="concat"`` instead feeds [H_c ; dropout(W* @ H_r + b)] to a
softmax head of twice the width, with zeros in the relation half on
fallback. The KGE model is frozen throughout: its tables are read, never
written. The CR-only ablation arm is this same code path with the
relation vector forced absent for every document.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import optim
from .corpus import MarkedDocument
from .encoder import ContextEncoder, encode_document
from .errors import ConfigError, DataError, FileFormatError, NumericError
from .kge import KgeModel, relation_representation
from .kgstore import Vocab

FUSION_MODES = ("add", "concat")


@dataclass
class RelationInference:
    """Maps a marked document to its inferred relation vector, or None.

    Bundles the frozen KGE model with the entity vocabulary used to encode
    it; entities missing from the vocabulary trigger the zero-fallback path.
    """

    model: KgeModel
    entity_vocab: Vocab
    min_score: float | None = None

    @property
    def dim(self) -> int:
        return self.model.relation_repr_dim

    def for_doc(self, doc: MarkedDocument) -> np.ndarray | None:
        e1 = self.entity_vocab.id_of(doc.head_entity) if doc.head_entity in self.entity_vocab else None
        e2 = self.entity_vocab.id_of(doc.tail_entity) if doc.tail_entity in self.entity_vocab else None
        return relation_representation(self.model, e1, e2, min_score=self.min_score)


@dataclass
class FusionClassifier:
    """Projection W*, dropout, and a softmax head over relation labels."""

    labels: list[str]
    d_c: int
    d_r: int
    fusion_mode: str
    w_star: np.ndarray  # (d_r, d_c)
    b_star: np.ndarray  # (d_c,)
    head_w: np.ndarray  # (head_width, |L|)
    head_b: np.ndarray  # (|L|,)
    dropout_p: float = 0.1

    def __post_init__(self):
        self.label_to_id = {lab: i for i, lab in enumerate(self.labels)}

    @property
    def head_width(self) -> int:
        return 2 * self.d_c if self.fusion_mode == "concat" else self.d_c

    def params(self) -> dict[str, np.ndarray]:
        return {"w_star": self.w_star, "b_star": self.b_star, "head_w": self.head_w, "head_b": self.head_b}

    def copy(self) -> "FusionClassifier":
        return FusionClassifier(
            labels=list(self.labels),
            d_c=self.d_c,
            d_r=self.d_r,
            fusion_mode=self.fusion_mode,
            w_star=self.w_star.copy(),
            b_star=self.b_star.copy(),
            head_w=self.head_w.copy(),
            head_b=self.head_b.copy(),
            dropout_p=self.dropout_p,
        )


def init_classifier(
    labels: list[str],
    d_c: int,
    d_r: int,
    rng_wstar: np.random.Generator,
    rng_head: np.random.Generator,
    fusion_mode: str = "add",
    dropout_p: float = 0.1,
) -> FusionClassifier:
    if not labels:
        raise DataError("empty label vocabulary")
    if fusion_mode not in FUSION_MODES:
        raise ConfigError(f"unknown fusion mode {fusion_mode!r}")
    width = 2 * d_c if fusion_mode == "concat" else d_c
    s_w = 1.0 / np.sqrt(d_r)
    s_h = 1.0 / np.sqrt(width)
    return FusionClassifier(
        labels=list(labels),
        d_c=d_c,
        d_r=d_r,
        fusion_mode=fusion_mode,
        w_star=rng_wstar.uniform(-s_w, s_w, size=(d_r, d_c)),
        b_star=np.zeros(d_c),
        head_w=rng_head.uniform(-s_h, s_h, size=(width, len(labels))),
        head_b=np.zeros(len(labels)),
        dropout_p=dropout_p,
    )


def fuse(
    clf: FusionClassifier,
    h_c: np.ndarray,
    h_r: np.ndarray | None,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Combine one document's contextual and relational vectors into nu_d.

    With ``h_r`` absent the contextual vector passes through untouched
    (add mode) or is padded with exact zeros (concat mode). Dropout uses
    inverted scaling and applies only when ``training`` is set.
    """
    if h_c.shape != (clf.d_c,):
        raise ValueError(f"H_c has shape {h_c.shape}, expected ({clf.d_c},)")
    if h_r is None:
        if clf.fusion_mode == "add":
            return h_c
        return np.concatenate([h_c, np.zeros(clf.d_c)])
    if h_r.shape != (clf.d_r,):
        raise ValueError(f"H_r has shape {h_r.shape}, expected ({clf.d_r},)")
    proj = h_r @ clf.w_star + clf.b_star
    if training and clf.dropout_p > 0.0:
        if rng is None:
            raise ConfigError("training-mode fuse needs a random generator for dropout")
        mask = (rng.random(clf.d_c) >= clf.dropout_p) / (1.0 - clf.dropout_p)
        proj = proj * mask
    if clf.fusion_mode == "add":
        return h_c + proj
    return np.concatenate([h_c, proj])


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# batched internals


@dataclass
class _DocBatch:
    """Precomputed per-document inputs: token ids or fixed vectors, H_r, labels."""

    n: int
    tok_ids: list[np.ndarray] | None
    lens: np.ndarray | None
    hc_fixed: np.ndarray | None
    hr: np.ndarray
    present: np.ndarray
    labels: np.ndarray | None


def _prepare_batch(
    docs: list[MarkedDocument],
    encoder: ContextEncoder,
    rel_inf: RelationInference | None,
    d_r: int,
    label_to_id: dict[str, int] | None,
    force_no_kge: bool = False,
) -> _DocBatch:
    n = len(docs)
    hr = np.zeros((n, d_r))
    present = np.zeros(n, dtype=bool)
    if rel_inf is not None:
        for i, doc in enumerate(docs):
            vec = rel_inf.for_doc(doc)
            if vec is not None:
                hr[i] = vec
                present[i] = True
    if force_no_kge:
        present[:] = False
        hr[:] = 0.0
    labels = None
    if label_to_id is not None:
        ids = []
        for doc in docs:
            if doc.label not in label_to_id:
                raise DataError(f"label {doc.label!r} absent from classifier vocabulary")
            ids.append(label_to_id[doc.label])
        labels = np.array(ids, dtype=np.int64)
    if encoder.mode == "builtin":
        tok_ids = [encoder.token_ids(d) for d in docs]
        lens = np.array([len(t) for t in tok_ids], dtype=np.int64)
        if (lens == 0).any():
            raise ConfigError("document with no tokens cannot be encoded")
        return _DocBatch(n, tok_ids, lens, None, hr, present, labels)
    hc = np.stack([encode_document(encoder, d) for d in docs]) if n else np.zeros((0, encoder.dim))
    return _DocBatch(n, None, None, hc, hr, present, labels)


def _hc_for(batch: _DocBatch, emb: np.ndarray | None, idx: np.ndarray) -> tuple[np.ndarray, np.ndarray | None]:
    """H_c rows for the subset ``idx``; also the concatenated token ids (builtin)."""
    if batch.hc_fixed is not None:
        return batch.hc_fixed[idx], None
    tok = np.concatenate([batch.tok_ids[i] for i in idx])
    lens = batch.lens[idx]
    ptr = np.zeros(len(idx), dtype=np.int64)
    np.cumsum(lens[:-1], out=ptr[1:])
    sums = np.add.reduceat(emb[tok], ptr, axis=0)
    return sums / lens[:, None], tok


def _forward(
    clf: FusionClassifier,
    batch: _DocBatch,
    emb: np.ndarray | None,
    idx: np.ndarray,
    dropout_rng: np.random.Generator | None = None,
) -> dict:
    """Logits and intermediates for docs ``idx``; dropout only if rng given."""
    h_c, tok = _hc_for(batch, emb, idx)
    present = batch.present[idx]
    proj = batch.hr[idx][present] @ clf.w_star + clf.b_star
    # No dropout draw when nothing is present: the random stream must be
    # identical between a run with no relation provider and one where every
    # document falls back.
    if dropout_rng is not None and clf.dropout_p > 0.0 and len(proj) > 0:
        mask = (dropout_rng.random(proj.shape) >= clf.dropout_p) / (1.0 - clf.dropout_p)
        proj_dropped = proj * mask
    else:
        mask = None
        proj_dropped = proj
    if clf.fusion_mode == "add":
        nu = h_c.copy()
        nu[present] += proj_dropped
    else:
        nu = np.concatenate([h_c, np.zeros((len(idx), clf.d_c))], axis=1)
        nu[present, clf.d_c :] = proj_dropped
    logits = nu @ clf.head_w + clf.head_b
    return {"h_c": h_c, "tok": tok, "present": present, "mask": mask, "nu": nu, "logits": logits}


def predict_batch(
    clf: FusionClassifier,
    encoder: ContextEncoder,
    rel_inf: RelationInference | None,
    docs: list[MarkedDocument],
    force_no_kge: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Eval-mode predictions: (argmax label ids, softmax probabilities)."""
    batch = _prepare_batch(docs, encoder, rel_inf, clf.d_r, None, force_no_kge)
    emb = encoder.token_emb if encoder.mode == "builtin" else None
    out = _forward(clf, batch, emb, np.arange(batch.n))
    probs = _softmax(out["logits"])
    return probs.argmax(axis=1), probs


def predict(
    clf: FusionClassifier,
    encoder: ContextEncoder,
    rel_inf: RelationInference | None,
    doc: MarkedDocument,
) -> tuple[str, np.ndarray]:
    """Label and probability distribution for one document (eval mode)."""
    pred, probs = predict_batch(clf, encoder, rel_inf, [doc])
    return clf.labels[int(pred[0])], probs[0]


# ---------------------------------------------------------------------------
# metrics


@dataclass
class ReMetrics:
    accuracy: float
    macro_f1: float
    micro_f1: float
    per_label: dict[str, dict[str, float]]

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "micro_f1": self.micro_f1,
            "per_label": self.per_label,
        }


def compute_re_metrics(gold: list[str], predicted: list[str], labels: list[str]) -> ReMetrics:
    """Accuracy, macro/micro F1, and per-label precision/recall/F1.

    Zero-denominator conventions: precision, recall, and F1 are 0 when
    their denominators are 0. Macro-F1 is the unweighted mean over the
    full ``labels`` list, including labels never seen in ``gold``.
    """
    if len(gold) != len(predicted):
        raise DataError(f"{len(gold)} gold labels vs {len(predicted)} predictions")
    if not gold:
        raise DataError("cannot score an empty prediction set")
    known = set(labels)
    for lab in gold:
        if lab not in known:
            raise DataError(f"gold label {lab!r} absent from label vocabulary")

    tp = {lab: 0 for lab in labels}
    fp = {lab: 0 for lab in labels}
    fn = {lab: 0 for lab in labels}
    correct = 0
    for g, p in zip(gold, predicted):
        if g == p:
            correct += 1
            tp[g] += 1
        else:
            fn[g] += 1
            if p in known:
                fp[p] += 1
    per_label = {}
    f1_sum = 0.0
    for lab in labels:
        p_den = tp[lab] + fp[lab]
        r_den = tp[lab] + fn[lab]
        precision = tp[lab] / p_den if p_den else 0.0
        recall = tp[lab] / r_den if r_den else 0.0
        f1 = 2.0 * precision * recall / (precision + recall) if precision + recall else 0.0
        f1_sum += f1
        per_label[lab] = {
            "precision": precision,
            "recall": recall,
            "f1": f1,
            "support": float(r_den),
        }
    tp_sum = sum(tp.values())
    fp_sum = sum(fp.values())
    fn_sum = sum(fn.values())
    micro_p = tp_sum / (tp_sum + fp_sum) if tp_sum + fp_sum else 0.0
    micro_r = tp_sum / (tp_sum + fn_sum) if tp_sum + fn_sum else 0.0
    micro_f1 = 2.0 * micro_p * micro_r / (micro_p + micro_r) if micro_p + micro_r else 0.0
    return ReMetrics(
        accuracy=correct / len(gold),
        macro_f1=f1_sum / len(labels),
        micro_f1=micro_f1,
        per_label=per_label,
    )


def evaluate_re(
    clf: FusionClassifier,
    encoder: ContextEncoder,
    rel_inf: RelationInference | None,
    docs: list[MarkedDocument],
    force_no_kge: bool = False,
) -> ReMetrics:
    """Score eval-mode predictions on docs against their gold labels."""
    if not docs:
        raise DataError("evaluate_re needs a nonempty document list")
    pred_ids, _ = predict_batch(clf, encoder, rel_inf, docs, force_no_kge)
    predicted = [clf.labels[int(i)] for i in pred_ids]
    gold = [d.label for d in docs]
    return compute_re_metrics(gold, predicted, clf.labels)


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainReConfig:
    epochs: int = 100
    learning_rate: float = 0.05
    patience: int = 5
    batch_size: int = 256
    dropout: float = 0.1
    fusion_mode: str = "add"
    seed: int = 0
    class_weights: bool = False
    force_no_kge: bool = False
    d_r: int = 32  # used when no relation provider supplies a dimension

    def validate(self) -> None:
        if self.fusion_mode not in FUSION_MODES:
            raise ConfigError(f"unknown fusion mode {self.fusion_mode!r}")
        if not (0.0 <= self.dropout < 1.0):
            raise ConfigError("dropout must be in [0, 1)")
        for name in ("epochs", "patience", "batch_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")


@dataclass
class TrainReResult:
    classifier: FusionClassifier
    encoder: ContextEncoder
    history: list[tuple[int, str, str, float]]  # (epoch, split, metric, value)
    best_epoch: int
    best_dev_macro_f1: float


def train_re(
    train_docs: list[MarkedDocument],
    dev_docs: list[MarkedDocument],
    rel_inf: RelationInference | None,
    encoder: ContextEncoder,
    cfg: TrainReConfig,
) -> TrainReResult:
    """Cross-entropy training with early stopping on dev macro-F1.

    The label vocabulary comes from the training documents. The passed
    encoder is copied, never mutated, so two arms of an ablation can share
    one initialization; the relation provider's KGE model is frozen.
    Separate child generators drive W* init, head init, and the train loop
    (shuffling + dropout), so runs with and without a relation provider
    consume identical random streams whenever every document falls back.
    """
    cfg.validate()
    labels = sorted({d.label for d in train_docs})
    if not labels:
        raise DataError("empty label vocabulary: no training documents")
    d_r = rel_inf.dim if rel_inf is not None else cfg.d_r

    ss = np.random.SeedSequence(cfg.seed)
    child_w, child_h, child_t = ss.spawn(3)
    rng_train = np.random.default_rng(child_t)
    clf = init_classifier(
        labels,
        encoder.dim,
        d_r,
        np.random.default_rng(child_w),
        np.random.default_rng(child_h),
        fusion_mode=cfg.fusion_mode,
        dropout_p=cfg.dropout,
    )
    enc = ContextEncoder(mode=encoder.mode, dim=encoder.dim, table=encoder.table)
    if encoder.mode == "builtin":
        enc.token_emb = encoder.token_emb.copy()

    train_batch = _prepare_batch(train_docs, enc, rel_inf, d_r, clf.label_to_id, cfg.force_no_kge)
    dev_batch = _prepare_batch(dev_docs, enc, rel_inf, d_r, clf.label_to_id, cfg.force_no_kge) if dev_docs else None

    weights = np.ones(len(labels))
    if cfg.class_weights:
        counts = np.bincount(train_batch.labels, minlength=len(labels)).astype(float)
        weights = np.where(counts > 0, len(train_docs) / (len(labels) * np.maximum(counts, 1.0)), 0.0)

    accums = {name: np.zeros_like(p) for name, p in clf.params().items()}
    emb_accum = np.zeros_like(enc.token_emb) if enc.mode == "builtin" else None

    history: list[tuple[int, str, str, float]] = []
    best_f1 = -1.0
    best_epoch = -1
    best_state: tuple | None = None
    stall = 0
    n = train_batch.n
    for epoch in range(cfg.epochs):
        order = rng_train.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            out = _forward(clf, train_batch, enc.token_emb, idx, dropout_rng=rng_train)
            probs = _softmax(out["logits"])
            y = train_batch.labels[idx]
            w = weights[y]
            w_norm = w / w.sum()
            logp = np.log(np.maximum(probs[np.arange(len(idx)), y], 1e-300))
            loss_sum += float(-(w * logp).sum())

            dlogits = probs.copy()
            dlogits[np.arange(len(idx)), y] -= 1.0
            dlogits *= w_norm[:, None]
            _apply_gradients(clf, enc, accums, emb_accum, train_batch, idx, out, dlogits, cfg.learning_rate)
        mean_loss = loss_sum / n
        if not np.isfinite(mean_loss):
            raise NumericError(f"relation-extraction training diverged at epoch {epoch}")
        history.append((epoch, "train", "loss", mean_loss))

        if dev_batch is not None and dev_batch.n > 0:
            dev_metrics = _eval_on_batch(clf, enc, dev_batch)
            history.append((epoch, "dev", "macro_f1", dev_metrics.macro_f1))
            history.append((epoch, "dev", "accuracy", dev_metrics.accuracy))
            dev_f1 = dev_metrics.macro_f1
        else:
            dev_f1 = -mean_loss  # no dev set: track training loss instead
        if dev_f1 > best_f1:
            best_f1 = dev_f1
            best_epoch = epoch
            best_state = (clf.copy(), enc.token_emb.copy() if enc.mode == "builtin" else None)
            stall = 0
        else:
            stall += 1
            if stall >= cfg.patience:
                break
    if best_state is not None:
        clf, best_emb = best_state
        if best_emb is not None:
            enc.token_emb = best_emb
    return TrainReResult(
        classifier=clf,
        encoder=enc,
        history=history,
        best_epoch=best_epoch,
        best_dev_macro_f1=best_f1 if dev_batch is not None and dev_batch.n > 0 else float("nan"),
    )


def _eval_on_batch(clf: FusionClassifier, enc: ContextEncoder, batch: _DocBatch) -> ReMetrics:
    out = _forward(clf, batch, enc.token_emb, np.arange(batch.n))
    pred = out["logits"].argmax(axis=1)
    gold = [clf.labels[int(i)] for i in batch.labels]
    predicted = [clf.labels[int(i)] for i in pred]
    return compute_re_metrics(gold, predicted, clf.labels)


def _apply_gradients(clf, enc, accums, emb_accum, batch, idx, out, dlogits, lr) -> None:
    nu, present, mask, h_c = out["nu"], out["present"], out["mask"], out["h_c"]
    grad_head_w = nu.T @ dlogits
    grad_head_b = dlogits.sum(axis=0)
    dnu = dlogits @ clf.head_w.T
    if clf.fusion_mode == "add":
        dh_c = dnu
        dmasked = dnu[present]
    else:
        dh_c = dnu[:, : clf.d_c]
        dmasked = dnu[present, clf.d_c :]
    if mask is not None:
        dproj = dmasked * mask
    else:
        dproj = dmasked
    hr_present = batch.hr[idx][present]
    grad_w_star = hr_present.T @ dproj
    grad_b_star = dproj.sum(axis=0)

    optim.adagrad_dense(clf.head_w, accums["head_w"], grad_head_w, lr)
    optim.adagrad_dense(clf.head_b, accums["head_b"], grad_head_b, lr)
    optim.adagrad_dense(clf.w_star, accums["w_star"], grad_w_star, lr)
    optim.adagrad_dense(clf.b_star, accums["b_star"], grad_b_star, lr)

    if enc.mode == "builtin":
        lens = batch.lens[idx]
        contrib = np.repeat(dh_c / lens[:, None], lens, axis=0)
        optim.adagrad_sparse(enc.token_emb, emb_accum, out["tok"], contrib, lr)


# ---------------------------------------------------------------------------
# checkpoint format: magic "FUSE", u32 d_c, u32 d_r, u32 |L|, u8 fusion mode
# (0 add, 1 concat), label vocab as u16-length-prefixed UTF-8 strings, then
# little-endian f32 matrices: w_star, b_star, head_w, head_b.

_FUSE_MAGIC = b"FUSE"
_FUSE_HEADER = struct.Struct("<4sIIIB")
_LABEL_LEN = struct.Struct("<H")
_MODE_BYTE = {"add": 0, "concat": 1}
_BYTE_MODE = {v: k for k, v in _MODE_BYTE.items()}


def save_classifier(path: str, clf: FusionClassifier) -> None:
    with open(path, "wb") as f:
        f.write(_FUSE_HEADER.pack(_FUSE_MAGIC, clf.d_c, clf.d_r, len(clf.labels), _MODE_BYTE[clf.fusion_mode]))
        for lab in clf.labels:
            encoded = lab.encode("utf-8")
            f.write(_LABEL_LEN.pack(len(encoded)))
            f.write(encoded)
        for name in ("w_star", "b_star", "head_w", "head_b"):
            f.write(getattr(clf, name).astype("<f4").tobytes())


def load_classifier(path: str) -> FusionClassifier:
    with open(path, "rb") as f:
        raw = f.read(_FUSE_HEADER.size)
        if len(raw) < _FUSE_HEADER.size:
            raise FileFormatError(f"{path}: truncated header")
        magic, d_c, d_r, n_labels, mode_byte = _FUSE_HEADER.unpack(raw)
        if magic != _FUSE_MAGIC:
            raise FileFormatError(f"{path}: bad magic {magic!r} (expected {_FUSE_MAGIC!r})")
        if mode_byte not in _BYTE_MODE:
            raise FileFormatError(f"{path}: unknown fusion mode byte {mode_byte}")
        labels = []
        for _ in range(n_labels):
            (ln,) = _LABEL_LEN.unpack(f.read(_LABEL_LEN.size))
            labels.append(f.read(ln).decode("utf-8"))
        mode = _BYTE_MODE[mode_byte]
        width = 2 * d_c if mode == "concat" else d_c

        def read(shape):
            count = int(np.prod(shape))
            raw = f.read(count * 4)
            if len(raw) != count * 4:
                raise FileFormatError(f"{path}: truncated matrix block")
            return np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(shape)

        return FusionClassifier(
            labels=labels,
            d_c=d_c,
            d_r=d_r,
            fusion_mode=mode,
            w_star=read((d_r, d_c)),
            b_star=read((d_c,)),
            head_w=read((width, n_labels)),
            head_b=read((n_labels,)),
        )


def inspect_fuse_header(path: str) -> dict:
    with open(path, "rb") as f:
        raw = f.read(_FUSE_HEADER.size)
    if len(raw) < _FUSE_HEADER.size:
        raise FileFormatError(f"{path}: truncated header")
    magic, d_c, d_r, n_labels, mode_byte = _FUSE_HEADER.unpack(raw)
    if magic != _FUSE_MAGIC:
        raise FileFormatError(f"{path}: bad magic {magic!r}")
    return {
        "magic": _FUSE_MAGIC.decode(),
        "d_c": d_c,
        "d_r": d_r,
        "n_labels": n_labels,
        "fusion_mode": _BYTE_MODE.get(mode_byte, f"unknown({mode_byte})"),
    }
