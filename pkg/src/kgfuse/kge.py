"""Knowledge-graph embedding models: TransE, DistMult, ComplEx.

Scoring conventions (higher = more plausible):

* TransE:   s(h,r,t) = -|| e_h + e_r - e_t ||_2
* DistMult: s(h,r,t) = sum_i h_i * r_i * t_i
            (the relation vector is the diagonal of the bilinear form)
* ComplEx:  s(h,r,t) = Re( sum_i h_i * r_i * conj(t_i) ), complex rows
            stored as separate real/imaginary matrices.

Training losses (per positive/negative pair):

* TransE:   max(0, margin + s_neg - s_pos), entity rows projected to unit
            L2 norm after every epoch.
* DistMult / ComplEx: softplus(-s_pos) + softplus(s_neg) plus an L2
            penalty on every embedding row occurrence in the pair.

All gradients are closed-form; the per-pair path and the batched training
path share the same slot-gradient kernels.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import optim
from .errors import ConfigError, FileFormatError, NumericError
from .kgstore import KnowledgeGraph, sample_negative

TRANSE, DISTMULT, COMPLEX = "transe", "distmult", "complex"
MODEL_KINDS = (TRANSE, DISTMULT, COMPLEX)

_KIND_BYTE = {TRANSE: 0, DISTMULT: 1, COMPLEX: 2}
_BYTE_KIND = {v: k for k, v in _KIND_BYTE.items()}

_NORM_FLOOR = 1e-12  # guards the TransE gradient at exact translation


@dataclass
class KgeModel:
    """Entity/relation embedding tables for one model kind."""

    kind: str
    dim: int
    entity_re: np.ndarray
    relation_re: np.ndarray
    entity_im: np.ndarray | None = None
    relation_im: np.ndarray | None = None

    @property
    def n_entities(self) -> int:
        return self.entity_re.shape[0]

    @property
    def n_relations(self) -> int:
        return self.relation_re.shape[0]

    @property
    def is_complex(self) -> bool:
        return self.kind == COMPLEX

    @property
    def relation_repr_dim(self) -> int:
        """Dimension of the inferred relation vector fed downstream."""
        return 2 * self.dim if self.is_complex else self.dim

    def tables(self) -> dict[str, np.ndarray]:
        out = {"entity_re": self.entity_re, "relation_re": self.relation_re}
        if self.is_complex:
            out["entity_im"] = self.entity_im
            out["relation_im"] = self.relation_im
        return out

    def check_finite(self, context: str = "") -> None:
        for name, table in self.tables().items():
            if not np.all(np.isfinite(table)):
                raise NumericError(f"non-finite values in {name}{' ' + context if context else ''}")

    def copy(self) -> "KgeModel":
        return KgeModel(
            kind=self.kind,
            dim=self.dim,
            entity_re=self.entity_re.copy(),
            relation_re=self.relation_re.copy(),
            entity_im=None if self.entity_im is None else self.entity_im.copy(),
            relation_im=None if self.relation_im is None else self.relation_im.copy(),
        )


def init_model(kind: str, dim: int, n_entities: int, n_relations: int, rng: np.random.Generator) -> KgeModel:
    """Uniform(-6/sqrt(d), 6/sqrt(d)) initialization; TransE entities normalized."""
    if kind not in MODEL_KINDS:
        raise ConfigError(f"unknown KGE model kind {kind!r}")
    if dim < 1 or n_entities < 1 or n_relations < 1:
        raise ConfigError("model dimensions and table sizes must be positive")
    scale = 6.0 / np.sqrt(dim)

    def table(rows):
        return rng.uniform(-scale, scale, size=(rows, dim))

    model = KgeModel(kind=kind, dim=dim, entity_re=table(n_entities), relation_re=table(n_relations))
    if kind == COMPLEX:
        model.entity_im = table(n_entities)
        model.relation_im = table(n_relations)
    if kind == TRANSE:
        _normalize_rows(model.entity_re)
    return model


def _normalize_rows(mat: np.ndarray) -> None:
    norms = np.linalg.norm(mat, axis=1, keepdims=True)
    np.divide(mat, norms, out=mat, where=norms > _NORM_FLOOR)


# ---------------------------------------------------------------------------
# scoring


def score_batch(model: KgeModel, hs: np.ndarray, rs: np.ndarray, ts: np.ndarray) -> np.ndarray:
    """Scores for aligned id arrays; shape (n,)."""
    if model.kind == TRANSE:
        diff = model.entity_re[hs] + model.relation_re[rs] - model.entity_re[ts]
        return -np.linalg.norm(diff, axis=-1)
    if model.kind == DISTMULT:
        return np.sum(model.entity_re[hs] * model.relation_re[rs] * model.entity_re[ts], axis=-1)
    a, b = model.entity_re[hs], model.entity_im[hs]
    c, d = model.relation_re[rs], model.relation_im[rs]
    e, f = model.entity_re[ts], model.entity_im[ts]
    return np.sum(a * c * e + b * c * f + a * d * f - b * d * e, axis=-1)


def score(model: KgeModel, h: int, r: int, t: int) -> float:
    """Plausibility score of a single triple."""
    for idx, limit, what in ((h, model.n_entities, "head"), (r, model.n_relations, "relation"), (t, model.n_entities, "tail")):
        if not (0 <= idx < limit):
            raise IndexError(f"{what} id {idx} out of range (< {limit})")
    return float(score_batch(model, np.array([h]), np.array([r]), np.array([t]))[0])


def score_all_relations(model: KgeModel, h: int, t: int) -> np.ndarray:
    """Scores of (h, r, t) for every relation r; shape (|R|,)."""
    rs = np.arange(model.n_relations)
    return score_batch(model, np.full_like(rs, h), rs, np.full_like(rs, t))


def _slot_grads(model: KgeModel, hs: np.ndarray, rs: np.ndarray, ts: np.ndarray) -> dict[str, np.ndarray]:
    """d score / d embedding-row for each slot; arrays of shape (n, d).

    Keys: h_re, r_re, t_re and, for ComplEx, h_im, r_im, t_im.
    """
    if model.kind == TRANSE:
        diff = model.entity_re[hs] + model.relation_re[rs] - model.entity_re[ts]
        norm = np.linalg.norm(diff, axis=-1, keepdims=True)
        unit = np.divide(diff, norm, out=np.zeros_like(diff), where=norm > _NORM_FLOOR)
        return {"h_re": -unit, "r_re": -unit, "t_re": unit}
    if model.kind == DISTMULT:
        eh, er, et = model.entity_re[hs], model.relation_re[rs], model.entity_re[ts]
        return {"h_re": er * et, "r_re": eh * et, "t_re": eh * er}
    a, b = model.entity_re[hs], model.entity_im[hs]
    c, d = model.relation_re[rs], model.relation_im[rs]
    e, f = model.entity_re[ts], model.entity_im[ts]
    return {
        "h_re": c * e + d * f,
        "h_im": c * f - d * e,
        "r_re": a * e + b * f,
        "r_im": a * f - b * e,
        "t_re": a * c - b * d,
        "t_im": a * d + b * c,
    }


# ---------------------------------------------------------------------------
# losses and gradients


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=float)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def _pair_loss_terms(
    model: KgeModel,
    pos: np.ndarray,
    neg: np.ndarray,
    margin: float,
    l2_lambda: float,
) -> tuple[np.ndarray, dict[str, tuple[np.ndarray, np.ndarray]]]:
    """Per-pair losses plus per-table (row_ids, gradient_rows) contributions.

    ``pos`` and ``neg`` are (n, 3) id arrays. The returned contributions may
    list the same row several times; accumulation is the caller's job.
    """
    hp, rp, tp = pos[:, 0], pos[:, 1], pos[:, 2]
    hn, rn, tn = neg[:, 0], neg[:, 1], neg[:, 2]
    s_p = score_batch(model, hp, rp, tp)
    s_n = score_batch(model, hn, rn, tn)
    g_p = _slot_grads(model, hp, rp, tp)
    g_n = _slot_grads(model, hn, rn, tn)

    if model.kind == TRANSE:
        violation = margin + s_n - s_p
        losses = np.maximum(0.0, violation)
        active = (violation > 0).astype(float)
        coef_p, coef_n = -active, active
    else:
        losses = _softplus(-s_p) + _softplus(s_n)
        coef_p, coef_n = -_sigmoid(-s_p), _sigmoid(s_n)

    cp, cn = coef_p[:, None], coef_n[:, None]
    ent_rows = np.concatenate([hp, tp, hn, tn])
    ent_grads = np.concatenate([cp * g_p["h_re"], cp * g_p["t_re"], cn * g_n["h_re"], cn * g_n["t_re"]])
    rel_rows = np.concatenate([rp, rn])
    rel_grads = np.concatenate([cp * g_p["r_re"], cn * g_n["r_re"]])
    contrib = {"entity_re": (ent_rows, ent_grads), "relation_re": (rel_rows, rel_grads)}

    if model.is_complex:
        ent_im = np.concatenate([cp * g_p["h_im"], cp * g_p["t_im"], cn * g_n["h_im"], cn * g_n["t_im"]])
        rel_im = np.concatenate([cp * g_p["r_im"], cn * g_n["r_im"]])
        contrib["entity_im"] = (ent_rows, ent_im)
        contrib["relation_im"] = (rel_rows, rel_im)

    if model.kind != TRANSE and l2_lambda > 0.0:
        # one penalty per row occurrence: lambda * ||row||^2, six slots per pair
        e_re, r_re = model.entity_re, model.relation_re
        losses = losses + l2_lambda * (
            _sq(e_re[hp]) + _sq(r_re[rp]) + _sq(e_re[tp]) + _sq(e_re[hn]) + _sq(r_re[rn]) + _sq(e_re[tn])
        )
        contrib["entity_re"] = _append(contrib["entity_re"], ent_rows, 2.0 * l2_lambda * e_re[ent_rows])
        contrib["relation_re"] = _append(contrib["relation_re"], rel_rows, 2.0 * l2_lambda * r_re[rel_rows])
        if model.is_complex:
            e_im, r_im = model.entity_im, model.relation_im
            losses = losses + l2_lambda * (
                _sq(e_im[hp]) + _sq(r_im[rp]) + _sq(e_im[tp]) + _sq(e_im[hn]) + _sq(r_im[rn]) + _sq(e_im[tn])
            )
            contrib["entity_im"] = _append(contrib["entity_im"], ent_rows, 2.0 * l2_lambda * e_im[ent_rows])
            contrib["relation_im"] = _append(contrib["relation_im"], rel_rows, 2.0 * l2_lambda * r_im[rel_rows])
    return losses, contrib


def _sq(rows: np.ndarray) -> np.ndarray:
    return np.sum(rows * rows, axis=-1)


def _append(pair: tuple[np.ndarray, np.ndarray], rows: np.ndarray, grads: np.ndarray):
    return np.concatenate([pair[0], rows]), np.concatenate([pair[1], grads])


def pair_loss(
    model: KgeModel,
    positive: tuple[int, int, int],
    negative: tuple[int, int, int],
    margin: float = 1.0,
    l2_lambda: float = 1e-3,
) -> float:
    """Loss of one positive/negative pair under the model's loss form."""
    losses, _ = _pair_loss_terms(
        model, np.array([positive]), np.array([negative]), margin, l2_lambda
    )
    return float(losses[0])


@dataclass
class GradientBundle:
    """Per-row gradients of a pair loss, keyed by table name then row id."""

    rows: dict[str, dict[int, np.ndarray]] = field(default_factory=dict)

    def add(self, table: str, row: int, grad: np.ndarray) -> None:
        slot = self.rows.setdefault(table, {})
        if row in slot:
            slot[row] = slot[row] + grad
        else:
            slot[row] = grad.copy()

    def get(self, table: str, row: int) -> np.ndarray | None:
        return self.rows.get(table, {}).get(row)


def kge_gradients(
    model: KgeModel,
    positive: tuple[int, int, int],
    negative: tuple[int, int, int],
    margin: float = 1.0,
    l2_lambda: float = 1e-3,
) -> GradientBundle:
    """Closed-form gradient of the per-pair loss w.r.t. every touched row."""
    _, contrib = _pair_loss_terms(
        model, np.array([positive]), np.array([negative]), margin, l2_lambda
    )
    bundle = GradientBundle()
    for table, (rows, grads) in contrib.items():
        for row, grad in zip(rows.tolist(), grads):
            bundle.add(table, row, grad)
    return bundle


# ---------------------------------------------------------------------------
# training


@dataclass
class KgeTrainConfig:
    kind: str = COMPLEX
    dim: int = 200
    epochs: int = 100
    learning_rate: float = 0.1
    optimizer: str = "adagrad"
    margin: float = 1.0
    l2_lambda: float = 1e-3
    negatives_per_positive: int = 10
    batch_size: int = 512
    seed: int = 0
    neg_strategy: str = "mixed"

    def validate(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise ConfigError(f"unknown KGE model kind {self.kind!r}")
        if self.optimizer not in ("sgd", "adagrad"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        for name in ("dim", "epochs", "negatives_per_positive", "batch_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        for name in ("learning_rate", "margin"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.l2_lambda < 0:
            raise ConfigError("l2_lambda must be >= 0")


def train_kge(kg: KnowledgeGraph, cfg: KgeTrainConfig) -> tuple[KgeModel, list[float]]:
    """Train a model on the graph; returns the model and per-epoch mean loss.

    Deterministic for a fixed config: triples iterate in canonical order
    under a single seeded generator that drives initialization, shuffling,
    and negative sampling.
    """
    cfg.validate()
    if len(kg) == 0:
        raise ConfigError("cannot train on an empty knowledge graph")
    rng = np.random.default_rng(cfg.seed)
    model = init_model(cfg.kind, cfg.dim, kg.n_entities, kg.n_relations, rng)
    triples = np.array(kg.sorted_triples(), dtype=np.int64)
    k = cfg.negatives_per_positive
    accums = None
    if cfg.optimizer == "adagrad":
        accums = {name: np.zeros_like(table) for name, table in model.tables().items()}

    epoch_losses: list[float] = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(triples))
        loss_sum, pair_count = 0.0, 0
        for start in range(0, len(triples), cfg.batch_size):
            batch = triples[order[start : start + cfg.batch_size]]
            pos = np.repeat(batch, k, axis=0)
            neg = np.empty_like(pos)
            keep = np.ones(len(pos), dtype=bool)
            for i, triple in enumerate(map(tuple, pos)):
                sample = sample_negative(triple, kg, rng, strategy=cfg.neg_strategy)
                neg[i] = sample.triple
                keep[i] = not sample.flagged
            if not keep.all():
                pos, neg = pos[keep], neg[keep]
            if len(pos) == 0:
                continue
            losses, contrib = _pair_loss_terms(model, pos, neg, cfg.margin, cfg.l2_lambda)
            loss_sum += float(losses.sum())
            pair_count += len(losses)
            tables = model.tables()
            for name, (rows, grads) in contrib.items():
                if cfg.optimizer == "adagrad":
                    optim.adagrad_sparse(tables[name], accums[name], rows, grads, cfg.learning_rate)
                else:
                    optim.sgd_sparse(tables[name], rows, grads, cfg.learning_rate)
        mean_loss = loss_sum / max(pair_count, 1)
        if not np.isfinite(mean_loss):
            raise NumericError(f"training loss diverged (non-finite) at epoch {epoch}")
        epoch_losses.append(mean_loss)
        if cfg.kind == TRANSE:
            _normalize_rows(model.entity_re)
        model.check_finite(context=f"at epoch {epoch}")
    return model, epoch_losses


# ---------------------------------------------------------------------------
# evaluation


@dataclass
class LpMetrics:
    """Link-prediction summary over the relation slot."""

    mrr: float
    hits_at: dict[int, float]
    mode: str

    def to_dict(self) -> dict:
        return {
            "mrr": self.mrr,
            "hits_at": {str(n): v for n, v in sorted(self.hits_at.items())},
            "mode": self.mode,
        }


def rank_relations(
    model: KgeModel,
    h: int,
    t: int,
    gold: int,
    kg: KnowledgeGraph,
    mode: str = "filtered",
) -> float:
    """Rank of the gold relation among all relations scored on (h, ?, t).

    Filtered mode drops candidates r' != gold with (h, r', t) in the graph.
    Ties resolve to the mean of the optimistic and pessimistic rank.
    """
    if mode not in ("raw", "filtered"):
        raise ConfigError(f"unknown ranking mode {mode!r}")
    scores = score_all_relations(model, h, t)
    keep = np.ones(model.n_relations, dtype=bool)
    if mode == "filtered":
        for r in kg.relations_for(h, t):
            if r != gold:
                keep[r] = False
    gold_score = scores[gold]
    cand = scores[keep]
    higher = int(np.count_nonzero(cand > gold_score))
    ties = int(np.count_nonzero(cand == gold_score)) - 1
    return 1.0 + higher + 0.5 * ties


def evaluate_link_prediction(
    model: KgeModel,
    test_triples: list[tuple[int, int, int]],
    kg: KnowledgeGraph,
    mode: str = "filtered",
    hits_ns: tuple[int, ...] = (1, 10),
) -> LpMetrics:
    """MRR and Hits@N of relation ranking over the given queries."""
    if not test_triples:
        raise ConfigError("evaluate_link_prediction needs a nonempty test set")
    ranks = np.array([rank_relations(model, h, t, r, kg, mode) for h, r, t in test_triples])
    return LpMetrics(
        mrr=float(np.mean(1.0 / ranks)),
        hits_at={n: float(np.mean(ranks <= n)) for n in hits_ns},
        mode=mode,
    )


def relation_representation(
    model: KgeModel,
    e1: int | None,
    e2: int | None,
    min_score: float | None = None,
) -> np.ndarray | None:
    """Infer the relation vector for an entity pair, or None on fallback.

    Returns None when either entity is out of vocabulary (the caller then
    uses the contextual vector alone) or, if ``min_score`` is set, when the
    best relation scores below it. Otherwise, with r = argmax score(e1, r, e2):

    * TransE:   the relation embedding row itself.
    * DistMult: h * r * t elementwise; components sum to the score.
    * ComplEx:  [Re(h * r * conj(t)) ; Im(h * r * conj(t))], length 2*dim;
                the real half sums to the score.
    """
    if e1 is None or e2 is None:
        return None
    scores = score_all_relations(model, e1, e2)
    best = int(np.argmax(scores))
    if min_score is not None and scores[best] < min_score:
        return None
    if model.kind == TRANSE:
        return model.relation_re[best].copy()
    if model.kind == DISTMULT:
        return model.entity_re[e1] * model.relation_re[best] * model.entity_re[e2]
    a, b = model.entity_re[e1], model.entity_im[e1]
    c, d = model.relation_re[best], model.relation_im[best]
    e, f = model.entity_re[e2], model.entity_im[e2]
    real = a * c * e + b * c * f + a * d * f - b * d * e
    imag = a * d * e + b * c * e - a * c * f + b * d * f
    return np.concatenate([real, imag])


# ---------------------------------------------------------------------------
# checkpoint format: magic "KGE1", kind byte, u32 |E|, u32 |R|, u32 dim,
# u8 complex flag, then row-major little-endian f32 matrices: entity Re,
# relation Re, then entity Im and relation Im when complex.

_KGE_MAGIC = b"KGE1"
_HEADER = struct.Struct("<4sBIIIB")


def save_model(path: str, model: KgeModel) -> None:
    with open(path, "wb") as f:
        f.write(
            _HEADER.pack(
                _KGE_MAGIC,
                _KIND_BYTE[model.kind],
                model.n_entities,
                model.n_relations,
                model.dim,
                1 if model.is_complex else 0,
            )
        )
        f.write(model.entity_re.astype("<f4").tobytes())
        f.write(model.relation_re.astype("<f4").tobytes())
        if model.is_complex:
            f.write(model.entity_im.astype("<f4").tobytes())
            f.write(model.relation_im.astype("<f4").tobytes())


def inspect_header(path: str) -> dict:
    """Decode the checkpoint header without loading the matrices."""
    with open(path, "rb") as f:
        raw = f.read(_HEADER.size)
    if len(raw) < _HEADER.size:
        raise FileFormatError(f"{path}: truncated header")
    magic, kind_byte, n_e, n_r, dim, cflag = _HEADER.unpack(raw)
    if magic != _KGE_MAGIC:
        raise FileFormatError(f"{path}: bad magic {magic!r} (expected {_KGE_MAGIC!r})")
    if kind_byte not in _BYTE_KIND:
        raise FileFormatError(f"{path}: unknown model kind byte {kind_byte}")
    return {
        "magic": _KGE_MAGIC.decode(),
        "kind": _BYTE_KIND[kind_byte],
        "n_entities": n_e,
        "n_relations": n_r,
        "dim": dim,
        "complex": bool(cflag),
    }


def load_model(path: str) -> KgeModel:
    header = inspect_header(path)
    n_e, n_r, dim = header["n_entities"], header["n_relations"], header["dim"]
    with open(path, "rb") as f:
        f.seek(_HEADER.size)

        def read_matrix(rows: int) -> np.ndarray:
            raw = f.read(rows * dim * 4)
            if len(raw) != rows * dim * 4:
                raise FileFormatError(f"{path}: truncated matrix block")
            return np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(rows, dim)

        model = KgeModel(
            kind=header["kind"],
            dim=dim,
            entity_re=read_matrix(n_e),
            relation_re=read_matrix(n_r),
        )
        if header["complex"]:
            model.entity_im = read_matrix(n_e)
            model.relation_im = read_matrix(n_r)
    model.check_finite(context=f"loaded from {path}")
    return model
