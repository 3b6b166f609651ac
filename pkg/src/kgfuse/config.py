"""Flat key=value run configuration with typed defaults and seed derivation.

Config files hold one ``section.key = value`` pair per line; ``#`` starts
a comment. Every key has a typed default below, values are coerced to the
default's type, and unknown keys are rejected so typos fail loudly.
Command-line ``--set key=value`` overrides apply on top of the file, and
each pipeline stage derives its own seed from the master seed so stages
can be re-run or reordered without perturbing one another's streams.
"""

from __future__ import annotations

import hashlib

from .errors import ConfigError

# One entry per key: the default value fixes the type. Empty string means
# "unset" for optional values.
DEFAULTS: dict[str, object] = {
    "seed": 0,
    "corpus.format": "jsonl",
    "synthetic.n_entity_types": 4,
    "synthetic.n_relations": 4,
    "synthetic.n_entities": 40,
    "synthetic.n_pairs": 300,
    "synthetic.n_context_pairs": 300,
    "synthetic.n_docs": 1500,
    "synthetic.pair_determined_fraction": 0.75,
    "synthetic.noise_vocab": 200,
    "synthetic.train_fraction": 0.7,
    "synthetic.dev_fraction": 0.15,
    "kge.kind": "complex",
    "kge.dim": 200,
    "kge.epochs": 100,
    "kge.learning_rate": 0.1,
    "kge.optimizer": "adagrad",
    "kge.margin": 1.0,
    "kge.l2": 0.001,
    "kge.negatives": 10,
    "kge.batch_size": 512,
    "kge.neg_strategy": "mixed",
    "lp.mode": "filtered",
    "lp.hits": "1,10",
    "encoder.mode": "builtin",
    "encoder.dim": 128,
    "encoder.vocab_size": 65536,
    "fusion.mode": "add",
    "fusion.dropout": 0.1,
    "fusion.learning_rate": 0.05,
    "fusion.epochs": 100,
    "fusion.patience": 5,
    "fusion.batch_size": 256,
    "fusion.class_weights": False,
    "fusion.min_score": "",
    "holdout.fraction": 0.2,
    "ablate.seeds": "0,1,2",
}


def _coerce(key: str, raw: str) -> object:
    default = DEFAULTS[key]
    try:
        if isinstance(default, bool):
            low = raw.strip().lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw.strip())
        if isinstance(default, float):
            return float(raw.strip())
        return raw.strip()
    except ValueError:
        raise ConfigError(
            f"config key {key!r}: cannot parse {raw!r} as {type(default).__name__}"
        ) from None


def _set(cfg: dict[str, object], key: str, raw: str, where: str) -> None:
    if key not in DEFAULTS:
        raise ConfigError(f"{where}: unknown config key {key!r}")
    cfg[key] = _coerce(key, raw)


def load_config(
    path: str | None = None,
    overrides: list[str] | None = None,
    seed: int | None = None,
) -> dict[str, object]:
    """Defaults, then the file, then --set overrides, then --seed."""
    cfg = dict(DEFAULTS)
    if path is not None:
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                stripped = line.split("#", 1)[0].strip()
                if not stripped:
                    continue
                if "=" not in stripped:
                    raise ConfigError(f"{path}:{lineno}: expected key=value, got {line.strip()!r}")
                key, raw = stripped.split("=", 1)
                _set(cfg, key.strip(), raw, f"{path}:{lineno}")
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"--set {item!r}: expected key=value")
        key, raw = item.split("=", 1)
        _set(cfg, key.strip(), raw, f"--set {item!r}")
    if seed is not None:
        cfg["seed"] = int(seed)
    return cfg


def write_resolved(path: str, cfg: dict[str, object]) -> None:
    """Persist the fully resolved configuration, one sorted key per line."""
    with open(path, "w", encoding="utf-8") as f:
        for key in sorted(cfg):
            value = cfg[key]
            if isinstance(value, bool):
                value = "true" if value else "false"
            f.write(f"{key} = {value}\n")


def stage_seed(master_seed: int, stage: str) -> int:
    """Deterministic per-stage seed: first 8 bytes of sha256("master:stage")."""
    digest = hashlib.sha256(f"{master_seed}:{stage}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def optional_float(cfg: dict[str, object], key: str) -> float | None:
    """A float-valued key whose empty-string default means "unset"."""
    raw = str(cfg[key]).strip()
    if not raw:
        return None
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot parse {raw!r} as float") from None
