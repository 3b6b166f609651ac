"""Export behavior: batching, truncation policy, determinism, file layout."""

import json
import struct

import numpy as np
import pytest

from ctx_exporter.cli import main
from ctx_exporter.errors import ExporterError, ExportError
from ctx_exporter.exporter import ExportJob, export_embeddings, write_ctxe
from test_export_corpus import _rec, _write_jsonl


def _parse_ctxe(path):
    with open(path, "rb") as f:
        data = f.read()
    magic, count, dim = struct.unpack_from("<4sII", data, 0)
    assert magic == b"CTXE"
    offset = 12
    vectors = {}
    for _ in range(count):
        (idlen,) = struct.unpack_from("<H", data, offset)
        offset += 2
        doc_id = data[offset : offset + idlen].decode("utf-8")
        offset += idlen
        vectors[doc_id] = np.frombuffer(data, dtype="<f4", count=dim, offset=offset).copy()
        offset += 4 * dim
    assert offset == len(data), "trailing bytes after the last record"
    return dim, vectors


def _doc_with_context(doc_id, n_before, n_after, label="binds"):
    """A record whose entities sit after n_before and before n_after noise words."""
    words = [f"w{i % 9}" for i in range(n_before)] + ["drug", "binds", "gene"]
    words += [f"w{i % 7}" for i in range(n_after)]
    text = " ".join(words)
    offset = 0
    spans = {}
    for word in words:
        if word in ("drug", "gene") and word not in spans:
            spans[word] = (offset, offset + len(word))
        offset += len(word) + 1
    return {
        "id": doc_id, "text": text, "label": label,
        "e1_start": spans["drug"][0], "e1_end": spans["drug"][1],
        "e2_start": spans["gene"][0], "e2_end": spans["gene"][1],
    }


def _job(tmp_path, records, name="docs.jsonl", out="vecs.ctxe", **kw):
    corpus = tmp_path / name
    _write_jsonl(corpus, records)
    return ExportJob(
        corpus_path=str(corpus),
        model_name=kw.pop("model_name"),
        output_path=str(tmp_path / out),
        **kw,
    )


def test_export_writes_all_documents(tmp_path, tiny_encoder_dir):
    records = [_doc_with_context(f"d{i}", 2, 2) for i in range(5)]
    job = _job(tmp_path, records, model_name=tiny_encoder_dir, batch_size=2)
    report = export_embeddings(job)
    assert report.written == 5
    assert report.dim == 32
    assert report.clean
    dim, vectors = _parse_ctxe(job.output_path)
    assert dim == 32
    assert list(vectors) == [f"d{i}" for i in range(5)]
    for vec in vectors.values():
        assert np.isfinite(vec).all()


def test_export_is_deterministic(tmp_path, tiny_encoder_dir):
    records = [_doc_with_context(f"d{i}", 3, 4) for i in range(7)]
    job_a = _job(tmp_path, records, out="a.ctxe", model_name=tiny_encoder_dir, batch_size=3)
    job_b = _job(tmp_path, records, out="b.ctxe", model_name=tiny_encoder_dir, batch_size=3)
    export_embeddings(job_a)
    export_embeddings(job_b)
    with open(job_a.output_path, "rb") as f:
        bytes_a = f.read()
    with open(job_b.output_path, "rb") as f:
        bytes_b = f.read()
    assert bytes_a == bytes_b


def test_empty_corpus_writes_header_only_file(tmp_path, tiny_encoder_dir):
    job = _job(tmp_path, [], model_name=tiny_encoder_dir)
    report = export_embeddings(job)
    assert report.written == 0
    with open(job.output_path, "rb") as f:
        data = f.read()
    assert len(data) == 12
    assert struct.unpack("<4sII", data) == (b"CTXE", 0, 32)


def test_marker_tokens_stay_atomic(tiny_encoder_dir):
    from ctx_exporter.exporter import _load_encoder

    tokenizer, model = _load_encoder(tiny_encoder_dir)
    assert "<<" in tokenizer.tokenize("x<<y")
    assert "]]" in tokenizer.tokenize("q]]r")
    # the embedding matrix grew to cover the four new ids
    assert model.get_input_embeddings().weight.shape[0] == len(tokenizer)


def test_long_tail_is_truncated_not_skipped(tmp_path, tiny_encoder_dir):
    records = [_doc_with_context("keep", 1, 1), _doc_with_context("long", 0, 40)]
    job = _job(tmp_path, records, model_name=tiny_encoder_dir, max_sequence_length=16)
    report = export_embeddings(job)
    assert report.written == 2
    assert report.truncated_ids == ["long"]
    assert report.skipped_ids == []
    _, vectors = _parse_ctxe(job.output_path)
    assert list(vectors) == ["keep", "long"]


def test_span_past_budget_is_skipped(tmp_path, tiny_encoder_dir):
    records = [
        _doc_with_context("ok", 1, 1),
        _doc_with_context("buried", 40, 0),
        _doc_with_context("ok2", 2, 2),
    ]
    job = _job(tmp_path, records, model_name=tiny_encoder_dir, max_sequence_length=16)
    report = export_embeddings(job)
    assert report.written == 2
    assert report.skipped_ids == ["buried"]
    assert not report.clean
    _, vectors = _parse_ctxe(job.output_path)
    assert list(vectors) == ["ok", "ok2"]


def test_first_position_pooling_matches_manual_forward(tmp_path, tiny_encoder_dir):
    import torch
    from transformers import AutoModel, AutoTokenizer

    from ctx_exporter.corpus import MARKER_TOKENS, read_corpus, mark_text

    records = [_doc_with_context("solo", 2, 3)]
    job = _job(tmp_path, records, model_name=tiny_encoder_dir, batch_size=1)
    export_embeddings(job)
    _, vectors = _parse_ctxe(job.output_path)

    tokenizer = AutoTokenizer.from_pretrained(tiny_encoder_dir)
    model = AutoModel.from_pretrained(tiny_encoder_dir)
    tokenizer.add_special_tokens({"additional_special_tokens": list(MARKER_TOKENS)})
    torch.manual_seed(0)  # the exporter seeds the marker-row init the same way
    model.resize_token_embeddings(len(tokenizer))
    model.eval()
    doc = read_corpus(job.corpus_path)[0]
    marked, _ = mark_text(doc)
    enc = tokenizer([marked], return_tensors="pt", padding=True, truncation=True, max_length=128)
    with torch.no_grad():
        out = model(input_ids=enc["input_ids"], attention_mask=enc["attention_mask"])
    want = out.last_hidden_state[:, 0, :].numpy().astype("<f4")[0]
    assert np.array_equal(vectors["solo"], want)


def test_job_validation():
    with pytest.raises(ExporterError, match="batch_size"):
        ExportJob("c", "m", "o", batch_size=0).validate()
    with pytest.raises(ExporterError, match="max_sequence_length"):
        ExportJob("c", "m", "o", max_sequence_length=4).validate()


def test_write_ctxe_unicode_ids_and_oversized_id(tmp_path):
    path = str(tmp_path / "u.ctxe")
    matrix = np.arange(6, dtype=np.float32).reshape(2, 3)
    write_ctxe(path, ["注釈-3", "plain"], matrix)
    dim, vectors = _parse_ctxe(path)
    assert dim == 3
    assert list(vectors) == ["注釈-3", "plain"]
    assert np.array_equal(vectors["plain"], np.array([3.0, 4.0, 5.0], dtype=np.float32))

    with pytest.raises(ExportError, match="too long"):
        write_ctxe(str(tmp_path / "x.ctxe"), ["y" * 70000], np.zeros((1, 3), dtype=np.float32))


def test_cli_clean_run_exits_zero(tmp_path, tiny_encoder_dir, capsys):
    corpus = tmp_path / "docs.jsonl"
    _write_jsonl(corpus, [_doc_with_context(f"d{i}", 2, 2) for i in range(3)])
    out = tmp_path / "v.ctxe"
    rc = main(["export", "--corpus", str(corpus), "--model", tiny_encoder_dir,
               "--out", str(out), "--batch", "2", "--max-len", "64"])
    captured = capsys.readouterr()
    assert rc == 0
    assert "wrote 3 vectors (dim 32)" in captured.out
    assert out.exists()


def test_cli_skip_exits_nonzero_with_summary(tmp_path, tiny_encoder_dir, capsys):
    corpus = tmp_path / "docs.jsonl"
    _write_jsonl(corpus, [_doc_with_context("ok", 1, 1), _doc_with_context("buried", 40, 0)])
    rc = main(["export", "--corpus", str(corpus), "--model", tiny_encoder_dir,
               "--out", str(tmp_path / "v.ctxe"), "--max-len", "16"])
    captured = capsys.readouterr()
    assert rc == 1
    assert "skipped 1" in captured.out
    assert "buried" in captured.err


def test_cli_missing_corpus_exits_three(tmp_path, tiny_encoder_dir, capsys):
    rc = main(["export", "--corpus", str(tmp_path / "nope.jsonl"),
               "--model", tiny_encoder_dir, "--out", str(tmp_path / "v.ctxe")])
    assert rc == 3
    assert "cannot read corpus" in capsys.readouterr().err


def test_cli_bad_model_exits_three(tmp_path, capsys):
    corpus = tmp_path / "docs.jsonl"
    _write_jsonl(corpus, [_rec()])
    rc = main(["export", "--corpus", str(corpus),
               "--model", str(tmp_path / "no-model-here"), "--out", str(tmp_path / "v.ctxe")])
    assert rc == 3
    assert "cannot load encoder" in capsys.readouterr().err


def test_cli_bad_batch_exits_two(tmp_path, tiny_encoder_dir, capsys):
    corpus = tmp_path / "docs.jsonl"
    _write_jsonl(corpus, [_rec()])
    rc = main(["export", "--corpus", str(corpus), "--model", tiny_encoder_dir,
               "--out", str(tmp_path / "v.ctxe"), "--batch", "0"])
    assert rc == 2
    assert "batch_size" in capsys.readouterr().err


def test_cli_requires_subcommand():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
