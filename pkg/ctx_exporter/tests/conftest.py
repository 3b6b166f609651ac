"""Shared fixtures: a tiny local BERT checkpoint and the acceptance summary."""

import pytest

EXPORTER_ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if EXPORTER_ACCEPTANCE:
        terminalreporter.section("exporter acceptance")
        for line in EXPORTER_ACCEPTANCE:
            terminalreporter.write_line(line)


@pytest.fixture
def record_acceptance():
    def _record(name: str, ok: bool, detail: str) -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
        EXPORTER_ACCEPTANCE.append(line)
        print(line)
        assert ok, line

    return _record


# Word pieces chosen so synthetic-corpus tokens (ent012, w181, cue3)
# decompose instead of collapsing to [UNK].
_WORDS = (
    ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
    + ["ent", "tgt", "cue", "w", "drug", "gene", "the", "binds", "inhibits", "protein"]
    + [f"##{d}" for d in "0123456789"]
    + [f"##{c}" for c in "abcdefgh"]
)


@pytest.fixture(scope="session")
def tiny_encoder_dir(tmp_path_factory):
    """Build and save a small randomly initialized BERT checkpoint.

    The tokenizer is saved WITHOUT the entity marker tokens: registering
    them is the exporter's job and the tests must exercise that path.
    """
    import torch
    from tokenizers import Tokenizer
    from tokenizers.models import WordPiece
    from tokenizers.normalizers import BertNormalizer
    from tokenizers.pre_tokenizers import BertPreTokenizer
    from tokenizers.processors import TemplateProcessing
    from transformers import BertConfig, BertModel, PreTrainedTokenizerFast

    vocab = {word: idx for idx, word in enumerate(_WORDS)}
    tk = Tokenizer(WordPiece(vocab, unk_token="[UNK]"))
    tk.normalizer = BertNormalizer(lowercase=True)
    tk.pre_tokenizer = BertPreTokenizer()
    tk.post_processor = TemplateProcessing(
        single="[CLS] $A [SEP]",
        pair="[CLS] $A [SEP] $B [SEP]",
        special_tokens=[("[CLS]", vocab["[CLS]"]), ("[SEP]", vocab["[SEP]"])],
    )
    tokenizer = PreTrainedTokenizerFast(
        tokenizer_object=tk,
        unk_token="[UNK]",
        pad_token="[PAD]",
        cls_token="[CLS]",
        sep_token="[SEP]",
        mask_token="[MASK]",
    )

    config = BertConfig(
        vocab_size=len(tokenizer),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=512,
    )
    torch.manual_seed(1234)
    model = BertModel(config)

    out = tmp_path_factory.mktemp("tiny-encoder")
    model.save_pretrained(out)
    tokenizer.save_pretrained(out)
    return str(out)
