import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from newsbench.corpus import Article
from newsbench.errors import TokenizerError
from newsbench.tokenizer import (
    CLS_ID,
    PAD_ID,
    SEP_ID,
    UNK_ID,
    Vocabulary,
    build_vocab,
    decode,
    encode,
    encode_batch,
    load_vocab,
    save_vocab,
)


def _arts(*texts):
    return [Article(id=f"a{i}", title=t, body="") for i, t in enumerate(texts)]


class TestBuildVocab:
    def test_tie_breaks_lexicographically(self):
        vocab = build_vocab(_arts("a b", "a c"), max_size=6)
        assert vocab.id_to_token == ("[PAD]", "[UNK]", "[CLS]", "[SEP]", "a", "b")

    def test_deterministic_rebuild(self):
        arts = _arts("x y z", "y z w", "z w v")
        assert build_vocab(arts, 10).id_to_token == build_vocab(arts, 10).id_to_token

    def test_max_size_too_small(self):
        with pytest.raises(TokenizerError):
            build_vocab(_arts("a"), max_size=4)

    def test_ids_dense_and_reserved(self):
        vocab = build_vocab(_arts("alpha beta alpha"), max_size=100)
        assert vocab.token_to_id["[PAD]"] == PAD_ID
        assert vocab.token_to_id["[UNK]"] == UNK_ID
        assert vocab.token_to_id["[CLS]"] == CLS_ID
        assert vocab.token_to_id["[SEP]"] == SEP_ID
        assert sorted(vocab.token_to_id.values()) == list(range(len(vocab)))


class TestEncode:
    def setup_method(self):
        self.vocab = build_vocab(_arts("alpha beta gamma delta"), max_size=20)

    def test_empty_body_title_only(self):
        ids, mask = encode(self.vocab, Article(id="a", title="alpha", body=""), max_len=8)
        assert list(ids[:3]) == [CLS_ID, self.vocab.token_to_id["alpha"], SEP_ID]
        assert list(ids[3:]) == [PAD_ID] * 5
        assert mask.sum() == 3

    def test_degenerate_no_words(self):
        # "!" tokenizes to no words at all
        ids, mask = encode(self.vocab, Article(id="a", title="!", body=""), max_len=128)
        assert ids[0] == CLS_ID and ids[1] == SEP_ID
        assert mask.sum() == 2
        assert list(ids[2:]) == [PAD_ID] * 126

    def test_truncation_to_exact_length(self):
        long_article = Article(id="a", title="alpha " * 500, body="")
        ids, mask = encode(self.vocab, long_article, max_len=128)
        assert ids.shape == (128,)
        non_pad = ids[mask.astype(bool)]
        assert non_pad[-1] == SEP_ID
        assert len(non_pad) == 128

    def test_unknown_words_map_to_unk(self):
        ids, mask = encode(self.vocab, Article(id="a", title="zeta omega", body=""), max_len=8)
        assert list(ids[1:3]) == [UNK_ID, UNK_ID]

    def test_mask_zero_iff_pad(self):
        ids, mask = encode(self.vocab, Article(id="a", title="alpha beta", body=""), max_len=16)
        assert np.array_equal(mask == 0, ids == PAD_ID)

    def test_trailing_whitespace_invariant(self):
        a = Article(id="a", title="alpha beta", body="")
        b = Article(id="b", title="alpha beta   ", body="")
        ia, _ = encode(self.vocab, a)
        ib, _ = encode(self.vocab, b)
        assert np.array_equal(ia, ib)

    def test_roundtrip_in_vocab_text(self):
        art = Article(id="a", title="Alpha beta", body="gamma delta")
        ids, _ = encode(self.vocab, art)
        assert decode(self.vocab, ids) == ["alpha", "beta", "gamma", "delta"]


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sampled_from(["alpha", "beta", "gamma", "delta"]), min_size=1, max_size=120))
def test_roundtrip_property(words):
    vocab = build_vocab(_arts("alpha beta gamma delta"), max_size=20)
    art = Article(id="a", title=" ".join(words), body="")
    ids, mask = encode(vocab, art, max_len=128)
    assert ids.shape == (128,)
    assert np.array_equal(mask == 0, ids == PAD_ID)
    assert decode(vocab, ids) == words[:126]


class TestBatch:
    def test_labels_attached(self):
        vocab = build_vocab(_arts("a b"), max_size=10)
        arts = [Article(id="x", title="a", body="", category="A"),
                Article(id="y", title="b", body="", category="B")]
        batch = encode_batch(vocab, arts, max_len=8, label_index={"A": 0, "B": 1})
        assert batch.ids.shape == (2, 8)
        assert list(batch.labels) == [0, 1]

    def test_every_row_starts_with_cls(self):
        vocab = build_vocab(_arts("a b c"), max_size=10)
        arts = [Article(id=f"n{i}", title="a b c", body="") for i in range(5)]
        batch = encode_batch(vocab, arts, max_len=12)
        assert (batch.ids[:, 0] == CLS_ID).all()


class TestVocabFile:
    def test_roundtrip(self, tmp_path):
        vocab = build_vocab(_arts("alpha beta gamma"), max_size=12)
        p = tmp_path / "vocab.txt"
        save_vocab(vocab, p)
        loaded = load_vocab(p)
        assert loaded.id_to_token == vocab.id_to_token
        assert loaded.max_size == vocab.max_size

    def test_tampered_file_rejected(self, tmp_path):
        vocab = build_vocab(_arts("alpha beta"), max_size=12)
        p = tmp_path / "vocab.txt"
        save_vocab(vocab, p)
        lines = p.read_text().splitlines()
        lines[5] = "tampered"  # first non-reserved token line
        p.write_text("\n".join(lines) + "\n")
        with pytest.raises(TokenizerError, match="hash"):
            load_vocab(p)
