import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lemkit import tokenization as tk
from lemkit.errors import FormatError, TruncationError

from conftest import make_vocab


class TestVocabulary:
    def test_requires_all_roles(self):
        with pytest.raises(FormatError, match="mask"):
            tk.VocabularyModel(["a", "b", "c", "d", "e"],
                               {"bos": 0, "eos": 1, "sep": 2, "pad": 3, "unk": 4})

    def test_specials_must_be_distinct(self):
        with pytest.raises(FormatError, match="distinct"):
            tk.VocabularyModel(["a", "b", "c", "d", "e", "f"],
                               {"bos": 0, "eos": 0, "sep": 2, "mask": 3, "pad": 4, "unk": 5})

    def test_file_roundtrip(self, tmp_path, vocab):
        tk.write_vocab_files(vocab, tmp_path / "v.txt", tmp_path / "v.json")
        loaded = tk.VocabularyModel.from_files(tmp_path / "v.txt", tmp_path / "v.json")
        assert loaded.tokens == vocab.tokens and loaded.specials == vocab.specials

    def test_serialized_roundtrip(self, tmp_path, vocab):
        vocab.save_serialized(tmp_path / "model.json")
        loaded = tk.VocabularyModel.from_serialized(tmp_path / "model.json")
        assert loaded.tokens == vocab.tokens and loaded.specials == vocab.specials

    def test_manifest_accepts_token_strings(self, tmp_path):
        (tmp_path / "v.txt").write_text("<s>\n</s>\n<sep>\n<mask>\n<pad>\n<unk>\nhi\n")
        (tmp_path / "v.json").write_text(
            '{"bos": "<s>", "eos": "</s>", "sep": "<sep>", "mask": "<mask>",'
            ' "pad": "<pad>", "unk": "<unk>"}')
        loaded = tk.VocabularyModel.from_files(tmp_path / "v.txt", tmp_path / "v.json")
        assert loaded.mask_id == 3 and loaded.token_to_id["hi"] == 6


class TestTokenize:
    def test_alignment_forced_split(self, vocab):
        toks = tk.tokenize("Jack walks", make_vocab(["Jack"]))
        got = [(t.surface, t.word_index) for t in toks.tokens]
        assert got == [("Jack", 0), ("walk", 1), ("s", 1)]
        assert toks.m == 3

    def test_empty_rejected(self, vocab):
        with pytest.raises(ValueError):
            tk.tokenize("   ", vocab)

    def test_m_excludes_specials(self, vocab):
        toks = tk.with_specials(tk.tokenize("Alice walked", vocab), vocab)
        assert toks.m == 3 and len(toks.tokens) == 5

    def test_oov_becomes_unk_with_surface(self, vocab):
        toks = tk.tokenize("Alice zzz", vocab)
        assert toks.tokens[1].id == vocab.unk_id
        assert toks.tokens[1].surface == "zzz"
        assert toks.words() == ["Alice", "zzz"]

    def test_greedy_prefers_longest(self):
        v = make_vocab(["walked"])
        toks = tk.tokenize("walked", v)
        assert [t.surface for t in toks.tokens] == ["walked"]

    def test_word_index_monotone(self, vocab):
        toks = tk.tokenize("Alice walked to New Town and Bob reads", vocab)
        indexes = [t.word_index for t in toks.tokens]
        assert indexes == sorted(indexes)

    @given(st.lists(st.sampled_from(
        ["Alice", "walked", "reads", "road", "the", "zz!q", "paintedx"]),
        min_size=1, max_size=8))
    @settings(max_examples=100)
    def test_words_roundtrip(self, words):
        vocab = make_vocab()
        toks = tk.tokenize(" ".join(words), vocab)
        assert toks.words() == words


class TestConcatPair:
    def _pair(self, vocab):
        src = tk.tokenize("Alice walks road", vocab)        # walk+s -> 4 tokens
        tgt = tk.tokenize("qAlice qwalks qthe qroad", vocab)
        return src, tgt

    def test_layout_and_counts(self, vocab):
        src, tgt = self._pair(vocab)
        pair = tk.concat_pair(src, tgt, vocab)
        assert len(pair.tokens) == len(src.tokens) + len(tgt.tokens) + 3
        assert pair.m == src.m + tgt.m
        assert pair.tokens[0].id == vocab.special_id("bos")
        assert pair.tokens[len(src.tokens) + 1].id == vocab.special_id("sep")
        assert pair.tokens[-1].id == vocab.special_id("eos")

    def test_first_target_offset(self, vocab):
        src, tgt = self._pair(vocab)
        pair = tk.concat_pair(src, tgt, vocab)
        first_tgt = len(src.tokens) + 2
        assert pair.tokens[first_tgt].surface == tgt.tokens[0].surface
        assert pair.tokens[first_tgt].word_index == tgt.tokens[0].word_index + len(src.tokens) + 2

    def test_source_side_bit_identical(self, vocab):
        src, tgt = self._pair(vocab)
        pair = tk.concat_pair(src, tgt, vocab)
        assert pair.tokens[1:len(src.tokens) + 1] == src.tokens

    def test_empty_side_rejected(self, vocab):
        src, _ = self._pair(vocab)
        empty = tk.TokenizedSentence(0, [])
        with pytest.raises(ValueError):
            tk.concat_pair(src, empty, vocab)

    def test_truncation_is_loud(self, vocab):
        src, tgt = self._pair(vocab)
        with pytest.raises(TruncationError):
            tk.concat_pair(src, tgt, vocab, max_sequence_length=5)

    def test_rejects_pre_wrapped_input(self, vocab):
        src, tgt = self._pair(vocab)
        with pytest.raises(ValueError):
            tk.concat_pair(tk.with_specials(src, vocab), tgt, vocab)


class TestTokenizedIO:
    def test_roundtrip(self, tmp_path, vocab):
        sentences = [tk.with_specials(tk.tokenize("Alice walked to New Town", vocab, 4), vocab),
                     tk.tokenize("Bob reads a book", vocab, 9)]
        path = tmp_path / "tok.jsonl"
        tk.write_tokenized(path, sentences)
        assert tk.read_tokenized(path) == sentences

    def test_bad_line_reports_position(self, tmp_path):
        path = tmp_path / "tok.jsonl"
        path.write_text('{"sentence_id": 0, "ids": [1], "words": [0, 1], "specials": [false]}\n')
        with pytest.raises(FormatError, match="line 1"):
            tk.read_tokenized(path)
