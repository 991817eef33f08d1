"""Sub-word tokenization with word-index alignment.

Two tokenizer flavours share one vocabulary type: a whitespace + greedy
longest-match splitter driven by a plain-text vocab file (hermetic, used in
tests), and a loader for the same model serialized as a single JSON file.
Pieces never span whitespace-delimited words, so every non-special token
carries the index of the word it was cut from; that alignment is what the
entity annotation stage consumes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Iterable, Optional

from .errors import FormatError, TruncationError

SPECIAL_ROLES = ("bos", "eos", "sep", "mask", "pad", "unk")

DEFAULT_MAX_SEQUENCE_LENGTH = 120


@dataclass(frozen=True)
class Token:
    id: int
    surface: str
    word_index: Optional[int]  # None for special tokens
    is_special: bool = False


@dataclass
class TokenizedSentence:
    sentence_id: int
    tokens: list[Token]

    @property
    def m(self) -> int:
        """Count of non-special sub-word tokens."""
        return sum(1 for t in self.tokens if not t.is_special)

    def non_special_positions(self) -> list[int]:
        return [i for i, t in enumerate(self.tokens) if not t.is_special]

    def words(self) -> list[str]:
        """Reconstruct the whitespace-delimited words from token surfaces."""
        out: list[str] = []
        current: Optional[int] = None
        for t in self.tokens:
            if t.is_special:
                continue
            if t.word_index != current:
                out.append(t.surface)
                current = t.word_index
            else:
                out[-1] += t.surface
        return out

    def word_count(self) -> int:
        indexes = {t.word_index for t in self.tokens if not t.is_special}
        return len(indexes)


class VocabularyModel:
    """Immutable token table plus the six special-token roles."""

    def __init__(self, tokens: list[str], specials: dict[str, int]):
        missing = [r for r in SPECIAL_ROLES if r not in specials]
        if missing:
            raise FormatError(f"special roles missing from manifest: {missing}")
        ids = [specials[r] for r in SPECIAL_ROLES]
        if len(set(ids)) != len(ids):
            raise FormatError(f"special ids must be distinct, got {specials}")
        if any(i < 0 or i >= len(tokens) for i in ids):
            raise FormatError("special ids must lie inside the vocabulary")
        self.tokens = list(tokens)
        self.specials = dict(specials)
        self.token_to_id = {tok: i for i, tok in enumerate(self.tokens)}
        self.special_ids = frozenset(ids)
        self._match_table = {
            tok: i for tok, i in self.token_to_id.items() if i not in self.special_ids
        }

    @property
    def size(self) -> int:
        return len(self.tokens)

    def special_id(self, role: str) -> int:
        return self.specials[role]

    @property
    def mask_id(self) -> int:
        return self.specials["mask"]

    @property
    def unk_id(self) -> int:
        return self.specials["unk"]

    def surface(self, token_id: int) -> str:
        return self.tokens[token_id]

    def maskable_ids(self) -> list[int]:
        """All non-special vocabulary ids (the random-replacement pool)."""
        return [i for i in range(self.size) if i not in self.special_ids]

    @classmethod
    def from_files(cls, vocab_path, manifest_path) -> "VocabularyModel":
        """Load from a one-token-per-line vocab file plus a JSON specials manifest.

        Manifest values may be ids or token surfaces.
        """
        with open(vocab_path, encoding="utf-8") as fh:
            tokens = [line.rstrip("\n") for line in fh]
        while tokens and tokens[-1] == "":
            tokens.pop()
        with open(manifest_path, encoding="utf-8") as fh:
            raw = json.load(fh)
        return cls(tokens, cls._resolve_specials(raw, tokens))

    @classmethod
    def from_serialized(cls, path) -> "VocabularyModel":
        """Load a self-contained JSON model: {"type", "tokens", "specials"}."""
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
        if obj.get("type") != "greedy_subword":
            raise FormatError(f"{path}: unsupported tokenizer model type {obj.get('type')!r}")
        tokens = list(obj["tokens"])
        return cls(tokens, cls._resolve_specials(obj["specials"], tokens))

    def save_serialized(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump({"type": "greedy_subword", "tokens": self.tokens,
                       "specials": self.specials}, fh, ensure_ascii=False)

    @staticmethod
    def _resolve_specials(raw: dict, tokens: list[str]) -> dict[str, int]:
        table = {tok: i for i, tok in enumerate(tokens)}
        resolved = {}
        for role, value in raw.items():
            if isinstance(value, int):
                resolved[role] = value
            elif isinstance(value, str):
                if value not in table:
                    raise FormatError(f"special token {value!r} not in vocabulary")
                resolved[role] = table[value]
            else:
                raise FormatError(f"special {role!r} must be an id or a token string")
        return resolved


def write_vocab_files(vocab: VocabularyModel, vocab_path, manifest_path):
    with open(vocab_path, "w", encoding="utf-8") as fh:
        for tok in vocab.tokens:
            fh.write(tok + "\n")
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(vocab.specials, fh)


def _split_word(word: str, vocab: VocabularyModel) -> list[tuple[int, str]]:
    """Greedy longest-match split of one word; unmatchable runs become unk."""
    pieces: list[tuple[int, str]] = []
    unk_start = None
    i = 0
    while i < len(word):
        match = None
        for j in range(len(word), i, -1):
            tid = vocab._match_table.get(word[i:j])
            if tid is not None:
                match = (tid, word[i:j])
                break
        if match is None:
            if unk_start is None:
                unk_start = i
            i += 1
            continue
        if unk_start is not None:
            pieces.append((vocab.unk_id, word[unk_start:i]))
            unk_start = None
        pieces.append(match)
        i += len(match[1])
    if unk_start is not None:
        pieces.append((vocab.unk_id, word[unk_start:]))
    return pieces


def tokenize(text: str, vocab: VocabularyModel, sentence_id: int = 0) -> TokenizedSentence:
    """Tokenize one sentence; raises ValueError on empty input.

    Special tokens are never produced here; templates add them later.
    """
    words = text.split()
    if not words:
        raise ValueError("cannot tokenize empty text")
    tokens: list[Token] = []
    for wi, word in enumerate(words):
        for tid, surface in _split_word(word, vocab):
            tokens.append(Token(tid, surface, wi))
    return TokenizedSentence(sentence_id, tokens)


def with_specials(toks: TokenizedSentence, vocab: VocabularyModel) -> TokenizedSentence:
    """Wrap a raw tokenized sentence as [bos] tokens [eos]."""
    bos = Token(vocab.special_id("bos"), vocab.surface(vocab.special_id("bos")), None, True)
    eos = Token(vocab.special_id("eos"), vocab.surface(vocab.special_id("eos")), None, True)
    return TokenizedSentence(toks.sentence_id, [bos] + list(toks.tokens) + [eos])


def concat_pair(src: TokenizedSentence, tgt: TokenizedSentence, vocab: VocabularyModel,
                max_sequence_length: int = DEFAULT_MAX_SEQUENCE_LENGTH,
                pair_id: int = 0) -> TokenizedSentence:
    """Concatenate a translation pair as [bos] src [sep] tgt [eos].

    Target word indexes are shifted by len(src.tokens) + 2 so they stay
    disjoint from (and above) the source side, matching the token-position
    shift applied to target entity spans. Raises TruncationError instead of
    silently cutting the sequence.
    """
    if src.m == 0 or tgt.m == 0:
        raise ValueError("both sides of a pair must be non-empty")
    if any(t.is_special for t in src.tokens) or any(t.is_special for t in tgt.tokens):
        raise ValueError("concat_pair expects raw tokenized sentences without specials")
    total = len(src.tokens) + len(tgt.tokens) + 3
    if total > max_sequence_length:
        raise TruncationError(
            f"pair {pair_id}: {total} tokens exceeds max sequence length {max_sequence_length}")
    offset = len(src.tokens) + 2
    bos = Token(vocab.special_id("bos"), vocab.surface(vocab.special_id("bos")), None, True)
    sep = Token(vocab.special_id("sep"), vocab.surface(vocab.special_id("sep")), None, True)
    eos = Token(vocab.special_id("eos"), vocab.surface(vocab.special_id("eos")), None, True)
    shifted_tgt = [replace(t, word_index=t.word_index + offset) for t in tgt.tokens]
    return TokenizedSentence(pair_id, [bos] + list(src.tokens) + [sep] + shifted_tgt + [eos])


def read_tokenized(path) -> list[TokenizedSentence]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                ids, words, specials = obj["ids"], obj["words"], obj["specials"]
                surfaces = obj.get("surfaces", [""] * len(ids))
                if not len(ids) == len(words) == len(specials) == len(surfaces):
                    raise ValueError("parallel arrays differ in length")
                tokens = [Token(int(t), s, None if w is None else int(w), bool(sp))
                          for t, s, w, sp in zip(ids, surfaces, words, specials)]
                out.append(TokenizedSentence(int(obj["sentence_id"]), tokens))
            except (KeyError, ValueError, TypeError) as exc:
                raise FormatError(f"{path}: line {i + 1}: {exc}") from exc
    return out


def write_tokenized(path, sentences: Iterable[TokenizedSentence]):
    with open(path, "w", encoding="utf-8") as fh:
        for s in sentences:
            obj = {
                "sentence_id": s.sentence_id,
                "ids": [t.id for t in s.tokens],
                "words": [t.word_index for t in s.tokens],
                "specials": [t.is_special for t in s.tokens],
                "surfaces": [t.surface for t in s.tokens],
            }
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
