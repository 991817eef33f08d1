"""Corpus ingestion: segmentation, noise filters, stacking and seeded sampling.

The cleaning stage mirrors a standard web-crawl preprocessing recipe: strip
documents into sentences, drop lines carrying HTML tags or URLs, drop lines
whose letter ratio falls under a threshold (default 60%), and drop lines
matching a keyword blocklist. Language-identification filtering is supported
through an external per-line label file rather than a bundled LID model.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Iterable, Optional

from .errors import FormatError
from .streams import STAGE_SAMPLE, stream

# Sentence-terminal punctuation per language tag. Sinhala adds the kunddaliya
# section mark; the "default" row is used for unknown tags.
TERMINAL_MARKS = {
    "default": frozenset(".?!"),
    "en": frozenset(".?!"),
    "si": frozenset(".?!෴"),
    "ta": frozenset(".?!"),
    "hi": frozenset(".?!।॥"),
    "km": frozenset(".?!។៕"),
}

_HTML_TAG_RE = re.compile(r"<[a-zA-Z/][^>]*>")
_URL_RE = re.compile(r"(?:https?://|www\.)", re.IGNORECASE)

# Drop reason codes, in the order the rules are applied. A sentence gets the
# first matching reason only.
REASON_HTML = "html"
REASON_URL = "url"
REASON_RATIO = "ratio"
REASON_KEYWORD = "keyword"
REASON_LID = "lid"


@dataclass(frozen=True)
class SentenceRecord:
    """One cleaned sentence: positional id, language tag, text."""

    id: int
    lang: str
    text: str

    def __post_init__(self):
        if self.id < 0:
            raise ValueError(f"sentence id must be non-negative, got {self.id}")
        if not self.text.strip():
            raise ValueError(f"sentence {self.id} is empty")
        if "\n" in self.text or "\r" in self.text:
            raise ValueError(f"sentence {self.id} contains a newline")


@dataclass(frozen=True)
class CleaningConfig:
    min_text_ratio: float = 0.6
    keyword_blocklist: frozenset[str] = frozenset()
    drop_html: bool = True
    drop_urls: bool = True

    def __post_init__(self):
        if not 0.0 <= self.min_text_ratio <= 1.0:
            raise ValueError(f"min_text_ratio must be in [0, 1], got {self.min_text_ratio}")


@dataclass(frozen=True)
class ParallelPair:
    id: int
    src: SentenceRecord
    tgt: SentenceRecord

    def __post_init__(self):
        if self.src.lang == self.tgt.lang:
            raise ValueError(f"pair {self.id}: source and target share language {self.src.lang!r}")


@dataclass(frozen=True)
class CleanDecision:
    keep: bool
    reason: Optional[str] = None


def segment_sentences(document: str, lang: str = "default",
                      terminals: Optional[frozenset[str]] = None) -> list[str]:
    """Split a text block into sentences at terminal punctuation.

    A split happens after a run of terminal marks followed by whitespace (or
    end of input). Text with no terminal mark comes back as one sentence.
    Whitespace runs inside a sentence are collapsed to single spaces so the
    output never contains newlines; non-whitespace content is preserved.
    """
    marks = terminals if terminals is not None else TERMINAL_MARKS.get(lang, TERMINAL_MARKS["default"])
    sentences: list[str] = []

    def flush(piece: str):
        normalized = " ".join(piece.split())
        if normalized:
            sentences.append(normalized)

    start = 0
    i = 0
    n = len(document)
    while i < n:
        if document[i] in marks:
            j = i + 1
            while j < n and document[j] in marks:
                j += 1
            if j >= n or document[j].isspace():
                flush(document[start:j])
                start = j
                i = j
                continue
        i += 1
    flush(document[start:])
    return sentences


def letter_ratio(s: str) -> float:
    """Unicode letters over non-whitespace characters (0.0 for all-space input)."""
    non_space = sum(1 for ch in s if not ch.isspace())
    if non_space == 0:
        return 0.0
    letters = sum(1 for ch in s if ch.isalpha())
    return letters / non_space


def clean_sentence(s: str, cfg: CleaningConfig) -> CleanDecision:
    """Keep/drop decision for one sentence. Rules are checked in a fixed
    order (html, url, ratio, keyword) so a dropped sentence carries exactly
    one reason code."""
    if cfg.drop_html and _HTML_TAG_RE.search(s):
        return CleanDecision(False, REASON_HTML)
    if cfg.drop_urls and _URL_RE.search(s):
        return CleanDecision(False, REASON_URL)
    if letter_ratio(s) < cfg.min_text_ratio:
        return CleanDecision(False, REASON_RATIO)
    folded = s.casefold()
    for kw in cfg.keyword_blocklist:
        if kw.casefold() in folded:
            return CleanDecision(False, REASON_KEYWORD)
    return CleanDecision(True)


@dataclass(frozen=True)
class LidLabel:
    lang: str
    confidence: float


def read_lid_labels(path) -> dict[int, LidLabel]:
    """Per-line LID labels: TSV `lang<TAB>confidence`, line number = sentence id."""
    labels = {}
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise FormatError(f"{path}: line {i + 1}: expected `lang<TAB>confidence`")
            labels[i] = LidLabel(parts[0], float(parts[1]))
    return labels


def clean_corpus(records: Iterable[SentenceRecord], cfg: CleaningConfig,
                 lid_labels: Optional[dict[int, LidLabel]] = None,
                 lid_threshold: float = 0.5,
                 expected_lang: Optional[str] = None):
    """Filter a corpus; returns (kept records, [(id, reason), ...]).

    When LID labels are supplied, a sentence passes only if its predicted
    language matches `expected_lang` with confidence >= lid_threshold.
    Sentences without a label are not LID-checked. Cleaning never rewrites
    text, so running it twice gives the same result as running it once.
    """
    kept: list[SentenceRecord] = []
    drops: list[tuple[int, str]] = []
    for rec in records:
        decision = clean_sentence(rec.text, cfg)
        if not decision.keep:
            drops.append((rec.id, decision.reason))
            continue
        if lid_labels is not None and expected_lang is not None and rec.id in lid_labels:
            label = lid_labels[rec.id]
            if label.lang != expected_lang or label.confidence < lid_threshold:
                drops.append((rec.id, REASON_LID))
                continue
        kept.append(rec)
    return kept, drops


def build_mono_stack(src_corpus: list[SentenceRecord],
                     tgt_corpus: list[SentenceRecord]) -> list[SentenceRecord]:
    """Source-side sentences first, then target-side, order preserved."""
    return list(src_corpus) + list(tgt_corpus)


def sample_n(corpus: list[SentenceRecord], n: int, seed: int) -> list[SentenceRecord]:
    """Uniform sample without replacement, keeping the original relative order.

    Bit-identical across runs and platforms for a fixed seed.
    """
    if n > len(corpus):
        raise ValueError(f"cannot sample {n} from a corpus of {len(corpus)}")
    if n < 0:
        raise ValueError(f"sample size must be non-negative, got {n}")
    g = stream(seed, STAGE_SAMPLE)
    idx = g.choice(len(corpus), size=n, replace=False)
    return [corpus[i] for i in sorted(int(i) for i in idx)]


def read_raw_lines(path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh]


def read_records(path) -> list[SentenceRecord]:
    records = []
    last_id = -1
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                rec = SentenceRecord(int(obj["id"]), str(obj["lang"]), str(obj["text"]))
            except (KeyError, ValueError, TypeError) as exc:
                raise FormatError(f"{path}: line {i + 1}: {exc}") from exc
            if rec.id <= last_id:
                raise FormatError(f"{path}: line {i + 1}: ids must be strictly increasing")
            last_id = rec.id
            records.append(rec)
    return records


def write_records(path, records: Iterable[SentenceRecord]):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps({"id": rec.id, "lang": rec.lang, "text": rec.text},
                                ensure_ascii=False) + "\n")


def write_drop_log(path, drops: Iterable[tuple[int, str]]):
    with open(path, "w", encoding="utf-8") as fh:
        for sid, reason in drops:
            fh.write(json.dumps({"id": sid, "reason": reason}) + "\n")
