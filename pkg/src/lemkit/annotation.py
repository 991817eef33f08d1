"""Entity-span dictionaries: tag-file parsing, token alignment, overlap rules.

Named-entity and part-of-speech tags arrive as CoNLL-style files produced by
external taggers (token TAB tag, blank line between sentences). This module
turns them into per-sentence span dictionaries at both word and sub-word
level, so the masking stage never touches a tagger. Overlapping spans are
resolved once, here, with the fixed precedence NE > VB > NN.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from typing import Iterable, Optional

from .errors import AlignmentError, FormatError, TagFileError
from .tokenization import TokenizedSentence

logger = logging.getLogger(__name__)

LABELS = ("NE", "VB", "NN")
_PRECEDENCE = {"NE": 0, "VB": 1, "NN": 2}

SCHEME_BIO_NER = "BIO-NER"
SCHEME_POS = "POS"

# Penn Treebank defaults; Sinhala/Tamil taggers use pass-through sets.
PENN_NOUN_TAGS = frozenset({"NN", "NNS", "NNP", "NNPS"})
PENN_VERB_TAGS = frozenset({"VB", "VBD", "VBG", "VBN", "VBP", "VBZ"})
UD_NOUN_TAGS = frozenset({"NOUN", "PROPN"})
UD_VERB_TAGS = frozenset({"VERB", "AUX"})


@dataclass(frozen=True)
class TagsetConfig:
    noun_tags: frozenset[str] = PENN_NOUN_TAGS
    verb_tags: frozenset[str] = PENN_VERB_TAGS

    @classmethod
    def ud(cls) -> "TagsetConfig":
        return cls(UD_NOUN_TAGS, UD_VERB_TAGS)

    @classmethod
    def passthrough(cls) -> "TagsetConfig":
        return cls(frozenset({"NN"}), frozenset({"VB"}))

    @classmethod
    def from_json(cls, path) -> "TagsetConfig":
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
        try:
            return cls(frozenset(obj["noun_tags"]), frozenset(obj["verb_tags"]))
        except (KeyError, TypeError) as exc:
            raise FormatError(f"{path}: tagset config needs noun_tags and verb_tags lists") from exc


@dataclass(frozen=True)
class EntitySpan:
    """A contiguous labelled word range, with its token range once aligned.

    Token bounds are -1 until align_spans fills them. After overlap
    resolution the token range is authoritative; word bounds are recomputed
    to the covering words.
    """

    label: str
    word_start: int
    word_end: int
    token_start: int = -1
    token_end: int = -1

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValueError(f"unknown span label {self.label!r}")
        if self.word_start > self.word_end:
            raise ValueError(f"word range [{self.word_start}, {self.word_end}] is inverted")
        if self.token_start > self.token_end:
            raise ValueError(f"token range [{self.token_start}, {self.token_end}] is inverted")

    def token_positions(self) -> range:
        return range(self.token_start, self.token_end + 1)


@dataclass
class EntityDictionaryEntry:
    sentence_id: int
    spans: list[EntitySpan]


def parse_tag_file(path, scheme: str, tagset: Optional[TagsetConfig] = None) -> list[list[EntitySpan]]:
    """Parse a CoNLL-style tag file into word-level spans per sentence.

    BIO-NER: every B-X/I-X run becomes one NE span regardless of X. An I-X
    with no open run (or a class switch) starts a new span and logs a
    warning. POS: each word whose tag is in the configured noun/verb set
    becomes its own one-word NN/VB span; other tags are ignored.
    """
    if scheme not in (SCHEME_BIO_NER, SCHEME_POS):
        raise ValueError(f"unknown tag scheme {scheme!r}")
    tagset = tagset or TagsetConfig()

    sentences: list[list[EntitySpan]] = []
    tags: list[str] = []

    def flush():
        if scheme == SCHEME_BIO_NER:
            sentences.append(_bio_spans(tags, path, len(sentences)))
        else:
            sentences.append(_pos_spans(tags, tagset))
        tags.clear()

    saw_any = False
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                if tags:
                    flush()
                continue
            if "\t" not in line:
                raise TagFileError(f"{path}: expected `token<TAB>tag`", lineno)
            saw_any = True
            tags.append(line.split("\t", 1)[1].strip())
    if tags:
        flush()
    if not saw_any and not sentences:
        return []
    return sentences


def _bio_spans(tags: list[str], path, sentence_index: int) -> list[EntitySpan]:
    spans: list[EntitySpan] = []
    start = None
    cls = None

    def close(end):
        if start is not None:
            spans.append(EntitySpan("NE", start, end))

    for wi, tag in enumerate(tags):
        if tag.startswith("B-"):
            close(wi - 1)
            start, cls = wi, tag[2:]
        elif tag.startswith("I-"):
            if start is None or tag[2:] != cls:
                if start is None:
                    logger.warning("%s: sentence %d word %d: I-%s without B-, treating as span start",
                                   path, sentence_index, wi, tag[2:])
                close(wi - 1)
                start, cls = wi, tag[2:]
        else:
            close(wi - 1)
            start, cls = None, None
    close(len(tags) - 1)
    return spans


def _pos_spans(tags: list[str], tagset: TagsetConfig) -> list[EntitySpan]:
    spans = []
    for wi, tag in enumerate(tags):
        if tag in tagset.noun_tags:
            spans.append(EntitySpan("NN", wi, wi))
        elif tag in tagset.verb_tags:
            spans.append(EntitySpan("VB", wi, wi))
    return spans


def resolve_overlaps(spans: list[EntitySpan]) -> list[EntitySpan]:
    """Make token ranges disjoint under the precedence NE > VB > NN.

    Spans are processed in (precedence, token_start, token_end) order; each
    keeps the longest contiguous run of tokens not already claimed (earliest
    run on ties) and is dropped if nothing is free. Input order is
    irrelevant, so permuting spans yields the same result.
    """
    order = sorted(spans, key=lambda s: (_PRECEDENCE[s.label], s.token_start, s.token_end))
    claimed: set[int] = set()
    resolved: list[EntitySpan] = []
    for span in order:
        free = [t for t in span.token_positions() if t not in claimed]
        if not free:
            continue
        runs: list[list[int]] = [[free[0]]]
        for t in free[1:]:
            if t == runs[-1][-1] + 1:
                runs[-1].append(t)
            else:
                runs.append([t])
        best = max(runs, key=lambda r: (len(r), -r[0]))
        claimed.update(best)
        resolved.append(replace(span, token_start=best[0], token_end=best[-1]))
    resolved.sort(key=lambda s: s.token_start)
    return resolved


def align_spans(spans: Iterable[EntitySpan], toks: TokenizedSentence) -> EntityDictionaryEntry:
    """Fill token ranges from word ranges, then resolve overlaps.

    Raises AlignmentError when a span points at words the tokenized sentence
    does not have (tagger/tokenizer desync).
    """
    word_to_tokens: dict[int, list[int]] = {}
    for pos, tok in enumerate(toks.tokens):
        if not tok.is_special:
            word_to_tokens.setdefault(tok.word_index, []).append(pos)

    aligned = []
    for span in spans:
        positions = []
        for w in range(span.word_start, span.word_end + 1):
            positions.extend(word_to_tokens.get(w, []))
        if not positions:
            raise AlignmentError(
                f"sentence {toks.sentence_id}: span {span.label} words "
                f"[{span.word_start}, {span.word_end}] covers no tokens")
        aligned.append(replace(span, token_start=min(positions), token_end=max(positions)))

    resolved = resolve_overlaps(aligned)
    # Token ranges may have been trimmed; re-derive the covering word bounds.
    final = [replace(s,
                     word_start=toks.tokens[s.token_start].word_index,
                     word_end=toks.tokens[s.token_end].word_index)
             for s in resolved]
    return EntityDictionaryEntry(toks.sentence_id, final)


def shift_entry(entry: EntityDictionaryEntry, token_offset: int,
                word_offset: Optional[int] = None) -> EntityDictionaryEntry:
    """Shift all span offsets, e.g. when a sentence is wrapped in specials
    or concatenated after another sentence. Word offsets default to the
    token offset, matching concat_pair's word-index shift."""
    wo = token_offset if word_offset is None else word_offset
    spans = [replace(s,
                     word_start=s.word_start + wo,
                     word_end=s.word_end + wo,
                     token_start=s.token_start + token_offset,
                     token_end=s.token_end + token_offset)
             for s in entry.spans]
    return EntityDictionaryEntry(entry.sentence_id, spans)


def merge_pair_entries(src_entry: EntityDictionaryEntry, tgt_entry: EntityDictionaryEntry,
                       src_token_count: int, pair_id: int) -> EntityDictionaryEntry:
    """Merge the two sides' spans into pair coordinates.

    The source side moves right by 1 ([bos]); the target side by
    src_token_count + 2 ([bos] plus [sep]), mirroring concat_pair.
    """
    src_shifted = shift_entry(src_entry, 1, 0)
    tgt_shifted = shift_entry(tgt_entry, src_token_count + 2)
    return EntityDictionaryEntry(pair_id, src_shifted.spans + tgt_shifted.spans)


def read_entries(path) -> dict[int, EntityDictionaryEntry]:
    entries: dict[int, EntityDictionaryEntry] = {}
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                spans = [EntitySpan(s["label"], s["ws"], s["we"], s["ts"], s["te"])
                         for s in obj["spans"]]
                sid = int(obj["sentence_id"])
            except (KeyError, ValueError, TypeError) as exc:
                raise FormatError(f"{path}: line {i + 1}: {exc}") from exc
            if sid in entries:
                raise FormatError(f"{path}: line {i + 1}: duplicate sentence_id {sid}")
            entries[sid] = EntityDictionaryEntry(sid, spans)
    return entries


def write_entries(path, entries: Iterable[EntityDictionaryEntry]):
    with open(path, "w", encoding="utf-8") as fh:
        for e in entries:
            obj = {"sentence_id": e.sentence_id,
                   "spans": [{"label": s.label, "ws": s.word_start, "we": s.word_end,
                              "ts": s.token_start, "te": s.token_end} for s in e.spans]}
            fh.write(json.dumps(obj) + "\n")
