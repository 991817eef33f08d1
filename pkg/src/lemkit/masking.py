"""Masked-example generation.

The entity-priority strategy visits the sentence's entity spans in seeded
random order and samples up to `tokens_per_entity` positions from each,
falling back to a uniform draw over the remaining non-special tokens when
the spans cannot fill the budget. Baseline strategies (random sub-word,
whole-word, geometric span, and random selection over concatenated pairs)
share the same budget and corruption rules so they differ only in how
positions are picked. Corruption follows the usual 80-10-10 rule: replace
with the mask token, replace with a random non-special vocabulary token, or
keep unchanged; all selected positions are labelled for prediction either
way.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional

import numpy as np

from .annotation import EntityDictionaryEntry, merge_pair_entries
from .errors import FormatError, RecipeError
from .streams import STAGE_CORRUPT, STAGE_SELECT, stream
from .tokenization import (DEFAULT_MAX_SEQUENCE_LENGTH, TokenizedSentence,
                           VocabularyModel, concat_pair)

STRATEGY_LEM = "LEM"
STRATEGY_SUBWORD = "SUBWORD"
STRATEGY_WHOLEWORD = "WHOLEWORD"
STRATEGY_SPAN = "SPAN"
STRATEGY_TLM_RANDOM = "TLM_RANDOM"
STRATEGIES = (STRATEGY_LEM, STRATEGY_SUBWORD, STRATEGY_WHOLEWORD,
              STRATEGY_SPAN, STRATEGY_TLM_RANDOM)

MODE_MONO = "mono"
MODE_PARA = "para"

DEFAULT_IGNORE = -100

_CLASSES = ("NE", "VB", "NN")


@dataclass(frozen=True)
class MaskingRecipe:
    """Which entity classes get priority, how much to mask, and on what base.

    Parsed from strings like "100%NE+15%MLM" (prioritize named entities,
    15% budget, monolingual base) or "100%NE+100%VB+15%TLM".
    """

    entity_classes: tuple[str, ...] = ()
    budget_fraction: float = 0.15
    base_mode: str = "MLM"

    def __post_init__(self):
        if not 0.0 < self.budget_fraction <= 1.0:
            raise ValueError(f"budget fraction must be in (0, 1], got {self.budget_fraction}")
        for c in self.entity_classes:
            if c not in _CLASSES:
                raise ValueError(f"unknown entity class {c!r}")
        if len(set(self.entity_classes)) != len(self.entity_classes):
            raise ValueError(f"duplicate entity class in {self.entity_classes}")
        if self.base_mode not in ("MLM", "TLM"):
            raise ValueError(f"base mode must be MLM or TLM, got {self.base_mode!r}")


_PCT_RE = re.compile(r"(\d+(?:\.\d+)?)%")


def parse_recipe(text: str) -> MaskingRecipe:
    """Parse `("100%" CLASS "+")* PCT ("MLM"|"TLM")` with CLASS in NE/VB/NN."""
    s = text.strip()
    if not s:
        raise RecipeError("empty recipe", 0)
    classes: list[str] = []
    pos = 0
    while s.startswith("100%", pos) and s[pos + 4:pos + 6] in _CLASSES and s[pos + 6:pos + 7] == "+":
        cls = s[pos + 4:pos + 6]
        if cls in classes:
            raise RecipeError(f"duplicate entity class {cls}", pos + 4)
        classes.append(cls)
        pos += 7
    m = _PCT_RE.match(s, pos)
    if m is None:
        raise RecipeError("expected a percentage like 15%", pos)
    pct = float(m.group(1))
    if not 0.0 < pct <= 100.0:
        raise RecipeError(f"percentage {m.group(1)} out of range (0, 100]", pos)
    pos = m.end()
    suffix = s[pos:]
    if suffix not in ("MLM", "TLM"):
        raise RecipeError(f"expected MLM or TLM, got {suffix!r}", pos)
    return MaskingRecipe(tuple(classes), pct / 100.0, suffix)


def format_recipe(recipe: MaskingRecipe) -> str:
    pct = recipe.budget_fraction * 100.0
    pct_str = f"{pct:g}"
    return "".join(f"100%{c}+" for c in recipe.entity_classes) + f"{pct_str}%{recipe.base_mode}"


@dataclass
class MaskingConfig:
    recipe: MaskingRecipe = field(default_factory=MaskingRecipe)
    tokens_per_entity: int = 1
    p_mask: float = 0.8
    p_random: float = 0.1
    p_keep: float = 0.1
    strategy: str = STRATEGY_LEM
    span_geometric_p: float = 0.2
    span_max: int = 10
    seed: int = 0
    ignore_value: int = DEFAULT_IGNORE
    max_sequence_length: int = DEFAULT_MAX_SEQUENCE_LENGTH

    def __post_init__(self):
        if abs(self.p_mask + self.p_random + self.p_keep - 1.0) > 1e-9:
            raise ValueError("corruption probabilities must sum to 1")
        if min(self.p_mask, self.p_random, self.p_keep) < 0:
            raise ValueError("corruption probabilities must be non-negative")
        if not 1 <= self.tokens_per_entity <= 4:
            raise ValueError(f"tokens_per_entity must be in [1, 4], got {self.tokens_per_entity}")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if not 0.0 < self.span_geometric_p < 1.0:
            raise ValueError(f"span_geometric_p must be in (0, 1), got {self.span_geometric_p}")
        if self.span_max < 1:
            raise ValueError(f"span_max must be >= 1, got {self.span_max}")


@dataclass
class Selection:
    """Selected positions plus where each came from.

    span_picks maps the index of a span (within the entry's span list) to
    the positions taken from it during the priority phase; remainder holds
    positions from the uniform fallback draw (for baseline strategies, every
    uniformly drawn position); unit_picks records the token groups added by
    whole-word/span units.
    """

    positions: tuple[int, ...]
    span_picks: dict[int, tuple[int, ...]] = field(default_factory=dict)
    remainder: tuple[int, ...] = ()
    unit_picks: tuple[tuple[int, ...], ...] = ()


@dataclass
class MaskedExample:
    input_ids: list[int]
    labels: list[int]
    selected: tuple[int, ...]
    meta: dict


def compute_budget(m: int, fraction: float) -> int:
    """max(1, floor(fraction * m)), computed with exact decimal arithmetic.

    Fraction-of-m is evaluated over rationals so that e.g. m=60 at 15%
    yields 9, not the 8 a float floor would give.
    """
    if m < 1:
        raise ValueError(f"token count must be >= 1, got {m}")
    frac = Fraction(str(fraction))
    budget = max(1, math.floor(frac * m))
    return min(budget, m)


def _pick(g: np.random.Generator, pool: list[int], size: int) -> list[int]:
    if size == 0:
        return []
    return [int(i) for i in g.choice(np.asarray(pool, dtype=np.int64), size=size, replace=False)]


def _select_entity_priority(toks: TokenizedSentence, entry: EntityDictionaryEntry,
                            cfg: MaskingConfig, g: np.random.Generator) -> Selection:
    non_special = toks.non_special_positions()
    budget = compute_budget(len(non_special), cfg.recipe.budget_fraction)

    eligible = [(i, s) for i, s in enumerate(entry.spans)
                if s.label in cfg.recipe.entity_classes]
    chosen: list[int] = []
    span_picks: dict[int, tuple[int, ...]] = {}
    if eligible:
        order = g.permutation(len(eligible))
        for oi in order:
            if len(chosen) >= budget:
                break
            span_index, span = eligible[int(oi)]
            pool = list(span.token_positions())
            take = min(cfg.tokens_per_entity, len(pool), budget - len(chosen))
            picks = _pick(g, pool, take)
            if picks:
                span_picks[span_index] = tuple(sorted(picks))
                chosen.extend(picks)

    remainder: list[int] = []
    if len(chosen) < budget:
        taken = set(chosen)
        pool = [p for p in non_special if p not in taken]
        remainder = _pick(g, pool, budget - len(chosen))
        chosen.extend(remainder)

    return Selection(tuple(sorted(chosen)), span_picks, tuple(sorted(remainder)))


def select_positions_lem(toks: TokenizedSentence, entry: EntityDictionaryEntry,
                         cfg: MaskingConfig) -> Selection:
    """Entity-priority selection for a monolingual sentence.

    Spans whose label is in the recipe's entity classes are visited in
    seeded random order, contributing up to tokens_per_entity positions each
    (uniformly, without replacement) until the budget is met; any shortfall
    is drawn uniformly from the not-yet-selected non-special tokens. The
    result always has exactly `compute_budget(m, fraction)` positions.
    """
    g = stream(cfg.seed, STAGE_SELECT, toks.sentence_id)
    return _select_entity_priority(toks, entry, cfg, g)


def select_positions_pair(src_toks: TokenizedSentence, tgt_toks: TokenizedSentence,
                          src_entry: EntityDictionaryEntry, tgt_entry: EntityDictionaryEntry,
                          cfg: MaskingConfig, vocab: VocabularyModel,
                          pair_id: int = 0) -> tuple[TokenizedSentence, Selection]:
    """Entity-priority selection over a concatenated pair.

    Both sides' spans are merged into pair coordinates and the budget is
    computed over the combined non-special token count; the algorithm is
    then identical to the monolingual case. Returns the concatenated
    sentence together with the selection.
    """
    pair = concat_pair(src_toks, tgt_toks, vocab, cfg.max_sequence_length, pair_id=pair_id)
    merged = merge_pair_entries(src_entry, tgt_entry, len(src_toks.tokens), pair_id)
    g = stream(cfg.seed, STAGE_SELECT, pair_id)
    return pair, _select_entity_priority(pair, merged, cfg, g)


def select_positions_baseline(toks: TokenizedSentence, cfg: MaskingConfig) -> Selection:
    """Position selection for the non-entity strategies.

    SUBWORD / TLM_RANDOM draw exactly the budget uniformly. WHOLEWORD and
    SPAN add whole units (a word's sub-words; a geometric-length word span's
    sub-words) until the budget is reached, so they may overshoot by at most
    one unit, never past the sentence length.
    """
    g = stream(cfg.seed, STAGE_SELECT, toks.sentence_id)
    non_special = toks.non_special_positions()
    budget = compute_budget(len(non_special), cfg.recipe.budget_fraction)

    if cfg.strategy in (STRATEGY_SUBWORD, STRATEGY_TLM_RANDOM):
        picks = _pick(g, non_special, budget)
        return Selection(tuple(sorted(picks)), remainder=tuple(sorted(picks)))

    word_to_tokens: dict[int, list[int]] = {}
    for pos in non_special:
        word_to_tokens.setdefault(toks.tokens[pos].word_index, []).append(pos)
    words = sorted(word_to_tokens)

    selected: set[int] = set()
    units: list[tuple[int, ...]] = []

    if cfg.strategy == STRATEGY_WHOLEWORD:
        for wi in g.permutation(len(words)):
            unit = word_to_tokens[words[int(wi)]]
            selected.update(unit)
            units.append(tuple(unit))
            if len(selected) >= budget:
                break
    elif cfg.strategy == STRATEGY_SPAN:
        lengths = np.arange(1, cfg.span_max + 1)
        q = 1.0 - cfg.span_geometric_p
        pmf = cfg.span_geometric_p * q ** (lengths - 1)
        pmf /= pmf.sum()
        while len(selected) < budget:
            span_len = int(g.choice(lengths, p=pmf))
            start = int(g.integers(0, len(words)))
            unit: list[int] = []
            for w in words[start:start + span_len]:
                unit.extend(word_to_tokens[w])
            added = [p for p in unit if p not in selected]
            selected.update(added)
            if added:
                units.append(tuple(added))
    else:
        raise ValueError(f"strategy {cfg.strategy} is not a baseline strategy")

    return Selection(tuple(sorted(selected)), unit_picks=tuple(units))


def apply_corruption(toks: TokenizedSentence, selected: Iterable[int],
                     vocab: VocabularyModel, cfg: MaskingConfig,
                     mode: str = MODE_MONO, meta: Optional[dict] = None) -> MaskedExample:
    """Corrupt the selected positions and build the labelled example.

    Each position gets an independent draw: mask / random non-special token /
    keep with (p_mask, p_random, p_keep). Labels carry the original id at
    every selected position (kept tokens are still predicted) and the ignore
    value elsewhere.
    """
    if "mask" not in vocab.specials:
        raise FormatError("vocabulary has no mask token")
    positions = sorted(set(int(p) for p in selected))
    special_positions = {i for i, t in enumerate(toks.tokens) if t.is_special}
    bad = [p for p in positions if p in special_positions or not 0 <= p < len(toks.tokens)]
    if bad:
        raise ValueError(f"selected positions {bad} are special or out of range")

    g = stream(cfg.seed, STAGE_CORRUPT, toks.sentence_id)
    pool = np.asarray(vocab.maskable_ids(), dtype=np.int64)

    input_ids = [t.id for t in toks.tokens]
    labels = [cfg.ignore_value] * len(input_ids)
    for p in positions:
        labels[p] = input_ids[p]
        u = float(g.random())
        if u < cfg.p_mask:
            input_ids[p] = vocab.mask_id
        elif u < cfg.p_mask + cfg.p_random:
            input_ids[p] = int(pool[int(g.integers(0, len(pool)))])
        # else: keep the original token, prediction still required

    info = {"mode": mode}
    info.update(meta or {})
    return MaskedExample(input_ids, labels, tuple(positions), info)


def read_masked(path) -> list[MaskedExample]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                ids = [int(x) for x in obj["ids"]]
                labels = [int(x) for x in obj["labels"]]
                if len(ids) != len(labels):
                    raise ValueError("ids and labels differ in length")
                meta = dict(obj.get("meta", {}))
                meta["mode"] = obj["mode"]
                ignore = int(obj.get("ignore_value", DEFAULT_IGNORE))
                selected = tuple(p for p, lab in enumerate(labels) if lab != ignore)
                out.append(MaskedExample(ids, labels, selected, meta))
            except (KeyError, ValueError, TypeError) as exc:
                raise FormatError(f"{path}: line {i + 1}: {exc}") from exc
    return out


def write_masked(path, examples: Iterable[MaskedExample], ignore_value: int = DEFAULT_IGNORE):
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            meta = {k: v for k, v in ex.meta.items() if k != "mode"}
            obj = {"ids": ex.input_ids, "labels": ex.labels,
                   "mode": ex.meta.get("mode", MODE_MONO), "meta": meta,
                   "ignore_value": ignore_value}
            fh.write(json.dumps(obj) + "\n")
