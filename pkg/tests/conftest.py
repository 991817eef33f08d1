"""Shared fixtures: a hermetic vocabulary, sentence builders, a deterministic
toy corpus for pipeline tests, and the brute-force mining reference."""

from __future__ import annotations

import json
import math
import random

import numpy as np
import pytest

from lemkit import annotation as an
from lemkit import tokenization as tk

SPECIAL_TOKENS = ["<s>", "</s>", "<sep>", "<mask>", "<pad>", "<unk>"]
SPECIALS = {"bos": 0, "eos": 1, "sep": 2, "mask": 3, "pad": 4, "unk": 5}

NAMES = ["Alice", "Bob", "Carol", "Dave", "Eve", "Frank", "Grace", "Henry"]
PLACES = [("New", "Town"), ("Old", "Haven")]
VERB_STEMS = ["walk", "climb", "paint", "visit", "read"]
NOUNS = ["road", "hill", "book", "tree", "house", "song"]
DETS = ["the", "a"]
SUFFIXES = ["s", "ed"]
GLUE = ["and", "to"]


def make_vocab(extra: list[str] = ()) -> tk.VocabularyModel:
    tokens = list(SPECIAL_TOKENS) + NAMES + [w for p in PLACES for w in p] \
        + VERB_STEMS + SUFFIXES + NOUNS + DETS + GLUE + list(extra)
    # target-language forms: whole cipher words, one piece each
    tokens += ["q" + s + sfx for s in VERB_STEMS for sfx in SUFFIXES]
    tokens += ["q" + w for w in NAMES + [w for p in PLACES for w in p] + NOUNS + DETS + GLUE]
    seen = set()
    unique = [t for t in tokens if not (t in seen or seen.add(t))]
    return tk.VocabularyModel(unique, SPECIALS)


@pytest.fixture(scope="session")
def vocab() -> tk.VocabularyModel:
    return make_vocab()


def make_tokens(word_sizes: list[int], first_id: int = 100) -> tk.TokenizedSentence:
    """Synthetic sentence: word i contributes word_sizes[i] sub-word tokens."""
    tokens = []
    tid = first_id
    for wi, size in enumerate(word_sizes):
        for piece in range(size):
            tokens.append(tk.Token(tid, f"w{wi}p{piece}", wi))
            tid += 1
    return tk.TokenizedSentence(0, tokens)


def make_span(label: str, toks: tk.TokenizedSentence, word_start: int, word_end: int) -> an.EntitySpan:
    positions = [i for i, t in enumerate(toks.tokens)
                 if not t.is_special and word_start <= t.word_index <= word_end]
    return an.EntitySpan(label, word_start, word_end, min(positions), max(positions))


# ------------------------------------------------------------- toy corpus


def _toy_sentence(rng: random.Random):
    """One synthetic sentence with its per-word POS and NER tags."""
    words, pos, ner = [], [], []

    def add(word, tag, bio="O"):
        words.append(word)
        pos.append(tag)
        ner.append(bio)

    add(rng.choice(NAMES), "NNP", "B-PER")
    sfx = rng.choice(SUFFIXES)
    add(rng.choice(VERB_STEMS) + sfx, "VBZ" if sfx == "s" else "VBD")
    add(rng.choice(DETS), "DT")
    add(rng.choice(NOUNS), "NN")
    if rng.random() < 0.5:
        add("to", "TO")
        place = rng.choice(PLACES)
        add(place[0], "NNP", "B-LOC")
        add(place[1], "NNP", "I-LOC")
    if rng.random() < 0.4:
        add("and", "CC")
        add(rng.choice(NAMES), "NNP", "B-PER")
        sfx = rng.choice(SUFFIXES)
        add(rng.choice(VERB_STEMS) + sfx, "VBZ" if sfx == "s" else "VBD")
        add(rng.choice(DETS), "DT")
        add(rng.choice(NOUNS), "NN")
    return words, pos, ner


NOISE_LINES = [
    "spam <br> markup line here",
    "grab deals at www.spam.example now okay",
    "4512 9981 22 !!! 77",
    "holy bible reading notes",
]


def _write_tags(path, sentences, tags_key):
    with open(path, "w", encoding="utf-8") as fh:
        for words, pos, ner in sentences:
            tags = pos if tags_key == "pos" else ner
            for w, t in zip(words, tags):
                fh.write(f"{w}\t{t}\n")
            fh.write("\n")


def make_toy_corpus(root, n_sentences: int = 50, seed: int = 1234) -> dict:
    """Write a small bilingual corpus plus tag files, vocab and pair manifest.

    The source file interleaves noise lines (HTML, URL, low letter ratio,
    blocklist keyword) between clean sentences; the target side is a word
    level substitution cipher ("q" prefix) of the source and stays clean.
    Returns the paths plus bookkeeping used by tests.
    """
    rng = random.Random(seed)
    root = str(root)
    sentences = [_toy_sentence(rng) for _ in range(n_sentences)]

    src_lines: list[str] = []
    kept_src_line_numbers: list[int] = []
    noise_iter = iter(NOISE_LINES * 2)
    for i, (words, _, _) in enumerate(sentences):
        if i % 12 == 5:
            src_lines.append(next(noise_iter))
        kept_src_line_numbers.append(len(src_lines))
        src_lines.append(" ".join(words))

    tgt_sentences = [(["q" + w for w in words], pos, ner) for words, pos, ner in sentences]

    paths = {
        "src_raw": f"{root}/raw.src.txt",
        "tgt_raw": f"{root}/raw.tgt.txt",
        "src_ner": f"{root}/src.ner.tsv",
        "src_pos": f"{root}/src.pos.tsv",
        "tgt_ner": f"{root}/tgt.ner.tsv",
        "tgt_pos": f"{root}/tgt.pos.tsv",
        "vocab": f"{root}/vocab.txt",
        "specials": f"{root}/specials.json",
        "blocklist": f"{root}/blocklist.txt",
        "pairs": f"{root}/pairs.jsonl",
    }
    with open(paths["src_raw"], "w", encoding="utf-8") as fh:
        fh.write("\n".join(src_lines) + "\n")
    with open(paths["tgt_raw"], "w", encoding="utf-8") as fh:
        fh.write("\n".join(" ".join(w) for w, _, _ in tgt_sentences) + "\n")
    _write_tags(paths["src_ner"], sentences, "ner")
    _write_tags(paths["src_pos"], sentences, "pos")
    _write_tags(paths["tgt_ner"], tgt_sentences, "ner")
    _write_tags(paths["tgt_pos"], tgt_sentences, "pos")
    with open(paths["blocklist"], "w", encoding="utf-8") as fh:
        fh.write("bible\n")

    vocab = make_vocab()
    tk.write_vocab_files(vocab, paths["vocab"], paths["specials"])

    with open(paths["pairs"], "w", encoding="utf-8") as fh:
        for pid, src_id in enumerate(kept_src_line_numbers):
            fh.write(json.dumps({"pair_id": pid, "src_id": src_id, "tgt_id": pid}) + "\n")

    return {"paths": paths, "kept_src_ids": kept_src_line_numbers,
            "n_sentences": n_sentences, "vocab": vocab}


def unit_vectors(n: int, d: int, seed: int) -> "np.ndarray":
    g = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    data = g.normal(size=(n, d))
    data /= np.linalg.norm(data, axis=1, keepdims=True)
    return data


def run_primary_pipeline(root, corpus_info, seed=5, manifest=None):
    """Drive clean -> tokenize -> annotate -> mask (mono and para) via the CLI.

    Returns the artifact paths. Used by the CLI tests and by the acceptance
    determinism criterion.
    """
    from lemkit.cli import main

    p = corpus_info["paths"]
    root = str(root)
    extra = ["--manifest", manifest] if manifest else []
    art = {
        "src_clean": f"{root}/src.clean.jsonl",
        "tgt_clean": f"{root}/tgt.clean.jsonl",
        "src_tok": f"{root}/src.tok.jsonl",
        "tgt_tok": f"{root}/tgt.tok.jsonl",
        "src_dict": f"{root}/src.dict.jsonl",
        "tgt_dict": f"{root}/tgt.dict.jsonl",
        "mono_masked": f"{root}/mono.masked.jsonl",
        "para_masked": f"{root}/para.masked.jsonl",
    }
    steps = [
        ["clean", "--in", p["src_raw"], "--out", art["src_clean"], "--lang", "en",
         "--min-ratio", "0.6", "--blocklist", p["blocklist"]],
        ["clean", "--in", p["tgt_raw"], "--out", art["tgt_clean"], "--lang", "xx"],
        ["tokenize", "--in", art["src_clean"], "--vocab", p["vocab"],
         "--specials", p["specials"], "--out", art["src_tok"]],
        ["tokenize", "--in", art["tgt_clean"], "--vocab", p["vocab"],
         "--specials", p["specials"], "--out", art["tgt_tok"]],
        ["annotate", "--tok", art["src_tok"], "--ner", p["src_ner"],
         "--pos", p["src_pos"], "--out", art["src_dict"]],
        ["annotate", "--tok", art["tgt_tok"], "--ner", p["tgt_ner"],
         "--pos", p["tgt_pos"], "--out", art["tgt_dict"]],
        ["mask", "--mode", "mono", "--strategy", "lem", "--recipe", "100%NE+15%MLM",
         "--k", "1", "--seed", str(seed), "--tok", art["src_tok"], "--dict", art["src_dict"],
         "--vocab", p["vocab"], "--specials", p["specials"], "--out", art["mono_masked"]],
        ["mask", "--mode", "para", "--strategy", "lem", "--recipe", "100%NE+15%TLM",
         "--k", "1", "--seed", str(seed), "--src-tok", art["src_tok"],
         "--tgt-tok", art["tgt_tok"], "--src-dict", art["src_dict"],
         "--tgt-dict", art["tgt_dict"], "--pairs", p["pairs"],
         "--vocab", p["vocab"], "--specials", p["specials"], "--out", art["para_masked"]],
    ]
    for argv in steps:
        rc = main(argv + extra)
        assert rc == 0, f"stage failed ({rc}): {argv}"
    return art


# ------------------------------------------------------- mining reference


def margin_reference(x, y, X, Y, k) -> float:
    """Independent double-loop margin score used as the test oracle."""
    cos_xy = float(np.dot(x, y))
    near_x = sorted(float(np.dot(x, z)) for z in Y)[-k:]
    near_y = sorted(float(np.dot(y, z)) for z in X)[-k:]
    denom = sum(near_x) / (2 * k) + sum(near_y) / (2 * k)
    if denom <= 0:
        return float("-inf")
    return cos_xy / denom


def bruteforce_retrieve(X: np.ndarray, Y: np.ndarray, k: int):
    """Exhaustive double-loop FW/BW/IN retrieval, -inf queries dropped.

    Neighborhood means come from plain sorted lists and the margins from a
    per-pair loop, independently of the library path under test.
    """
    n_src, n_tgt = X.shape[0], Y.shape[0]
    S = [[float(np.dot(X[i], Y[j])) for j in range(n_tgt)] for i in range(n_src)]
    r_x = [sum(sorted(S[i])[-k:]) / k for i in range(n_src)]
    r_y = [sum(sorted(S[i][j] for i in range(n_src))[-k:]) / k for j in range(n_tgt)]

    def margin(i, j):
        denom = r_x[i] / 2 + r_y[j] / 2
        return S[i][j] / denom if denom > 0 else float("-inf")

    M = [[margin(i, j) for j in range(n_tgt)] for i in range(n_src)]
    fw = {}
    for i in range(n_src):
        best_j = min(range(n_tgt), key=lambda j: (-M[i][j], j))
        if math.isfinite(M[i][best_j]):
            fw[(i, best_j)] = M[i][best_j]
    bw = {}
    for j in range(n_tgt):
        best_i = min(range(n_src), key=lambda i: (-M[i][j], i))
        if math.isfinite(M[best_i][j]):
            bw[(best_i, j)] = M[best_i][j]
    inter = {p: s for p, s in fw.items() if p in bw}
    return fw, bw, inter
