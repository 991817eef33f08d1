"""Fixtures for the trainer: a synthetic two-language cipher corpus and a
driver that prepares training data through the data-pipeline CLI (the
trainer touches the pipeline only through its files and commands)."""

from __future__ import annotations

import json
import random
import subprocess
import sys

import numpy as np
import pytest

from lemtrainer.data import MaskedRecord, Vocab

SPECIALS = {"bos": 0, "eos": 1, "sep": 2, "mask": 3, "pad": 4, "unk": 5}
SPECIAL_TOKENS = ["<s>", "</s>", "<sep>", "<mask>", "<pad>", "<unk>"]


def lemkit(*argv):
    """Run a data-pipeline command; the pipeline is consumed only via its CLI."""
    proc = subprocess.run([sys.executable, "-m", "lemkit.cli", *map(str, argv)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, f"lemkit {argv} failed:\n{proc.stderr}"
    return proc


class CipherCorpus:
    """Synthetic bilingual corpus: the target side is a word-for-word
    substitution cipher of the source. Names map to themselves (like
    real-world proper nouns, they act as shared anchor tokens between the
    two languages); every other word gets a "q" prefix."""

    N_TOPICS = 12

    def __init__(self, root, n_train=2000, n_eval=300, seed=0):
        rng = random.Random(seed)
        self.root = str(root)

        def spell(i):  # letters only, so the cleaning ratio filter keeps everything
            return chr(ord("a") + i // 26) + chr(ord("a") + i % 26)

        self.names = [f"na{spell(i)}" for i in range(30)]
        self.verbs = [f"vb{spell(i)}" for i in range(40)]
        self.nouns = [f"nn{spell(i)}" for i in range(60)]
        self.other = [f"oo{spell(i)}" for i in range(66)]
        src_words = self.names + self.verbs + self.nouns + self.other
        self.tokens = SPECIAL_TOKENS + src_words \
            + ["q" + w for w in src_words if not w.startswith("na")]
        assert len(self.tokens) <= 500

        # topic structure: sentences draw all words from one topic's subsets,
        # so masked-token prediction is learnable and the shared names anchor
        # the two languages' topic geometries to each other
        self._by_topic = {
            cat: [words[t::self.N_TOPICS] for t in range(self.N_TOPICS)]
            for cat, words in (("names", self.names), ("verbs", self.verbs),
                               ("nouns", self.nouns), ("other", self.other))
        }
        self.train = [self._sentence(rng) for _ in range(n_train)]
        self.eval = [self._sentence(rng) for _ in range(n_eval)]
        self.paths = {}
        self._write_files(n_train, n_eval)

    def cipher(self, word: str) -> str:
        return word if word.startswith("na") else "q" + word

    def _sentence(self, rng):
        topic = rng.randrange(self.N_TOPICS)

        def pick(cat):
            return rng.choice(self._by_topic[cat][topic])

        words = [pick("names"), pick("verbs"), pick("other"), pick("nouns")]
        if rng.random() < 0.6:
            words += [pick("other"), pick("nouns")]
        if rng.random() < 0.4:
            words += [pick("verbs"), pick("other")]
        return words

    def _tags(self, words):
        pos, ner = [], []
        for w in words:
            if w.startswith("na"):
                pos.append("NNP")
                ner.append("B-PER")
            elif w.startswith("vb"):
                pos.append("VBD")
                ner.append("O")
            elif w.startswith("nn"):
                pos.append("NN")
                ner.append("O")
            else:
                pos.append("XX")
                ner.append("O")
        return pos, ner

    def _write_files(self, n_train, n_eval):
        root = self.root
        p = self.paths
        for split, sentences in (("train", self.train), ("eval", self.eval)):
            for side in ("src", "tgt"):
                translate = self.cipher if side == "tgt" else (lambda w: w)
                lines = [" ".join(translate(w) for w in s) for s in sentences]
                p[f"{split}_{side}_raw"] = f"{root}/{split}.{side}.txt"
                with open(p[f"{split}_{side}_raw"], "w") as fh:
                    fh.write("\n".join(lines) + "\n")
        for side in ("src", "tgt"):
            for kind in ("pos", "ner"):
                p[f"train_{side}_{kind}"] = f"{root}/train.{side}.{kind}.tsv"
                with open(p[f"train_{side}_{kind}"], "w") as fh:
                    for words in self.train:
                        pos, ner = self._tags(words)
                        tags = pos if kind == "pos" else ner
                        for w, t in zip(words, tags):
                            surface = self.cipher(w) if side == "tgt" else w
                            fh.write(f"{surface}\t{t}\n")
                        fh.write("\n")
        # stacked monolingual tags: source blocks then target blocks
        for kind in ("pos", "ner"):
            p[f"stack_{kind}"] = f"{root}/stack.{kind}.tsv"
            with open(p[f"stack_{kind}"], "w") as out:
                for side in ("src", "tgt"):
                    out.write(open(p[f"train_{side}_{kind}"]).read())

        p["vocab"] = f"{root}/vocab.txt"
        with open(p["vocab"], "w") as fh:
            fh.write("\n".join(self.tokens) + "\n")
        p["specials"] = f"{root}/specials.json"
        with open(p["specials"], "w") as fh:
            json.dump(SPECIALS, fh)
        p["pairs"] = f"{root}/pairs.jsonl"
        with open(p["pairs"], "w") as fh:
            for i in range(n_train):
                fh.write(json.dumps({"pair_id": i, "src_id": i, "tgt_id": i}) + "\n")
        p["gold"] = f"{root}/gold.tsv"
        with open(p["gold"], "w") as fh:
            for i in range(n_eval):
                fh.write(f"{i}\t{i}\n")


def prepare_static_data(corpus: CipherCorpus, work) -> dict:
    """Clean, tokenize, annotate and stack through the pipeline CLI.

    These artifacts do not depend on the masking seed, so one preparation is
    shared by every seed of the directional experiment.
    """
    p = dict(corpus.paths)
    work = str(work)
    vocab_flags = ["--vocab", p["vocab"], "--specials", p["specials"]]

    for split in ("train", "eval"):
        for side, lang in (("src", "aa"), ("tgt", "qq")):
            raw = p[f"{split}_{side}_raw"]
            clean = f"{work}/{split}.{side}.clean.jsonl"
            tok = f"{work}/{split}.{side}.tok.jsonl"
            lemkit("clean", "--in", raw, "--out", clean, "--lang", lang)
            lemkit("tokenize", "--in", clean, "--out", tok, *vocab_flags)
            p[f"{split}_{side}_clean"] = clean
            p[f"{split}_{side}_tok"] = tok

    for side in ("src", "tgt"):
        out = f"{work}/train.{side}.dict.jsonl"
        lemkit("annotate", "--tok", p[f"train_{side}_tok"], "--ner", p[f"train_{side}_ner"],
               "--pos", p[f"train_{side}_pos"], "--out", out)
        p[f"train_{side}_dict"] = out

    p["stack_clean"] = f"{work}/stack.clean.jsonl"
    p["stack_tok"] = f"{work}/stack.tok.jsonl"
    p["stack_dict"] = f"{work}/stack.dict.jsonl"
    lemkit("stack", "--src", p["train_src_clean"], "--tgt", p["train_tgt_clean"],
           "--out", p["stack_clean"])
    lemkit("tokenize", "--in", p["stack_clean"], "--out", p["stack_tok"], *vocab_flags)
    lemkit("annotate", "--tok", p["stack_tok"], "--ner", p["stack_ner"],
           "--pos", p["stack_pos"], "--out", p["stack_dict"])
    return p


def materialize_masked_epochs(paths: dict, work, mono_epochs: int, para_epochs: int,
                              mask_seed: int,
                              recipe_mono: str = "100%NE+15%MLM",
                              recipe_para: str = "100%NE+100%VB+100%NN+15%TLM"):
    """Static per-epoch masking files with epoch-indexed seeds."""
    work = str(work)
    vocab_flags = ["--vocab", paths["vocab"], "--specials", paths["specials"]]
    mono_files = []
    for epoch in range(mono_epochs):
        out = f"{work}/mono.s{mask_seed}.e{epoch}.jsonl"
        lemkit("mask", "--mode", "mono", "--strategy", "lem",
               "--recipe", recipe_mono, "--k", "1", "--seed", mask_seed + epoch,
               "--tok", paths["stack_tok"], "--dict", paths["stack_dict"],
               "--out", out, *vocab_flags)
        mono_files.append(out)
    para_files = []
    for epoch in range(para_epochs):
        out = f"{work}/para.s{mask_seed}.e{epoch}.jsonl"
        lemkit("mask", "--mode", "para", "--strategy", "lem",
               "--recipe", recipe_para, "--k", "1", "--seed", mask_seed + 100 + epoch,
               "--src-tok", paths["train_src_tok"], "--tgt-tok", paths["train_tgt_tok"],
               "--src-dict", paths["train_src_dict"], "--tgt-dict", paths["train_tgt_dict"],
               "--pairs", paths["pairs"], "--out", out, *vocab_flags)
        para_files.append(out)
    return mono_files, para_files


def prepare_pipeline_data(corpus: CipherCorpus, work, mono_epochs: int,
                          para_epochs: int, mask_seed: int) -> dict:
    """One-shot convenience: static prep plus one set of masked epochs."""
    p = prepare_static_data(corpus, work)
    p["mono_masked"], p["para_masked"] = materialize_masked_epochs(
        p, work, mono_epochs, para_epochs, mask_seed)
    return p


def mine_recall(src_emb, tgt_emb, gold, report) -> float:
    lemkit("mine", "--src-emb", src_emb, "--tgt-emb", tgt_emb, "--k", "4",
           "--criterion", "in", "--gold", gold, "--report", report)
    return json.loads(open(report).read())["recall"]


@pytest.fixture(scope="session")
def tiny_vocab(tmp_path_factory) -> Vocab:
    root = tmp_path_factory.mktemp("vocab")
    tokens = SPECIAL_TOKENS + [f"w{i}" for i in range(14)]
    (root / "vocab.txt").write_text("\n".join(tokens) + "\n")
    (root / "specials.json").write_text(json.dumps(SPECIALS))
    return Vocab.load(root / "vocab.txt", root / "specials.json")


def toy_records(n=24, length=8, masked=2, mode="mono", vocab_size=20, seed=3):
    """Small in-memory masked examples for unit tests."""
    g = np.random.Generator(np.random.Philox(seed))
    records = []
    first_real = len(SPECIAL_TOKENS)
    for i in range(n):
        ids = [SPECIALS["bos"]] + [int(g.integers(first_real, vocab_size))
                                   for _ in range(length)] + [SPECIALS["eos"]]
        labels = [-100] * len(ids)
        positions = g.choice(np.arange(1, length + 1), size=masked, replace=False)
        for pos in positions:
            labels[int(pos)] = ids[int(pos)]
            ids[int(pos)] = SPECIALS["mask"]
        meta = {"sentence_id": i}
        if mode == "para":
            meta = {"pair_id": i, "sep_index": length // 2}
        records.append(MaskedRecord(ids, labels, mode, meta))
    return records
