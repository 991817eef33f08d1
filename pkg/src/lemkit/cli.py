"""Command-line entry point tying the pipeline stages together.

Subcommands: clean, stack, sample, tokenize, annotate, mask, mine, curate,
report, embcheck. Every stage is deterministic given its flags and seed; a
config file (`key = value` lines) can supply flag defaults, the CLI
overrides it, and LEMKIT_SEED overrides any --seed. Passing --manifest F to
a stage verifies its inputs against previously recorded hashes and appends
the stage's own outputs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__, annotation, corpus, curation, embeddings
from . import manifest as manifest_mod
from . import masking, mining, tokenization
from .errors import LemkitError, RecipeError

_STRATEGY_FLAGS = {
    "lem": masking.STRATEGY_LEM,
    "subword": masking.STRATEGY_SUBWORD,
    "wholeword": masking.STRATEGY_WHOLEWORD,
    "span": masking.STRATEGY_SPAN,
    "tlm_random": masking.STRATEGY_TLM_RANDOM,
}


def _read_blocklist(path) -> frozenset[str]:
    with open(path, encoding="utf-8") as fh:
        return frozenset(line.strip() for line in fh if line.strip())


def _env_seed(default: int) -> int:
    value = os.environ.get("LEMKIT_SEED")
    return int(value) if value else default


def _manifest_begin(args, input_paths):
    if getattr(args, "manifest", None):
        m = manifest_mod.load_manifest(args.manifest)
        manifest_mod.verify_inputs(m, input_paths)
        return m
    return None


def _manifest_end(args, m, stage, config, input_paths, output_paths):
    if m is not None:
        manifest_mod.record_stage(m, stage, config, input_paths, output_paths)
        manifest_mod.save_manifest(args.manifest, m)


# ---------------------------------------------------------------- handlers


def _cmd_clean(args) -> int:
    inputs = [args.infile] + ([args.blocklist] if args.blocklist else []) \
        + ([args.lid_labels] if args.lid_labels else [])
    m = _manifest_begin(args, inputs)

    cfg = corpus.CleaningConfig(
        min_text_ratio=args.min_ratio,
        keyword_blocklist=_read_blocklist(args.blocklist) if args.blocklist else frozenset(),
    )
    lines = corpus.read_raw_lines(args.infile)
    if args.segment:
        if args.lid_labels:
            raise LemkitError("--lid-labels applies to input lines; it cannot be "
                              "combined with --segment")
        sentences: list[str] = []
        for doc in lines:
            sentences.extend(corpus.segment_sentences(doc, args.lang))
        records = [corpus.SentenceRecord(i, args.lang, s) for i, s in enumerate(sentences)]
    else:
        records = [corpus.SentenceRecord(i, args.lang, " ".join(line.split()))
                   for i, line in enumerate(lines) if line.strip()]

    labels = corpus.read_lid_labels(args.lid_labels) if args.lid_labels else None
    kept, drops = corpus.clean_corpus(records, cfg, labels, args.lid_threshold, args.lang)
    corpus.write_records(args.out, kept)
    drop_log = args.drop_log or (args.out + ".drops.jsonl")
    corpus.write_drop_log(drop_log, drops)
    print(f"clean: kept {len(kept)} dropped {len(drops)}", file=sys.stderr)

    config = {"lang": args.lang, "min_ratio": args.min_ratio, "segment": args.segment,
              "lid_threshold": args.lid_threshold}
    _manifest_end(args, m, "clean", config, inputs, [args.out, drop_log])
    return 0


def _cmd_stack(args) -> int:
    inputs = [args.src, args.tgt]
    m = _manifest_begin(args, inputs)
    src = corpus.read_records(args.src)
    tgt = corpus.read_records(args.tgt)
    stacked = corpus.build_mono_stack(src, tgt)
    # Re-number so ids stay strictly increasing in the combined file.
    renumbered = [corpus.SentenceRecord(i, r.lang, r.text) for i, r in enumerate(stacked)]
    corpus.write_records(args.out, renumbered)
    _manifest_end(args, m, "stack", {}, inputs, [args.out])
    return 0


def _cmd_sample(args) -> int:
    m = _manifest_begin(args, [args.infile])
    seed = _env_seed(args.seed)
    records = corpus.read_records(args.infile)
    sampled = corpus.sample_n(records, args.n, seed)
    corpus.write_records(args.out, sampled)
    _manifest_end(args, m, "sample", {"n": args.n, "seed": seed}, [args.infile], [args.out])
    return 0


def _load_vocab(args) -> tokenization.VocabularyModel:
    if getattr(args, "model", None):
        return tokenization.VocabularyModel.from_serialized(args.model)
    return tokenization.VocabularyModel.from_files(args.vocab, args.specials)


def _cmd_tokenize(args) -> int:
    inputs = [args.infile] + ([args.model] if args.model else [args.vocab, args.specials])
    m = _manifest_begin(args, inputs)
    vocab = _load_vocab(args)
    records = corpus.read_records(args.infile)
    sentences = [tokenization.tokenize(r.text, vocab, sentence_id=r.id) for r in records]
    tokenization.write_tokenized(args.out, sentences)
    _manifest_end(args, m, "tokenize", {}, inputs, [args.out])
    return 0


def _cmd_annotate(args) -> int:
    if not args.ner and not args.pos:
        raise LemkitError("annotate needs --ner and/or --pos")
    inputs = [args.tok] + ([args.ner] if args.ner else []) + ([args.pos] if args.pos else [])
    m = _manifest_begin(args, inputs)

    tagset = annotation.TagsetConfig.from_json(args.tagset) if args.tagset \
        else annotation.TagsetConfig()
    sentences = tokenization.read_tokenized(args.tok)
    ner_spans = annotation.parse_tag_file(args.ner, annotation.SCHEME_BIO_NER) if args.ner else None
    pos_spans = annotation.parse_tag_file(args.pos, annotation.SCHEME_POS, tagset) if args.pos else None
    for name, spans in (("--ner", ner_spans), ("--pos", pos_spans)):
        if spans is not None and len(spans) != len(sentences):
            raise LemkitError(f"{name} has {len(spans)} sentences, tokenized input has "
                              f"{len(sentences)}")

    entries = []
    for i, toks in enumerate(sentences):
        word_spans = list(ner_spans[i] if ner_spans else []) + list(pos_spans[i] if pos_spans else [])
        entries.append(annotation.align_spans(word_spans, toks))
    annotation.write_entries(args.out, entries)
    _manifest_end(args, m, "annotate", {}, inputs, [args.out])
    return 0


def _mask_config(args, seed: int) -> masking.MaskingConfig:
    recipe = masking.parse_recipe(args.recipe)
    return masking.MaskingConfig(
        recipe=recipe,
        tokens_per_entity=args.k,
        strategy=_STRATEGY_FLAGS[args.strategy],
        span_geometric_p=args.span_p,
        span_max=args.span_max,
        seed=seed,
        ignore_value=args.ignore,
        max_sequence_length=args.max_len,
    )


def _cmd_mask(args) -> int:
    seed = _env_seed(args.seed)
    cfg = _mask_config(args, seed)

    if args.mode == "mono":
        if not args.tok:
            raise LemkitError("mask --mode mono needs --tok")
        inputs = [args.tok] + ([args.dict] if args.dict else [])
    else:
        for flag in ("src_tok", "tgt_tok", "pairs"):
            if not getattr(args, flag):
                raise LemkitError(f"mask --mode para needs --{flag.replace('_', '-')}")
        inputs = [args.src_tok, args.tgt_tok, args.pairs] \
            + ([args.src_dict] if args.src_dict else []) \
            + ([args.tgt_dict] if args.tgt_dict else [])
    inputs += [args.model] if args.model else [args.vocab, args.specials]
    m = _manifest_begin(args, inputs)
    vocab = _load_vocab(args)

    examples = []
    if args.mode == "mono":
        sentences = tokenization.read_tokenized(args.tok)
        entries = annotation.read_entries(args.dict) if args.dict else {}
        for toks in sentences:
            wrapped = tokenization.with_specials(toks, vocab)
            entry = entries.get(toks.sentence_id,
                                annotation.EntityDictionaryEntry(toks.sentence_id, []))
            entry = annotation.shift_entry(entry, 1, 0)
            if cfg.strategy == masking.STRATEGY_LEM:
                selection = masking.select_positions_lem(wrapped, entry, cfg)
            else:
                selection = masking.select_positions_baseline(wrapped, cfg)
            examples.append(masking.apply_corruption(
                wrapped, selection.positions, vocab, cfg,
                mode=masking.MODE_MONO, meta={"sentence_id": toks.sentence_id}))
    else:
        src_sentences = {t.sentence_id: t for t in tokenization.read_tokenized(args.src_tok)}
        tgt_sentences = {t.sentence_id: t for t in tokenization.read_tokenized(args.tgt_tok)}
        src_entries = annotation.read_entries(args.src_dict) if args.src_dict else {}
        tgt_entries = annotation.read_entries(args.tgt_dict) if args.tgt_dict else {}
        with open(args.pairs, encoding="utf-8") as fh:
            pair_rows = [json.loads(line) for line in fh if line.strip()]
        for row in pair_rows:
            pid, sid, tid = int(row["pair_id"]), int(row["src_id"]), int(row["tgt_id"])
            src = src_sentences[sid]
            tgt = tgt_sentences[tid]
            meta = {"pair_id": pid, "sep_index": len(src.tokens) + 1}
            if cfg.strategy == masking.STRATEGY_LEM:
                pair, selection = masking.select_positions_pair(
                    src, tgt,
                    src_entries.get(sid, annotation.EntityDictionaryEntry(sid, [])),
                    tgt_entries.get(tid, annotation.EntityDictionaryEntry(tid, [])),
                    cfg, vocab, pair_id=pid)
            else:
                pair = tokenization.concat_pair(src, tgt, vocab, cfg.max_sequence_length,
                                                pair_id=pid)
                selection = masking.select_positions_baseline(pair, cfg)
            examples.append(masking.apply_corruption(
                pair, selection.positions, vocab, cfg, mode=masking.MODE_PARA, meta=meta))

    masking.write_masked(args.out, examples, ignore_value=cfg.ignore_value)
    config = {"strategy": args.strategy, "recipe": args.recipe, "k": args.k,
              "seed": seed, "mode": args.mode, "ignore": args.ignore}
    _manifest_end(args, m, "mask", config, inputs, [args.out])
    return 0


def _cmd_mine(args) -> int:
    inputs = [args.src_emb, args.tgt_emb] + ([args.gold] if args.gold else [])
    m = _manifest_begin(args, inputs)
    cfg = mining.MiningConfig(k_neighbors=args.k, criterion=args.criterion.upper())
    X = embeddings.read_embeddings(args.src_emb)
    Y = embeddings.read_embeddings(args.tgt_emb)
    gold = mining.GoldAlignment.from_tsv(args.gold) if args.gold else None
    result = mining.mine(X, Y, cfg, gold=gold, block_size=args.block_size)
    mining.write_report(args.report, result)
    if result.recall is not None:
        print(f"mine: {result.criterion} recall {result.recall:.4f}", file=sys.stderr)
    config = {"k": args.k, "criterion": args.criterion}
    _manifest_end(args, m, "mine", config, inputs, [args.report])
    return 0


def _cmd_curate(args) -> int:
    inputs = [args.pairs, args.src_emb, args.tgt_emb]
    m = _manifest_begin(args, inputs)
    X = embeddings.read_embeddings(args.src_emb)
    Y = embeddings.read_embeddings(args.tgt_emb)
    if args.margin:
        scored = curation.score_pairs_margin(X, Y, k_neighbors=args.k)
    else:
        scored = curation.score_pairs(X, Y)
    ranked = curation.rank_pairs(scored)
    src_texts, tgt_texts = curation.read_pair_texts(args.pairs)
    config = {"top_n": args.top, "scorer": "margin" if args.margin else "cosine",
              "k": args.k if args.margin else None}
    curation.export_top_n(ranked, args.top, src_texts, tgt_texts, args.out_prefix,
                          config=config)
    outputs = [f"{args.out_prefix}.src", f"{args.out_prefix}.tgt",
               f"{args.out_prefix}.manifest.json"]
    _manifest_end(args, m, "curate", config, inputs, outputs)
    return 0


def _cmd_embcheck(args) -> int:
    info = embeddings.check_embedding_file(args.file)
    print(json.dumps(info, indent=2, sort_keys=True))
    return 0


def _cmd_report(args) -> int:
    m = manifest_mod.load_manifest(args.manifest)
    summary = {
        "tool_version": m.get("tool_version"),
        "stages": [{"stage": s["stage"], "config": s["config"],
                    "outputs": s["outputs"]} for s in m.get("stages", [])],
    }
    text = json.dumps(summary, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


# ---------------------------------------------------------------- parser


def _add_vocab_flags(p):
    p.add_argument("--vocab", help="plain-text vocab file, one token per line")
    p.add_argument("--specials", help="JSON manifest of special-token roles")
    p.add_argument("--model", help="serialized tokenizer model (alternative to --vocab/--specials)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lemkit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"lemkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("clean", help="filter raw text into sentence records")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--lang", required=True)
    p.add_argument("--min-ratio", type=float, default=0.6)
    p.add_argument("--blocklist")
    p.add_argument("--lid-labels")
    p.add_argument("--lid-threshold", type=float, default=0.5)
    p.add_argument("--drop-log")
    p.add_argument("--segment", action="store_true",
                   help="treat each input line as a document and split into sentences")
    p.set_defaults(func=_cmd_clean)

    p = sub.add_parser("stack", help="source-side records followed by target-side records")
    p.add_argument("--src", required=True)
    p.add_argument("--tgt", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_stack)

    p = sub.add_parser("sample", help="seeded uniform sample without replacement")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("tokenize", help="sub-word tokenize sentence records")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    _add_vocab_flags(p)
    p.set_defaults(func=_cmd_tokenize)

    p = sub.add_parser("annotate", help="build the entity-span dictionary from tag files")
    p.add_argument("--tok", required=True, help="tokenized JSONL")
    p.add_argument("--ner", help="CoNLL BIO NER tag file")
    p.add_argument("--pos", help="CoNLL POS tag file")
    p.add_argument("--tagset", help="JSON with noun_tags/verb_tags lists")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_annotate)

    p = sub.add_parser("mask", help="generate masked training examples")
    p.add_argument("--mode", choices=["mono", "para"], default="mono")
    p.add_argument("--strategy", choices=sorted(_STRATEGY_FLAGS), default="lem")
    p.add_argument("--recipe", default="15%MLM")
    p.add_argument("--k", type=int, default=1, help="tokens sampled per entity span")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ignore", type=int, default=masking.DEFAULT_IGNORE)
    p.add_argument("--max-len", type=int, default=tokenization.DEFAULT_MAX_SEQUENCE_LENGTH)
    p.add_argument("--span-p", type=float, default=0.2)
    p.add_argument("--span-max", type=int, default=10)
    p.add_argument("--tok", help="tokenized JSONL (mono)")
    p.add_argument("--dict", help="entity dictionary JSONL (mono)")
    p.add_argument("--src-tok")
    p.add_argument("--tgt-tok")
    p.add_argument("--src-dict")
    p.add_argument("--tgt-dict")
    p.add_argument("--pairs", help="pair manifest JSONL {pair_id, src_id, tgt_id}")
    p.add_argument("--out", required=True)
    _add_vocab_flags(p)
    p.set_defaults(func=_cmd_mask)

    p = sub.add_parser("mine", help="margin-based bitext mining")
    p.add_argument("--src-emb", required=True)
    p.add_argument("--tgt-emb", required=True)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--criterion", choices=["fw", "bw", "in"], default="in")
    p.add_argument("--gold", help="TSV gold alignment src_id<TAB>tgt_id")
    p.add_argument("--report", required=True)
    p.add_argument("--block-size", type=int, default=None)
    p.set_defaults(func=_cmd_mine)

    p = sub.add_parser("curate", help="rank pairs by similarity and export the top N")
    p.add_argument("--pairs", required=True, help="TSV pair_id<TAB>src_text<TAB>tgt_text")
    p.add_argument("--src-emb", required=True)
    p.add_argument("--tgt-emb", required=True)
    p.add_argument("--top", type=int, required=True)
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--margin", action="store_true", help="rank by margin score instead of cosine")
    p.add_argument("--k", type=int, default=4, help="neighborhood size for --margin")
    p.set_defaults(func=_cmd_curate)

    p = sub.add_parser("embcheck", help="validate an embedding file")
    p.add_argument("file")
    p.set_defaults(func=_cmd_embcheck)

    p = sub.add_parser("report", help="summarize a pipeline manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_report)

    for name, sp in sub.choices.items():
        if name not in ("embcheck", "report"):
            sp.add_argument("--manifest", help="pipeline manifest to verify and update")
        sp.add_argument("--config", help="key = value file supplying flag defaults")

    return parser


def _apply_config_file(argv: list[str]) -> list[str]:
    """Expand `--config F` into flags inserted after the subcommand, so
    explicit command-line flags still win."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        return argv  # let argparse produce the usage error
    path = argv[i + 1]
    rest = argv[:i] + argv[i + 2:]
    injected: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise LemkitError(f"{path}: expected `key = value`, got {line!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            flag = "--" + key.replace("_", "-")
            if value.lower() in ("true", "false"):
                if value.lower() == "true":
                    injected.append(flag)
            else:
                injected.extend([flag, value])
    if not rest:
        return injected
    return rest[:1] + injected + rest[1:]


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = _apply_config_file(argv)
        parser = build_parser()
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:  # argparse usage errors exit with code 2
        return int(exc.code or 0)
    except RecipeError as exc:
        print(f"lemkit: {exc}", file=sys.stderr)
        return 2
    except (LemkitError, ValueError, OSError, KeyError) as exc:
        print(f"lemkit: {exc}", file=sys.stderr)
        return 1


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
