"""Trainer command line: two-stage training and embedding export.

    lemtrainer pipeline --mono F [F ...] --para F [F ...] --vocab V \
        --specials S --out-dir D [--records R.json]
    lemtrainer train --stage mono|para --data F [F ...] ...
    lemtrainer export --checkpoint C --tok T.jsonl --vocab V --specials S --out E.bin

Multiple --mono/--para/--data files are treated as pre-materialized epochs
(epoch-indexed masking seeds). Runs are single-threaded and seeded so
results are reproducible.
"""

from __future__ import annotations

import argparse
import sys

import torch

from . import __version__
from .data import Vocab, read_masked_file, read_tokenized_file
from .export import export_embeddings
from .model import load_checkpoint
from .training import (STAGE_MONO, STAGE_PARA, TrainerConfig, run_pipeline,
                       train_stage, write_records)


def _trainer_config(args) -> TrainerConfig:
    return TrainerConfig(layers=args.layers, hidden=args.hidden, heads=args.heads,
                         learning_rate=args.lr, batch_size=args.batch_size,
                         max_epochs=args.max_epochs, patience=args.patience,
                         seed=args.seed)


def _cmd_train(args) -> int:
    vocab = Vocab.load(args.vocab, args.specials)
    epoch_files = [read_masked_file(p) for p in args.data]
    record = train_stage(epoch_files, _trainer_config(args), vocab,
                         STAGE_MONO if args.stage == "mono" else STAGE_PARA,
                         args.out_dir, init_checkpoint=args.init,
                         from_scratch=args.from_scratch)
    write_records(args.records or f"{args.out_dir}/records.json", [record])
    print(f"best {record.stage} epoch {record.epoch} "
          f"val_loss {record.validation_loss:.6f}", file=sys.stderr)
    return 0


def _cmd_pipeline(args) -> int:
    vocab = Vocab.load(args.vocab, args.specials)
    mono = [read_masked_file(p) for p in args.mono] if args.mono else None
    para = [read_masked_file(p) for p in args.para]
    records = run_pipeline(mono, para, _trainer_config(args), vocab, args.out_dir,
                           from_scratch=args.from_scratch)
    write_records(args.records or f"{args.out_dir}/records.json", records)
    for r in records:
        print(f"best {r.stage} epoch {r.epoch} val_loss {r.validation_loss:.6f}",
              file=sys.stderr)
    return 0


def _cmd_export(args) -> int:
    vocab = Vocab.load(args.vocab, args.specials)
    model = load_checkpoint(args.checkpoint)
    sentences = read_tokenized_file(args.tok)
    export_embeddings(model, sentences, vocab, args.out)
    print(f"wrote {len(sentences)} x {model.cfg.hidden} embeddings", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lemtrainer", description=__doc__)
    parser.add_argument("--version", action="version", version=f"lemtrainer {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--vocab", required=True)
        p.add_argument("--specials", required=True)
        p.add_argument("--out-dir", required=True)
        p.add_argument("--records")
        p.add_argument("--layers", type=int, default=2)
        p.add_argument("--hidden", type=int, default=64)
        p.add_argument("--heads", type=int, default=4)
        p.add_argument("--lr", type=float, default=1e-3)
        p.add_argument("--batch-size", type=int, default=64)
        p.add_argument("--max-epochs", type=int, default=60)
        p.add_argument("--patience", type=int, default=3)
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train", help="train a single stage")
    p.add_argument("--stage", choices=["mono", "para"], required=True)
    p.add_argument("--data", nargs="+", required=True, help="masked JSONL, one per epoch")
    p.add_argument("--init", help="checkpoint to continue from")
    p.add_argument("--from-scratch", action="store_true")
    add_common(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("pipeline", help="run the two-stage schedule")
    p.add_argument("--mono", nargs="*", default=[], help="stage-1 masked JSONL epochs")
    p.add_argument("--para", nargs="+", required=True, help="stage-2 masked JSONL epochs")
    p.add_argument("--from-scratch", action="store_true",
                   help="allow skipping the monolingual stage")
    add_common(p)
    p.set_defaults(func=_cmd_pipeline)

    p = sub.add_parser("export", help="export sentence embeddings from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--tok", required=True, help="tokenized JSONL")
    p.add_argument("--vocab", required=True)
    p.add_argument("--specials", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_export)
    return parser


def main(argv=None) -> int:
    torch.set_num_threads(1)  # serial execution keeps outputs bit-reproducible
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ValueError, OSError, KeyError) as exc:
        print(f"lemtrainer: {exc}", file=sys.stderr)
        return 1


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
