"""Command line for the toy trainer.

Every command prints one JSON result line to stdout. Exit codes: 0 on
success, 1 for usage problems, 2 for data the trainer cannot use.
"""

from __future__ import annotations

import argparse
import json
import sys

from .baseline import baseline_predictions
from .data import OBJECTIVES, SampleError, read_samples
from .decode import or_exact_match, predict, write_predictions
from .microcorpus import build_samples
from .train import (TrainRun, evaluate_loss, load_checkpoint,
                    manifest_path_for, save_checkpoint, train)


def _emit(payload: dict) -> None:
    sys.stdout.write(json.dumps(payload, sort_keys=True) + "\n")


def _run_from_args(args) -> TrainRun:
    return TrainRun(d_model=args.d_model, n_heads=args.n_heads,
                    n_layers=args.n_layers, d_ff=args.d_ff,
                    max_len=args.max_len, lr=args.lr,
                    weight_decay=args.weight_decay,
                    batch_size=args.batch_size, epochs=args.epochs,
                    seed=args.seed, objective=args.objective)


def _cmd_train(args) -> int:
    if not args.phase1 and not args.phase2:
        raise _Usage("train needs --phase1 and/or --phase2")
    trained = train(args.phase1 or None, args.phase2 or None,
                    _run_from_args(args))
    save_checkpoint(trained, args.out)
    losses = trained.manifest["losses"]
    _emit({"checkpoint": args.out, "manifest": manifest_path_for(args.out),
           "epochs_logged": len(losses),
           "final_loss": losses[-1]["train_loss"] if losses else None})
    return 0


def _cmd_predict(args) -> int:
    trained = load_checkpoint(args.checkpoint)
    samples = read_samples(args.finetune)
    records = predict(trained, samples, args.db,
                      forge_cmd=tuple(args.forge_cmd.split()))
    write_predictions(records, args.out)
    _emit({"predictions": args.out, "turns": len(records),
           "truncated": sum(1 for r in records if r["meta"]["truncated"])})
    return 0


def _cmd_baseline(args) -> int:
    records = baseline_predictions(read_samples(args.train),
                                   read_samples(args.eval))
    write_predictions(records, args.out)
    _emit({"predictions": args.out, "turns": len(records)})
    return 0


def _cmd_eval_loss(args) -> int:
    trained = load_checkpoint(args.checkpoint)
    loss = evaluate_loss(trained, read_samples(args.samples),
                         objective=args.objective)
    _emit({"samples": args.samples, "objective": args.objective,
           "loss": loss})
    return 0


def _cmd_or_match(args) -> int:
    trained = load_checkpoint(args.checkpoint)
    score = or_exact_match(trained, read_samples(args.samples))
    _emit({"samples": args.samples, "exact_match": score})
    return 0


def _cmd_make_micro(args) -> int:
    path = build_samples(args.out_dir, args.n_docs, args.seed, args.prefix,
                         forge_cmd=tuple(args.forge_cmd.split()),
                         build_seed=args.build_seed)
    _emit({"samples": path, "n_docs": args.n_docs})
    return 0


class _Usage(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise _Usage(message)


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--d-model", type=int, default=64)
    p.add_argument("--n-heads", type=int, default=4)
    p.add_argument("--n-layers", type=int, default=2)
    p.add_argument("--d-ff", type=int, default=128)
    p.add_argument("--max-len", type=int, default=256)
    p.add_argument("--lr", type=float, default=1e-5)
    p.add_argument("--weight-decay", type=float, default=0.01)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--objective", choices=OBJECTIVES, default="both")


def build_parser() -> _Parser:
    parser = _Parser(prog="toy-trainer")
    subs = parser.add_subparsers(dest="command")

    p = subs.add_parser("train", help="fit a model on sample files")
    p.add_argument("--phase1")
    p.add_argument("--phase2")
    p.add_argument("--out", required=True)
    _add_model_flags(p)
    p.set_defaults(fn=_cmd_train)

    p = subs.add_parser("predict", help="decode a fine-tune file into "
                        "a prediction file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--finetune", required=True)
    p.add_argument("--db", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--forge-cmd", default="ontoforge")
    p.set_defaults(fn=_cmd_predict)

    p = subs.add_parser("baseline", help="majority-state predictions")
    p.add_argument("--train", required=True)
    p.add_argument("--eval", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_baseline)

    p = subs.add_parser("eval-loss", help="mean full-target token loss")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--samples", required=True)
    p.add_argument("--objective", choices=OBJECTIVES, default="both")
    p.set_defaults(fn=_cmd_eval_loss)

    p = subs.add_parser("or-match", help="exact-match rate of decoded "
                        "ontology triples")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--samples", required=True)
    p.set_defaults(fn=_cmd_or_match)

    p = subs.add_parser("make-micro", help="generate a templated micro "
                        "corpus and build its samples")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--n-docs", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--prefix", default="micro")
    p.add_argument("--build-seed", type=int, default=0)
    p.add_argument("--forge-cmd", default="ontoforge")
    p.set_defaults(fn=_cmd_make_micro)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "fn", None):
            raise _Usage("a command is required (try --help)")
        return args.fn(args)
    except _Usage as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (SampleError, RuntimeError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
