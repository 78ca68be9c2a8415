"""Command-line entry point.

Subcommands: extract, filter, build-phase1, build-phase2, build-finetune,
delex, db-query, evaluate, stats. All artifact outputs are JSONL whose
first line is a header object recording tool version, seed, stopword-list
version, and input digests; build subcommands append a footer line with
rejection counters. Reruns with the same configuration are byte-identical.

Exit codes: 0 success, 1 usage error, 2 data error (message names file and
line where known). The seed falls back to the ONTOFORGE_SEED environment
variable, then 0.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from typing import IO, Iterator, Optional

from . import __version__
from .dialogue import (DatabaseError, DBRecord, DialogueState, GoalError,
                       UnknownDomain, UnresolvedPlaceholder, db_bucket,
                       delexicalize, load_database, load_goals, query_db)
from .filtering import load_stopwords
from .ingest import CorpusError
from .metrics import (LengthMismatch, MissingGoal, evaluate_predictions,
                      load_predictions)
from .phase1 import ParseError
from .phase2 import SchemaError, load_schema
from .pipelines import (extract_lines, filter_lines, finetune_lines,
                        phase1_lines, phase2_lines)
from .runio import (dump_line, footer_record, header_record, read_footer,
                    read_header, read_jsonl)

_PROGRESS_EVERY = 200_000

_DATA_ERRORS = (CorpusError, SchemaError, DatabaseError, GoalError,
                ParseError, MissingGoal, LengthMismatch, UnknownDomain,
                UnresolvedPlaceholder, json.JSONDecodeError, OSError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


@dataclass
class RunConfig:
    """The reproducibility surface shared by subcommands; every output
    header records the seed (and the stopword-list version) it ran with."""
    seed: int = 0
    workers: int = 1
    corpus: Optional[str] = None
    triples: Optional[str] = None
    ontology: Optional[str] = None
    dialogues: Optional[str] = None
    db: Optional[str] = None
    goals: Optional[str] = None
    out: Optional[str] = None
    max_docs: Optional[int] = None
    max_sentences: int = 40
    check_stopwords: bool = True

    def validate(self) -> None:
        if self.workers < 1:
            raise UsageError("--workers must be at least 1")
        if self.max_sentences < 3:
            raise UsageError("--max-sentences must be at least 3")
        if self.max_docs is not None and self.max_docs < 1:
            raise UsageError("--max-docs must be at least 1")


def _default_seed() -> int:
    raw = os.environ.get("ONTOFORGE_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"ONTOFORGE_SEED must be an integer, got {raw!r}")


def _merge_config(args: argparse.Namespace, defaults: dict) -> dict:
    """Config file fills in flags the command line left unset; flags win.
    Keys the command does not know are rejected."""
    ns = vars(args)
    config = {}
    if ns.get("config"):
        with open(ns["config"], encoding="utf-8") as fh:
            config = json.load(fh)
        if not isinstance(config, dict):
            raise UsageError(f"{ns['config']}: config must be a JSON object")
        unknown = sorted(set(config) - set(defaults))
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    merged = {}
    for key, default in defaults.items():
        if ns.get(key) is not None:
            merged[key] = ns[key]
        elif key in config:
            merged[key] = config[key]
        else:
            merged[key] = default() if callable(default) else default
    return merged


_COMMON = {
    "seed": _default_seed,
    "workers": 1,
    "out": None,
    "skip_bad": False,
    "max_docs": None,
}


def _open_out(path: Optional[str]) -> IO[str]:
    return open(path, "w", encoding="utf-8") if path else sys.stdout


def _emit(out_path: Optional[str], header: dict, lines: Iterator[str],
          counters: dict, label: str) -> None:
    fh = _open_out(out_path)
    try:
        fh.write(dump_line(header))
        fh.write("\n")
        n = 0
        for line in lines:
            fh.write(line)
            fh.write("\n")
            n += 1
            if n % _PROGRESS_EVERY == 0:
                print(f"[{label}] {n} lines", file=sys.stderr)
        fh.write(dump_line(footer_record(counters)))
        fh.write("\n")
    finally:
        if out_path:
            fh.close()
        else:
            fh.flush()


def _header(seed: int, inputs: dict) -> dict:
    return header_record(__version__, seed, load_stopwords().version, inputs)


def _check_stopwords_version(path: str, enabled: bool) -> None:
    if not enabled:
        return
    header = read_header(path)
    if not header:
        return
    theirs = header.get("stopwords_version")
    ours = load_stopwords().version
    if theirs is not None and theirs != ours:
        raise CorpusError(path, 1,
                          f"stopword list {theirs} does not match {ours} "
                          "(pass --ignore-stopwords-version to override)")


def _state_from_json(raw) -> DialogueState:
    if isinstance(raw, dict):
        return DialogueState.from_nested(raw)
    if isinstance(raw, list):
        return DialogueState.from_pairs(raw)
    raise ValueError("state must be a [[domain, slot, value], ...] array "
                     "or a {domain: {slot: value}} object")


# ------------------------------------------------------------ subcommands

def _cmd_extract(args) -> int:
    cfg_map = _merge_config(args, {**_COMMON, "corpus": None, "fmt": "jsonl"})
    cfg = RunConfig(seed=cfg_map["seed"], workers=cfg_map["workers"],
                    corpus=cfg_map["corpus"], out=cfg_map["out"],
                    max_docs=cfg_map["max_docs"])
    cfg.validate()
    if not cfg.corpus:
        raise UsageError("extract needs --corpus")
    counters: dict = {}
    lines = extract_lines(cfg.corpus, fmt=cfg_map["fmt"], workers=cfg.workers,
                          skip_bad=cfg_map["skip_bad"], max_docs=cfg.max_docs,
                          counters=counters)
    _emit(cfg.out, _header(cfg.seed, {"corpus": cfg.corpus}), lines,
          counters, "extract")
    return 0


def _cmd_filter(args) -> int:
    cfg_map = _merge_config(args, {**_COMMON, "in": None,
                                   "ignore_stopwords_version": False})
    cfg = RunConfig(seed=cfg_map["seed"], workers=cfg_map["workers"],
                    triples=cfg_map["in"], out=cfg_map["out"],
                    check_stopwords=not cfg_map["ignore_stopwords_version"])
    cfg.validate()
    if not cfg.triples:
        raise UsageError("filter needs --in")
    _check_stopwords_version(cfg.triples, cfg.check_stopwords)
    counters: dict = {}
    lines = filter_lines(cfg.triples, cfg.seed, workers=cfg.workers,
                         skip_bad=cfg_map["skip_bad"], counters=counters)
    _emit(cfg.out, _header(cfg.seed, {"triples": cfg.triples}), lines,
          counters, "filter")
    return 0


def _cmd_build_phase1(args) -> int:
    cfg_map = _merge_config(args, {**_COMMON, "corpus": None, "triples": None,
                                   "fmt": "jsonl", "epoch": 0,
                                   "max_sentences": 40,
                                   "ignore_stopwords_version": False})
    cfg = RunConfig(seed=cfg_map["seed"], workers=cfg_map["workers"],
                    corpus=cfg_map["corpus"], triples=cfg_map["triples"],
                    out=cfg_map["out"], max_docs=cfg_map["max_docs"],
                    max_sentences=cfg_map["max_sentences"],
                    check_stopwords=not cfg_map["ignore_stopwords_version"])
    cfg.validate()
    if not cfg.corpus or not cfg.triples:
        raise UsageError("build-phase1 needs --corpus and --triples")
    _check_stopwords_version(cfg.triples, cfg.check_stopwords)
    counters: dict = {}
    lines = phase1_lines(cfg.corpus, cfg.triples, cfg.seed,
                         epoch=cfg_map["epoch"], fmt=cfg_map["fmt"],
                         workers=cfg.workers, skip_bad=cfg_map["skip_bad"],
                         max_docs=cfg.max_docs,
                         max_sentences=cfg.max_sentences, counters=counters)
    _emit(cfg.out, _header(cfg.seed, {"corpus": cfg.corpus,
                                      "triples": cfg.triples}),
          lines, counters, "build-phase1")
    return 0


def _cmd_build_phase2(args) -> int:
    cfg_map = _merge_config(args, {**_COMMON, "dialogues": None,
                                   "ontology": None})
    cfg = RunConfig(seed=cfg_map["seed"], workers=cfg_map["workers"],
                    dialogues=cfg_map["dialogues"],
                    ontology=cfg_map["ontology"], out=cfg_map["out"],
                    max_docs=cfg_map["max_docs"])
    cfg.validate()
    if not cfg.dialogues or not cfg.ontology:
        raise UsageError("build-phase2 needs --dialogues and --ontology")
    counters: dict = {}
    lines = phase2_lines(cfg.dialogues, cfg.ontology, seed=cfg.seed,
                         workers=cfg.workers, skip_bad=cfg_map["skip_bad"],
                         max_docs=cfg.max_docs, counters=counters)
    _emit(cfg.out, _header(cfg.seed, {"dialogues": cfg.dialogues,
                                      "ontology": cfg.ontology}),
          lines, counters, "build-phase2")
    return 0


def _cmd_build_finetune(args) -> int:
    cfg_map = _merge_config(args, {**_COMMON, "dialogues": None,
                                   "ontology": None, "db": None})
    cfg = RunConfig(seed=cfg_map["seed"], workers=cfg_map["workers"],
                    dialogues=cfg_map["dialogues"],
                    ontology=cfg_map["ontology"], db=cfg_map["db"],
                    out=cfg_map["out"], max_docs=cfg_map["max_docs"])
    cfg.validate()
    if not cfg.dialogues or not cfg.ontology or not cfg.db:
        raise UsageError("build-finetune needs --dialogues, --ontology "
                         "and --db")
    counters: dict = {}
    lines = finetune_lines(cfg.dialogues, cfg.ontology, cfg.db,
                           seed=cfg.seed, workers=cfg.workers,
                           skip_bad=cfg_map["skip_bad"],
                           max_docs=cfg.max_docs, counters=counters)
    _emit(cfg.out, _header(cfg.seed, {"dialogues": cfg.dialogues,
                                      "ontology": cfg.ontology,
                                      "db": cfg.db}),
          lines, counters, "build-finetune")
    return 0


def _cmd_delex(args) -> int:
    cfg_map = _merge_config(args, {**_COMMON, "in": None})
    cfg = RunConfig(seed=cfg_map["seed"], out=cfg_map["out"])
    if not cfg_map["in"]:
        raise UsageError("delex needs --in")
    in_path = cfg_map["in"]

    def lines() -> Iterator[str]:
        for index, record in enumerate(read_jsonl(in_path)):
            try:
                state = _state_from_json(record.get("state", []))
                record_values = record.get("record")
                db_record = None
                if record_values is not None:
                    domain = record.get("domain")
                    if not domain:
                        raise ValueError("records with a 'record' "
                                         "need 'domain'")
                    db_record = DBRecord(domain=domain,
                                         values={k: str(v) for k, v
                                                 in record_values.items()})
                out = dict(record)
                out["delex"] = delexicalize(str(record.get("response", "")),
                                            state, db_record)
            except (ValueError, TypeError, AttributeError) as exc:
                raise CorpusError(in_path, index + 1, str(exc)) from None
            yield dump_line(out)

    counters: dict = {}
    _emit(cfg.out, _header(cfg.seed, {"in": in_path}), lines(), counters,
          "delex")
    return 0


def _cmd_db_query(args) -> int:
    cfg_map = _merge_config(args, {**_COMMON, "db": None, "domain": None,
                                   "state": None, "ontology": None})
    cfg = RunConfig(seed=cfg_map["seed"], db=cfg_map["db"],
                    ontology=cfg_map["ontology"], out=cfg_map["out"])
    if not cfg.db or not cfg_map["domain"]:
        raise UsageError("db-query needs --db and --domain")
    raw_state = cfg_map["state"] or "[]"
    if raw_state.startswith("@"):
        with open(raw_state[1:], encoding="utf-8") as fh:
            raw_state = fh.read()
    try:
        state = _state_from_json(json.loads(raw_state))
    except (ValueError, TypeError) as exc:
        raise UsageError(f"bad --state: {exc}")
    db = load_database(cfg.db)
    schema = load_schema(cfg.ontology) if cfg.ontology else None
    records = query_db(db, state, cfg_map["domain"], schema=schema)
    inputs = {"db": cfg.db}
    if cfg.ontology:
        inputs["ontology"] = cfg.ontology
    result = {"domain": cfg_map["domain"], "count": len(records),
              "bucket": db_bucket(len(records)),
              "records": [dict(sorted(r.values.items())) for r in records]}
    fh = _open_out(cfg.out)
    try:
        fh.write(dump_line(_header(cfg.seed, inputs)))
        fh.write("\n")
        fh.write(dump_line(result))
        fh.write("\n")
    finally:
        if cfg.out:
            fh.close()
    return 0


def _cmd_evaluate(args) -> int:
    cfg_map = _merge_config(args, {**_COMMON, "preds": None, "gold": None,
                                   "goals": None, "db": None,
                                   "ontology": None, "per_dialogue": False})
    cfg = RunConfig(seed=cfg_map["seed"], db=cfg_map["db"],
                    goals=cfg_map["goals"], ontology=cfg_map["ontology"],
                    out=cfg_map["out"])
    for key in ("preds", "gold", "goals", "db"):
        if not cfg_map[key]:
            raise UsageError(f"evaluate needs --{key}")
    preds = load_predictions(cfg_map["preds"])
    golds = load_predictions(cfg_map["gold"])
    goals = load_goals(cfg.goals)
    db = load_database(cfg.db)
    schema = load_schema(cfg.ontology) if cfg.ontology else None
    report = evaluate_predictions(preds, golds, goals, db, schema=schema)
    inputs = {"preds": cfg_map["preds"], "gold": cfg_map["gold"],
              "goals": cfg.goals, "db": cfg.db}
    if cfg.ontology:
        inputs["ontology"] = cfg.ontology
    fh = _open_out(cfg.out)
    try:
        fh.write(dump_line(_header(cfg.seed, inputs)))
        fh.write("\n")
        fh.write(dump_line(report.as_dict(
            with_per_dialogue=cfg_map["per_dialogue"])))
        fh.write("\n")
    finally:
        if cfg.out:
            fh.close()
    return 0


def _bucketed(n: int, width: int = 16) -> str:
    lo = (n // width) * width
    return f"{lo}-{lo + width - 1}"


def _cmd_stats(args) -> int:
    cfg_map = _merge_config(args, {**_COMMON, "in": None})
    cfg = RunConfig(seed=cfg_map["seed"], out=cfg_map["out"])
    in_path = cfg_map["in"]
    if not in_path:
        raise UsageError("stats needs --in")
    report: dict = {"input": in_path}
    header = read_header(in_path)
    if header:
        report["input_header"] = header
    footer = read_footer(in_path)
    if footer:
        report["rejections"] = footer.get("counters", {})
    kind = None
    samples = 0
    triples = 0
    triple_hist: dict[str, int] = {}
    component_hist: dict[str, int] = {}
    source_hist: dict[str, int] = {}
    target_hist: dict[str, int] = {}
    k_hist: dict[str, int] = {}
    for record in read_jsonl(in_path):
        if kind is None:
            kind = "samples" if "source" in record else "triples"
        if kind == "samples":
            samples += 1
            meta = record.get("meta", {})
            n = meta.get("n_triples")
            if n is not None:
                triple_hist[str(n)] = triple_hist.get(str(n), 0) + 1
            k = meta.get("k")
            if k is not None:
                k_hist[str(k)] = k_hist.get(str(k), 0) + 1
            src = _bucketed(len(record.get("source", "").split()))
            tgt = _bucketed(len(record.get("target", "").split()))
            source_hist[src] = source_hist.get(src, 0) + 1
            target_hist[tgt] = target_hist.get(tgt, 0) + 1
        else:
            triples += 1
            for key in ("subj", "rel", "obj"):
                n = len(str(record.get(key, "")).split())
                label = str(n) if n <= 4 else "5+"
                component_hist[label] = component_hist.get(label, 0) + 1
    if kind == "samples":
        report["samples"] = samples
        report["triples_per_sample"] = dict(sorted(triple_hist.items()))
        report["masked_sentence_counts"] = dict(sorted(k_hist.items()))
        report["source_token_buckets"] = dict(sorted(
            source_hist.items(), key=lambda kv: int(kv[0].split("-")[0])))
        report["target_token_buckets"] = dict(sorted(
            target_hist.items(), key=lambda kv: int(kv[0].split("-")[0])))
    else:
        report["triples"] = triples
        report["component_token_lengths"] = dict(sorted(component_hist.items()))
    fh = _open_out(cfg.out)
    try:
        fh.write(dump_line(_header(cfg.seed, {"in": in_path})))
        fh.write("\n")
        fh.write(dump_line(report))
        fh.write("\n")
    finally:
        if cfg.out:
            fh.close()
    return 0


# ----------------------------------------------------------------- parser

def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int, default=None,
                     help="global seed (default: ONTOFORGE_SEED or 0)")
    sub.add_argument("--workers", type=int, default=None,
                     help="worker processes (default 1)")
    sub.add_argument("--out", default=None,
                     help="output path (default stdout)")
    sub.add_argument("--config", default=None,
                     help="JSON config file; flags override its keys")
    sub.add_argument("--skip-bad", dest="skip_bad", action="store_true",
                     default=None, help="count and skip malformed lines")
    sub.add_argument("--max-docs", dest="max_docs", type=int, default=None,
                     help="stop after this many input documents")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ontoforge",
                     description="Deterministic pretraining-data forge and "
                                 "evaluation harness for ontology-aware "
                                 "dialogue models.")
    parser.add_argument("--version", action="version",
                        version=f"ontoforge {__version__}")
    subs = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = subs.add_parser("extract", help="pattern-extract raw triples "
                                        "from a document corpus")
    _add_common(p)
    p.add_argument("--corpus")
    p.add_argument("--fmt", choices=("jsonl", "plain"), default=None)
    p.set_defaults(func=_cmd_extract)

    p = subs.add_parser("filter", help="apply the four-step triple filter")
    _add_common(p)
    p.add_argument("--in", dest="in")
    p.add_argument("--ignore-stopwords-version",
                   dest="ignore_stopwords_version", action="store_true",
                   default=None)
    p.set_defaults(func=_cmd_filter)

    p = subs.add_parser("build-phase1", help="build masked samples from "
                                             "documents and triples")
    _add_common(p)
    p.add_argument("--corpus")
    p.add_argument("--triples")
    p.add_argument("--fmt", choices=("jsonl", "plain"), default=None)
    p.add_argument("--epoch", type=int, default=None,
                   help="re-seed the random masks for another pass")
    p.add_argument("--max-sentences", dest="max_sentences", type=int,
                   default=None)
    p.add_argument("--ignore-stopwords-version",
                   dest="ignore_stopwords_version", action="store_true",
                   default=None)
    p.set_defaults(func=_cmd_build_phase1)

    p = subs.add_parser("build-phase2", help="build samples from dialogues "
                                             "by ontology text matching")
    _add_common(p)
    p.add_argument("--dialogues")
    p.add_argument("--ontology")
    p.set_defaults(func=_cmd_build_phase2)

    p = subs.add_parser("build-finetune", help="serialize state-annotated "
                                               "dialogue turns")
    _add_common(p)
    p.add_argument("--dialogues")
    p.add_argument("--ontology")
    p.add_argument("--db")
    p.set_defaults(func=_cmd_build_finetune)

    p = subs.add_parser("delex", help="replace slot values with placeholders")
    _add_common(p)
    p.add_argument("--in", dest="in")
    p.set_defaults(func=_cmd_delex)

    p = subs.add_parser("db-query", help="look up database records matching "
                                         "a dialogue state")
    _add_common(p)
    p.add_argument("--db")
    p.add_argument("--domain")
    p.add_argument("--state", help="JSON state, or @path to a JSON file")
    p.add_argument("--ontology")
    p.set_defaults(func=_cmd_db_query)

    p = subs.add_parser("evaluate", help="score a prediction file")
    _add_common(p)
    p.add_argument("--preds")
    p.add_argument("--gold")
    p.add_argument("--goals")
    p.add_argument("--db")
    p.add_argument("--ontology")
    p.add_argument("--per-dialogue", dest="per_dialogue",
                   action="store_true", default=None)
    p.set_defaults(func=_cmd_evaluate)

    p = subs.add_parser("stats", help="summarize a sample or triple file")
    _add_common(p)
    p.add_argument("--in", dest="in")
    p.set_defaults(func=_cmd_stats)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "command", None):
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"ontoforge {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except BrokenPipeError:
        return 0
    except _DATA_ERRORS as exc:
        print(f"ontoforge {args.command}: data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
