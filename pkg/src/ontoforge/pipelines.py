"""Streaming pipelines behind the CLI subcommands.

Each pipeline turns an input stream into an ordered stream of output lines
plus a counter dict of per-reason rejection counts. Work is split into
per-unit worker functions (one document, one sentence group, one dialogue)
so the same code runs inline or on a process pool; unit seeds are derived
from identity, never from position in the schedule, so any worker count
yields identical bytes.

Worker processes are primed by an initializer that loads shared read-only
context (stopword list, ontology, database, triple index) from paths.
"""

from __future__ import annotations

import json
import multiprocessing
from typing import Iterable, Iterator, Optional

from . import dialogue as dlg
from . import ingest
from .filtering import StopwordList, filter_sentence_triples, load_stopwords
from .ingest import CorpusError, RawTriple
from .phase1 import TooShortDocument, build_sample, sample_to_record
from .phase2 import build_tod_sample, dialogue_from_record, load_schema
from .runio import dump_line
from .seeding import hash64, rng_for

_CTX: dict = {}


def stream_seed_for(seed: int, epoch: int) -> int:
    """Epoch 0 uses the seed unchanged so `filter` then `build-phase1` on
    the result composes with `build-phase1` straight from raw triples."""
    return seed if epoch == 0 else hash64(seed, epoch)


def _init_worker(params: dict) -> None:
    global _CTX
    ctx: dict = dict(params)
    ctx["stopwords"] = load_stopwords()
    if params.get("ontology_path"):
        ctx["schema"] = load_schema(params["ontology_path"])
    if params.get("db_path"):
        ctx["db"] = dlg.load_database(params["db_path"])
    if params.get("triples_path"):
        ctx["triples"] = ingest.load_triples(params["triples_path"],
                                             skip_bad=params.get("skip_bad", False))
    _CTX = ctx


def _run_units(units: Iterable, worker, workers: int, params: dict,
               chunksize: int = 32) -> Iterator:
    if workers <= 1:
        _init_worker(params)
        for unit in units:
            yield worker(unit)
        return
    ctx = multiprocessing.get_context()
    with ctx.Pool(workers, initializer=_init_worker,
                  initargs=(params,)) as pool:
        yield from pool.imap(worker, units, chunksize=chunksize)


def _merge(total: dict, delta: dict) -> None:
    for key, value in delta.items():
        total[key] = total.get(key, 0) + value


# ---------------------------------------------------------------- extract

def _extract_unit(unit):
    line_no, doc_id, payload = unit
    counters: dict = {}
    try:
        if doc_id is None:
            record = json.loads(payload)
            if "_header" in record or "_footer" in record:
                return (line_no, None, [], counters)
            doc = ingest._doc_from_record(record, _CTX["input_path"], line_no)
        else:
            doc = ingest.Document(
                doc_id=doc_id, title=None,
                sentences=tuple(ingest.segment_sentences(payload)))
    except (json.JSONDecodeError, CorpusError, ValueError) as exc:
        if _CTX.get("skip_bad"):
            counters["bad_lines"] = 1
            return (line_no, None, [], counters)
        if isinstance(exc, CorpusError):
            raise
        raise CorpusError(_CTX["input_path"], line_no, str(exc)) from None
    lines = []
    for sentence in doc.sentences:
        for t in ingest.naive_extract(sentence, doc_id=doc.doc_id):
            lines.append(dump_line({"doc_id": t.doc_id, "sent": t.sentence_index,
                                    "subj": t.subject, "rel": t.relation,
                                    "obj": t.object, "conf": t.confidence}))
    if not lines:
        counters["doc_no_triples"] = 1
    return (line_no, doc.doc_id, lines, counters)


def _corpus_units(path: str, fmt: str,
                  max_docs: Optional[int]) -> Iterator[tuple]:
    if fmt == "plain":
        count = 0
        block: list[str] = []
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if line.strip():
                    block.append(line.strip())
                elif block:
                    yield (line_no, f"doc-{count}", " ".join(block))
                    count += 1
                    block = []
                    if max_docs is not None and count >= max_docs:
                        return
        if block:
            yield (line_no, f"doc-{count}", " ".join(block))
        return
    if fmt != "jsonl":
        raise ValueError(f"unknown corpus format: {fmt!r}")
    count = 0
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            if stripped.startswith(('{"_header"', '{"_footer"')):
                continue
            yield (line_no, None, line)
            count += 1
            if max_docs is not None and count >= max_docs:
                return


def extract_lines(corpus_path: str, fmt: str = "jsonl", workers: int = 1,
                  skip_bad: bool = False, max_docs: Optional[int] = None,
                  counters: Optional[dict] = None) -> Iterator[str]:
    if counters is None:
        counters = {}
    params = {"input_path": corpus_path, "skip_bad": skip_bad}
    units = _corpus_units(corpus_path, fmt, max_docs)
    seen: set[str] = set()
    for line_no, doc_id, lines, delta in _run_units(units, _extract_unit,
                                                    workers, params):
        _merge(counters, delta)
        if doc_id is None:
            continue
        if doc_id in seen:
            raise CorpusError(corpus_path, line_no,
                              f"duplicate doc_id {doc_id!r}")
        seen.add(doc_id)
        yield from lines


# ----------------------------------------------------------------- filter

def _filter_unit(unit):
    doc_id, sent, raws = unit
    counters: dict = {}
    rng = rng_for(_CTX["seed"], doc_id, sent)
    kept = filter_sentence_triples(raws, _CTX["stopwords"], rng,
                                   counters=counters)
    lines = [dump_line({"doc_id": doc_id, "sent": sent, "subj": t.subject,
                        "rel": t.relation, "obj": t.object, "conf": None})
             for t in kept]
    return (lines, counters)


def _sentence_groups(path: str, skip_bad: bool,
                     counters: dict) -> Iterator[tuple]:
    """Consecutive (doc_id, sent) runs; regrouped duplicates are an error
    because each group may be seeded only once."""
    stats: dict = {}
    seen: set[tuple[str, int]] = set()
    key = None
    raws: list[RawTriple] = []
    for triple in ingest.iter_triples(path, skip_bad=skip_bad, stats=stats):
        new_key = (triple.doc_id, triple.sentence_index)
        if new_key != key:
            if key is not None:
                yield (key[0], key[1], raws)
            if new_key in seen:
                raise CorpusError(path, 0,
                                  f"triples for {new_key} are not contiguous")
            seen.add(new_key)
            key, raws = new_key, []
        raws.append(triple)
    if key is not None:
        yield (key[0], key[1], raws)
    _merge(counters, stats)


def filter_lines(triples_path: str, seed: int, workers: int = 1,
                 skip_bad: bool = False,
                 counters: Optional[dict] = None) -> Iterator[str]:
    if counters is None:
        counters = {}
    params = {"input_path": triples_path, "seed": seed, "skip_bad": skip_bad}
    units = _sentence_groups(triples_path, skip_bad, counters)
    for lines, delta in _run_units(units, _filter_unit, workers, params):
        _merge(counters, delta)
        yield from lines


# ------------------------------------------------------------ build-phase1

def _phase1_unit(unit):
    line_no, doc_id, payload = unit
    counters: dict = {}
    try:
        if doc_id is None:
            record = json.loads(payload)
            if "_header" in record or "_footer" in record:
                return (line_no, None, None, counters)
            doc = ingest._doc_from_record(record, _CTX["input_path"], line_no)
        else:
            doc = ingest.Document(
                doc_id=doc_id, title=None,
                sentences=tuple(ingest.segment_sentences(payload)))
    except (json.JSONDecodeError, CorpusError, ValueError) as exc:
        if _CTX.get("skip_bad"):
            counters["bad_lines"] = 1
            return (line_no, None, None, counters)
        if isinstance(exc, CorpusError):
            raise
        raise CorpusError(_CTX["input_path"], line_no, str(exc)) from None

    max_sentences = _CTX["max_sentences"]
    if len(doc.sentences) > max_sentences:
        counters["doc_truncated"] = 1
        doc = ingest.Document(doc_id=doc.doc_id, title=doc.title,
                              sentences=doc.sentences[:max_sentences])
    stream_seed = _CTX["stream_seed"]
    triples = _CTX["triples"]
    filtered = {}
    for sentence in doc.sentences:
        raws = triples.get((doc.doc_id, sentence.index))
        if not raws:
            continue
        rng = rng_for(stream_seed, doc.doc_id, sentence.index)
        kept = filter_sentence_triples(raws, _CTX["stopwords"], rng,
                                       counters=counters)
        if kept:
            filtered[sentence.index] = kept
    try:
        sample = build_sample(doc, filtered, rng_for(stream_seed, doc.doc_id),
                              seed=_CTX["seed"], counters=counters)
    except TooShortDocument:
        counters["doc_too_short"] = 1
        return (line_no, doc.doc_id, None, counters)
    except ValueError:
        counters["doc_unserializable"] = 1
        return (line_no, doc.doc_id, None, counters)
    if sample is None:
        return (line_no, doc.doc_id, None, counters)
    line = dump_line(sample_to_record(sample, {"doc_id": doc.doc_id}))
    return (line_no, doc.doc_id, line, counters)


def phase1_lines(corpus_path: str, triples_path: str, seed: int,
                 epoch: int = 0, fmt: str = "jsonl", workers: int = 1,
                 skip_bad: bool = False, max_docs: Optional[int] = None,
                 max_sentences: int = 40,
                 counters: Optional[dict] = None) -> Iterator[str]:
    if counters is None:
        counters = {}
    params = {"input_path": corpus_path, "triples_path": triples_path,
              "seed": seed, "stream_seed": stream_seed_for(seed, epoch),
              "max_sentences": max_sentences, "skip_bad": skip_bad}
    units = _corpus_units(corpus_path, fmt, max_docs)
    seen: set[str] = set()
    emitted = 0
    for line_no, doc_id, line, delta in _run_units(units, _phase1_unit,
                                                   workers, params):
        _merge(counters, delta)
        if doc_id is None:
            continue
        if doc_id in seen:
            raise CorpusError(corpus_path, line_no,
                              f"duplicate doc_id {doc_id!r}")
        seen.add(doc_id)
        if line is not None:
            emitted += 1
            yield line
    counters["samples"] = emitted
    if max_docs is None:
        orphans = sum(1 for t in ingest.iter_triples(triples_path,
                                                     skip_bad=True)
                      if t.doc_id not in seen)
        if orphans:
            counters["triple_orphan_doc"] = orphans


# ------------------------------------------------------------ build-phase2

def _phase2_unit(unit):
    line_no, payload = unit
    counters: dict = {}
    try:
        record = json.loads(payload)
        if "_header" in record or "_footer" in record:
            return (line_no, None, [], counters)
        d = dialogue_from_record(record)
    except (json.JSONDecodeError, ValueError) as exc:
        if _CTX.get("skip_bad"):
            counters["bad_lines"] = 1
            return (line_no, None, [], counters)
        raise CorpusError(_CTX["input_path"], line_no, str(exc)) from None
    lines = []
    for turn_index in range(len(d.turns)):
        try:
            sample = build_tod_sample(d, turn_index, _CTX["schema"],
                                      seed=_CTX["seed"], counters=counters)
        except ValueError:
            counters["turn_unserializable"] = (
                counters.get("turn_unserializable", 0) + 1)
            continue
        if sample is None:
            continue
        lines.append(dump_line(sample_to_record(
            sample, {"doc_id": d.dialogue_id, "dialogue_id": d.dialogue_id,
                     "turn": turn_index})))
    return (line_no, d.dialogue_id, lines, counters)


def _dialogue_units(path: str,
                    max_docs: Optional[int] = None) -> Iterator[tuple]:
    count = 0
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            if stripped.startswith(('{"_header"', '{"_footer"')):
                continue
            yield (line_no, line)
            count += 1
            if max_docs is not None and count >= max_docs:
                return


def phase2_lines(dialogues_path: str, ontology_path: str, seed: int = 0,
                 workers: int = 1, skip_bad: bool = False,
                 max_docs: Optional[int] = None,
                 counters: Optional[dict] = None) -> Iterator[str]:
    if counters is None:
        counters = {}
    params = {"input_path": dialogues_path, "ontology_path": ontology_path,
              "seed": seed, "skip_bad": skip_bad}
    units = _dialogue_units(dialogues_path, max_docs)
    seen: set[str] = set()
    emitted = 0
    for line_no, dialogue_id, lines, delta in _run_units(
            units, _phase2_unit, workers, params):
        _merge(counters, delta)
        if dialogue_id is None:
            continue
        if dialogue_id in seen:
            raise CorpusError(dialogues_path, line_no,
                              f"duplicate dialogue_id {dialogue_id!r}")
        seen.add(dialogue_id)
        emitted += len(lines)
        yield from lines
    counters["samples"] = emitted


# ---------------------------------------------------------- build-finetune

def _finetune_unit(unit):
    line_no, payload = unit
    counters: dict = {}
    try:
        record = json.loads(payload)
        if "_header" in record or "_footer" in record:
            return (line_no, None, [], counters)
        d = dialogue_from_record(record)
    except (json.JSONDecodeError, ValueError) as exc:
        if _CTX.get("skip_bad"):
            counters["bad_lines"] = 1
            return (line_no, None, [], counters)
        raise CorpusError(_CTX["input_path"], line_no, str(exc)) from None
    lines = []
    for turn_index in range(len(d.turns)):
        try:
            sample = dlg.build_finetune_sample(d, turn_index, _CTX["schema"],
                                               _CTX["db"], counters=counters)
        except ValueError as exc:
            if _CTX.get("skip_bad"):
                counters["turn_unserializable"] = (
                    counters.get("turn_unserializable", 0) + 1)
                continue
            raise CorpusError(_CTX["input_path"], line_no, str(exc)) from None
        if sample is None:
            continue
        lines.append(dump_line(dlg.finetune_to_record(sample,
                                                      seed=_CTX["seed"])))
    return (line_no, d.dialogue_id, lines, counters)


def finetune_lines(dialogues_path: str, ontology_path: str, db_path: str,
                   seed: int = 0, workers: int = 1, skip_bad: bool = False,
                   max_docs: Optional[int] = None,
                   counters: Optional[dict] = None) -> Iterator[str]:
    if counters is None:
        counters = {}
    params = {"input_path": dialogues_path, "ontology_path": ontology_path,
              "db_path": db_path, "seed": seed, "skip_bad": skip_bad}
    units = _dialogue_units(dialogues_path, max_docs)
    seen: set[str] = set()
    emitted = 0
    for line_no, dialogue_id, lines, delta in _run_units(
            units, _finetune_unit, workers, params):
        _merge(counters, delta)
        if dialogue_id is None:
            continue
        if dialogue_id in seen:
            raise CorpusError(dialogues_path, line_no,
                              f"duplicate dialogue_id {dialogue_id!r}")
        seen.add(dialogue_id)
        emitted += len(lines)
        yield from lines
    counters["samples"] = emitted
