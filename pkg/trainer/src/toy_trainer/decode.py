"""Greedy decoding and the two-stage prediction flow.

predict() decodes the belief-state segment first, stops at [DB], asks
the forge CLI (db-query) for the live bucket of every predicted domain,
splices the answer into the target prefix, then decodes the response.
The model never free-runs the DB segment; hallucinated domains that the
database does not know are dropped, matching how the sample builder
handles states that reference missing tables.

Hitting the length cap in either stage sets meta.truncated on the
prediction; the record is still emitted with whatever was decoded.
"""

from __future__ import annotations

import json
import subprocess

import torch

from .data import RES_MARK, Sample
from .train import Trained
from .vocab import Vocab, tokenize

BS_MARK = "[BS]"
DB_MARK = "[DB]"
ONT_MARK = "[ONT]"
SEP = "::"
CHUNK_SEP = "|"
EMPTY_DB = "db_0"

DEFAULT_FORGE_CMD = ("ontoforge",)


def greedy(model, vocab: Vocab, src_ids: list[int],
           forced: list[int] | None = None,
           stop_token: str | None = None) -> tuple[list[int], str]:
    """Argmax decoding. Returns (ids after <bos>, reason), where reason
    is "eos", "stop" (stop_token was emitted, excluded from the ids), or
    "cap" (decoder input hit max_len). Forced ids are consumed as-is."""
    max_len = model.config.max_len
    stop_id = vocab.id_of(stop_token) if stop_token is not None else None
    model.eval()
    with torch.no_grad():
        src = torch.tensor([src_ids], dtype=torch.long)
        src_pad = torch.zeros_like(src, dtype=torch.bool)
        memory = model.encode(src, src_pad)
        ids = [vocab.bos_id] + list(forced or [])
        while True:
            if len(ids) >= max_len:
                return ids[1:], "cap"
            tgt_in = torch.tensor([ids], dtype=torch.long)
            logits = model.decode(memory, src_pad, tgt_in)
            next_id = int(logits[0, -1].argmax())
            if next_id == vocab.eos_id:
                return ids[1:], "eos"
            if stop_id is not None and next_id == stop_id:
                return ids[1:], "stop"
            ids.append(next_id)


def parse_state_tokens(tokens: list[str]) -> list[tuple[str, str, str]]:
    """Belief-state tokens → (domain, slot, value) triples. Malformed
    chunks are skipped; a repeated (domain, slot) keeps the last value."""
    if tokens and tokens[0] == BS_MARK:
        tokens = tokens[1:]
    chunks: list[list[str]] = [[]]
    for tok in tokens:
        if tok == CHUNK_SEP:
            chunks.append([])
        else:
            chunks[-1].append(tok)
    pairs: dict[tuple[str, str], str] = {}
    for chunk in chunks:
        seps = [i for i, tok in enumerate(chunk) if tok == SEP]
        if len(seps) != 2:
            continue
        a, b = seps
        domain = " ".join(chunk[:a])
        slot = " ".join(chunk[a + 1:b])
        value = " ".join(chunk[b + 1:])
        if domain and slot and value:
            pairs[(domain, slot)] = value
    return [(d, s, v) for (d, s), v in pairs.items()]


def parse_ont_chunks(tokens: list[str]) -> list[tuple[str, str, str]]:
    """Ontology-segment tokens → (subject, relation, object) triples,
    in order, malformed chunks skipped."""
    if RES_MARK in tokens:
        tokens = tokens[: tokens.index(RES_MARK)]
    if tokens and tokens[0] == ONT_MARK:
        tokens = tokens[1:]
    triples: list[tuple[str, str, str]] = []
    chunk: list[str] = []
    for tok in tokens + [CHUNK_SEP]:
        if tok != CHUNK_SEP:
            chunk.append(tok)
            continue
        seps = [i for i, t in enumerate(chunk) if t == SEP]
        if len(seps) == 2:
            a, b = seps
            triples.append((" ".join(chunk[:a]), " ".join(chunk[a + 1:b]),
                            " ".join(chunk[b + 1:])))
        chunk = []
    return triples


def query_bucket(db_path: str, domain: str, constraints: dict[str, str],
                 forge_cmd: tuple[str, ...] = DEFAULT_FORGE_CMD
                 ) -> str | None:
    """One db-query call; None when the query fails (unknown domain)."""
    proc = subprocess.run(
        [*forge_cmd, "db-query", "--db", db_path, "--domain", domain,
         "--state", json.dumps({domain: constraints})],
        capture_output=True, text=True)
    if proc.returncode != 0:
        return None
    for line in proc.stdout.splitlines():
        try:
            record = json.loads(line)
        except json.JSONDecodeError:
            continue
        if isinstance(record, dict) and "bucket" in record:
            bucket = record["bucket"]
            return bucket if isinstance(bucket, str) else None
    return None


def db_segment_tokens(state: list[tuple[str, str, str]], db_path: str,
                      forge_cmd: tuple[str, ...] = DEFAULT_FORGE_CMD
                      ) -> list[str]:
    buckets: list[tuple[str, str]] = []
    for domain in sorted({d for d, _, _ in state}):
        constraints = {s: v for d, s, v in state if d == domain}
        bucket = query_bucket(db_path, domain, constraints, forge_cmd)
        if bucket is not None:
            buckets.append((domain, bucket))
    tokens = [DB_MARK]
    if not buckets:
        tokens.append(EMPTY_DB)
        return tokens
    for i, (domain, bucket) in enumerate(buckets):
        if i:
            tokens.append(CHUNK_SEP)
        tokens.extend((domain, SEP, bucket))
    return tokens


def predict_sample(trained: Trained, sample: Sample, db_path: str,
                   forge_cmd: tuple[str, ...] = DEFAULT_FORGE_CMD) -> dict:
    model, vocab = trained.model, trained.vocab
    max_len = model.config.max_len
    truncated = False

    src_tokens = tokenize(sample.source)
    if len(src_tokens) > max_len:
        src_tokens = src_tokens[:max_len]
        truncated = True
    src_ids = [vocab.id_of(t) for t in src_tokens]

    stage1_ids, reason = greedy(model, vocab, src_ids, stop_token=DB_MARK)
    if reason == "cap":
        truncated = True
    state = parse_state_tokens(vocab.decode(stage1_ids))
    state.sort()

    forced_tokens = [BS_MARK]
    for i, (d, s, v) in enumerate(state):
        if i:
            forced_tokens.append(CHUNK_SEP)
        forced_tokens.extend([d, SEP, s, SEP] + v.split())
    forced_tokens += db_segment_tokens(state, db_path, forge_cmd)
    forced_tokens.append(RES_MARK)
    forced_ids = [vocab.id_of(t) for t in forced_tokens]

    response = ""
    if len(forced_ids) + 1 >= max_len:
        truncated = True
    else:
        full_ids, reason = greedy(model, vocab, src_ids, forced=forced_ids)
        if reason == "cap":
            truncated = True
        response = " ".join(vocab.decode(full_ids[len(forced_ids):]))

    meta = sample.meta or {}
    try:
        turn = int(meta.get("turn", 0))
    except (TypeError, ValueError):
        turn = 0
    return {
        "dialogue_id": str(meta.get("dialogue_id") or sample.sample_id),
        "turn": turn,
        "state": [[d, s, v] for d, s, v in state],
        "response": response,
        "meta": {"truncated": truncated},
    }


def predict(trained: Trained, samples: list[Sample], db_path: str,
            forge_cmd: tuple[str, ...] = DEFAULT_FORGE_CMD) -> list[dict]:
    return [predict_sample(trained, s, db_path, forge_cmd) for s in samples]


def write_predictions(records: list[dict], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True))
            fh.write("\n")


def decode_or_triples(trained: Trained, sample: Sample
                      ) -> list[tuple[str, str, str]]:
    """Free-run the model on a phase-1 source and parse the decoded
    ontology segment."""
    vocab = trained.vocab
    src_ids = vocab.encode(sample.source)
    ids, _ = greedy(trained.model, vocab, src_ids)
    return parse_ont_chunks(vocab.decode(ids))


def or_exact_match(trained: Trained, samples: list[Sample]) -> float:
    """Fraction of samples whose decoded ontology triples equal the gold
    ones exactly, order and count included."""
    if not samples:
        raise ValueError("no samples to score")
    hits = 0
    for sample in samples:
        gold = parse_ont_chunks(tokenize(sample.target))
        if decode_or_triples(trained, sample) == gold:
            hits += 1
    return hits / len(samples)
