"""Reading forge sample files and turning them into padded batches.

All three sample flavours (phase-1, phase-2, fine-tune) share the same
envelope: one JSON object per line with "source" and "target" strings
plus a "meta" object. Header/footer lines from the forge CLI ("_header",
"_footer") are skipped so a captured stream works as-is.

Objectives are realised as masks over the target tokens rather than as
separate models:

  both    source unchanged, loss on every target token
  no_or   ontology block stripped from the source, loss only on the
          response segment ("[RES]" onward)
  no_ntg  source unchanged, loss only on the ontology segment (tokens
          before "[RES]")
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import torch

from .vocab import Vocab, tokenize

OBJECTIVES = ("both", "no_or", "no_ntg")

ONT_MARK = "[ONT]"
CTX_MARK = "[CTX]"
RES_MARK = "[RES]"


class SampleError(ValueError):
    """A sample line the trainer cannot use, tagged with its id."""


@dataclass(frozen=True)
class Sample:
    sample_id: str
    source: str
    target: str
    meta: dict


def read_samples(path: str) -> list[Sample]:
    samples: list[Sample] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SampleError(f"{path}:{lineno}: not JSON ({exc})") from None
            if not isinstance(record, dict):
                raise SampleError(f"{path}:{lineno}: not an object")
            if "_header" in record or "_footer" in record:
                continue
            meta = record.get("meta")
            if not isinstance(meta, dict):
                meta = {}
            sample_id = str(record.get("sample_id")
                            or meta.get("sample_id")
                            or meta.get("dialogue_id")
                            or "?")
            source = record.get("source")
            target = record.get("target")
            if not isinstance(source, str) or not source.strip():
                raise SampleError(f"{path}:{lineno} (sample {sample_id}): bad source")
            if not isinstance(target, str) or not target.strip():
                raise SampleError(f"{path}:{lineno} (sample {sample_id}): bad target")
            samples.append(Sample(sample_id=sample_id, source=source,
                                  target=target, meta=meta))
    return samples


def strip_ontology_block(source: str) -> str:
    """Drop the [ONT] ... block, keeping everything from [CTX] onward."""
    tokens = tokenize(source)
    if ONT_MARK not in tokens or CTX_MARK not in tokens:
        return source
    start = tokens.index(ONT_MARK)
    end = tokens.index(CTX_MARK)
    if end < start:
        return source
    return " ".join(tokens[:start] + tokens[end:])


def target_keep_flags(tokens: list[str], objective: str) -> list[bool]:
    """Which target tokens carry loss. The trailing <eos> is handled by
    the caller; flags here cover the raw target tokens only."""
    if objective == "both":
        return [True] * len(tokens)
    if RES_MARK in tokens:
        cut = tokens.index(RES_MARK)
    else:
        cut = len(tokens)
    if objective == "no_or":
        return [i >= cut for i in range(len(tokens))]
    if objective == "no_ntg":
        return [i < cut for i in range(len(tokens))]
    raise ValueError(f"unknown objective: {objective}")


@dataclass
class EncodedSample:
    src: list[int]
    tgt: list[int]          # <bos> target <eos>
    keep: list[bool]        # over tgt[1:], i.e. the label positions
    in_or: list[bool]       # label positions before [RES] (the ontology part)


def encode_sample(sample: Sample, vocab: Vocab, objective: str,
                  max_len: int | None = None) -> EncodedSample:
    source = sample.source
    if objective == "no_or":
        source = strip_ontology_block(source)
    tgt_tokens = tokenize(sample.target)
    flags = target_keep_flags(tgt_tokens, objective)
    cut = tgt_tokens.index(RES_MARK) if RES_MARK in tgt_tokens else len(tgt_tokens)
    # <eos> learns only when the response segment is trained; a pure
    # ontology objective never decodes past its own segment anyway.
    eos_flag = objective != "no_ntg"
    encoded = EncodedSample(
        src=vocab.encode(source),
        tgt=[vocab.bos_id] + [vocab.id_of(t) for t in tgt_tokens] + [vocab.eos_id],
        keep=flags + [eos_flag],
        in_or=[i < cut for i in range(len(tgt_tokens))] + [False],
    )
    if max_len is not None:
        longest = max(len(encoded.src), len(encoded.tgt))
        if longest > max_len:
            raise SampleError(
                f"sample {sample.sample_id}: {longest} tokens exceeds "
                f"max_len {max_len}")
    return encoded


@dataclass
class Batch:
    src: torch.Tensor           # (B, S) long
    src_pad: torch.Tensor       # (B, S) bool, True where padded
    tgt_in: torch.Tensor        # (B, T) long, starts with <bos>
    labels: torch.Tensor        # (B, T) long
    keep: torch.Tensor          # (B, T) bool, objective mask over labels
    in_or: torch.Tensor         # (B, T) bool, ontology-segment labels
    label_pad: torch.Tensor     # (B, T) bool, True where padded


def make_batch(encoded: list[EncodedSample], pad_id: int) -> Batch:
    src_len = max(len(e.src) for e in encoded)
    tgt_len = max(len(e.tgt) for e in encoded) - 1
    src = torch.full((len(encoded), src_len), pad_id, dtype=torch.long)
    src_pad = torch.ones((len(encoded), src_len), dtype=torch.bool)
    tgt_in = torch.full((len(encoded), tgt_len), pad_id, dtype=torch.long)
    labels = torch.full((len(encoded), tgt_len), pad_id, dtype=torch.long)
    keep = torch.zeros((len(encoded), tgt_len), dtype=torch.bool)
    in_or = torch.zeros((len(encoded), tgt_len), dtype=torch.bool)
    label_pad = torch.ones((len(encoded), tgt_len), dtype=torch.bool)
    for i, e in enumerate(encoded):
        src[i, : len(e.src)] = torch.tensor(e.src, dtype=torch.long)
        src_pad[i, : len(e.src)] = False
        n = len(e.tgt) - 1
        tgt_in[i, :n] = torch.tensor(e.tgt[:-1], dtype=torch.long)
        labels[i, :n] = torch.tensor(e.tgt[1:], dtype=torch.long)
        keep[i, :n] = torch.tensor(e.keep, dtype=torch.bool)
        in_or[i, :n] = torch.tensor(e.in_or, dtype=torch.bool)
        label_pad[i, :n] = False
    return Batch(src=src, src_pad=src_pad, tgt_in=tgt_in, labels=labels,
                 keep=keep, in_or=in_or, label_pad=label_pad)


def batched(items: list, size: int) -> list[list]:
    return [items[i: i + size] for i in range(0, len(items), size)]
