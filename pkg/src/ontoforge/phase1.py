"""Masked pretraining samples built from documents: object-value masking
over per-sentence triples plus next-text masking over the final one or two
sentences, and the flat source/target sequence layout.

Sequence grammar (single spaces between tokens):

* source: ``[ONT] subj :: rel :: [MASK] | ... [CTX] <context text> [NTG]``
* target: ``[ONT] subj :: rel :: obj | ... [RES] <next text>``

Sample JSONL envelope:
``{"sample_id": str, "source": str, "target": str, "meta": {...}}`` where
meta carries ``doc_id``, ``k``, ``n_triples`` and ``seed`` (phase-2 adds
``dialogue_id`` and ``turn``).
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .filtering import Triple
from .ingest import Document, Sentence

MASK = "[MASK]"
ONT = "[ONT]"
CTX = "[CTX]"
NTG = "[NTG]"
RES = "[RES]"
FIELD_SEP = " :: "
TRIPLE_SEP = " | "

_RESERVED = (ONT, CTX, NTG, RES, MASK, "::", "|", "[BS]", "[DB]")


class TooShortDocument(ValueError):
    """Document has fewer than 3 sentences and must be skipped."""


class ParseError(ValueError):
    def __init__(self, message: str, position: int = 0):
        self.position = position
        super().__init__(f"{message} (at offset {position})")


@dataclass(frozen=True)
class MaskedTriple:
    subject: str
    relation: str

    @property
    def object(self) -> str:
        return MASK


@dataclass(frozen=True)
class SerializedPair:
    source_seq: str
    target_seq: str


@dataclass(frozen=True)
class PretrainSample:
    sample_id: str
    masked_ontology: tuple[MaskedTriple, ...]
    masked_context: str
    target_triples: tuple[Triple, ...]
    target_next_text: str
    n_masked_sentences: int
    seed: int

    def validate(self) -> None:
        if not self.masked_ontology:
            raise ValueError("sample needs at least one triple")
        if len(self.masked_ontology) != len(self.target_triples):
            raise ValueError("masked ontology and target triples differ in length")
        for masked, full in zip(self.masked_ontology, self.target_triples):
            if (masked.subject, masked.relation) != (full.subject, full.relation):
                raise ValueError("misaligned (subject, relation) pair")
        if self.n_masked_sentences not in (1, 2):
            raise ValueError("n_masked_sentences must be 1 or 2")
        for text in (self.masked_context, self.target_next_text):
            if not text.strip():
                raise ValueError("context and next text must be non-blank")
            if any(marker in text for marker in _RESERVED):
                raise ValueError("reserved marker inside text")
        for triple in self.target_triples:
            if not serializable_triple(triple):
                raise ValueError(f"unserializable triple {triple.as_tuple()}")

    def content_key(self) -> tuple:
        """The part of the sample the sequence grammar carries."""
        return (tuple(t.as_tuple() for t in self.target_triples),
                self.masked_context, self.target_next_text)


def serializable_triple(triple: Triple) -> bool:
    return not any(marker in comp
                   for comp in triple.as_tuple() for marker in _RESERVED)


def split_next_text(doc: Document, rng: random.Random
                    ) -> tuple[list[Sentence], list[Sentence]]:
    """Mask the last k sentences, k drawn 50/50 from {1, 2}; the context
    keeps at least one sentence."""
    if len(doc.sentences) < 3:
        raise TooShortDocument(doc.doc_id)
    k = 1 if rng.random() < 0.5 else 2
    return list(doc.sentences[:-k]), list(doc.sentences[-k:])


def build_sample(doc: Document, triples: Mapping[int, Sequence[Triple]],
                 rng: random.Random, seed: int = 0,
                 counters: Optional[dict] = None) -> Optional[PretrainSample]:
    """Assemble one sample per document; None when no context sentence
    contributes a triple (the document is rejected and counted)."""
    context, next_text = split_next_text(doc, rng)
    collected: list[Triple] = []
    for sent in context:
        for triple in triples.get(sent.index, ()):
            if not serializable_triple(triple):
                if counters is not None:
                    counters["triple_unserializable"] = (
                        counters.get("triple_unserializable", 0) + 1)
                continue
            collected.append(triple)
    if not collected:
        if counters is not None:
            counters["doc_no_context_triples"] = (
                counters.get("doc_no_context_triples", 0) + 1)
        return None
    sample = PretrainSample(
        sample_id=f"p1-{doc.doc_id}",
        masked_ontology=tuple(MaskedTriple(t.subject, t.relation) for t in collected),
        masked_context=" ".join(s.text for s in context),
        target_triples=tuple(collected),
        target_next_text=" ".join(s.text for s in next_text),
        n_masked_sentences=len(next_text),
        seed=seed,
    )
    sample.validate()
    return sample


def serialize_sample(sample: PretrainSample) -> SerializedPair:
    masked = TRIPLE_SEP.join(
        f"{t.subject}{FIELD_SEP}{t.relation}{FIELD_SEP}{MASK}"
        for t in sample.masked_ontology)
    full = TRIPLE_SEP.join(
        f"{t.subject}{FIELD_SEP}{t.relation}{FIELD_SEP}{t.object}"
        for t in sample.target_triples)
    return SerializedPair(
        source_seq=f"{ONT} {masked} {CTX} {sample.masked_context} {NTG}",
        target_seq=f"{ONT} {full} {RES} {sample.target_next_text}",
    )


def _parse_triple_block(block: str, offset: int, masked: bool) -> list[Triple]:
    triples = []
    pos = offset
    for chunk in block.split(TRIPLE_SEP):
        fields = chunk.split(FIELD_SEP)
        if len(fields) != 3:
            raise ParseError(f"triple needs 3 '::'-separated fields, got "
                             f"{len(fields)}", pos)
        subj, rel, obj = fields
        if not subj or not rel or not obj:
            raise ParseError("blank triple component", pos)
        if masked and obj != MASK:
            raise ParseError(f"source object must be {MASK}", pos)
        triples.append(Triple(subject=subj, relation=rel, object=obj))
        pos += len(chunk) + len(TRIPLE_SEP)
    return triples


def parse_sample(pair: SerializedPair) -> PretrainSample:
    """Inverse of :func:`serialize_sample` on the content the grammar
    carries; envelope-only fields (sample id, k, seed) take defaults."""
    src, tgt = pair.source_seq, pair.target_seq
    if not src.startswith(ONT + " "):
        raise ParseError(f"source must start with '{ONT} '", 0)
    ctx_at = src.find(f" {CTX} ")
    if ctx_at < 0:
        raise ParseError(f"source is missing ' {CTX} '", len(ONT) + 1)
    if not src.endswith(f" {NTG}"):
        raise ParseError(f"source must end with ' {NTG}'", len(src))
    masked = _parse_triple_block(src[len(ONT) + 1:ctx_at], len(ONT) + 1, masked=True)
    context = src[ctx_at + len(CTX) + 2:len(src) - len(NTG) - 1]

    if not tgt.startswith(ONT + " "):
        raise ParseError(f"target must start with '{ONT} '", 0)
    res_at = tgt.find(f" {RES} ")
    if res_at < 0:
        raise ParseError(f"target is missing ' {RES} '", len(ONT) + 1)
    full = _parse_triple_block(tgt[len(ONT) + 1:res_at], len(ONT) + 1, masked=False)
    next_text = tgt[res_at + len(RES) + 2:]

    if len(masked) != len(full):
        raise ParseError("source and target carry different triple counts", res_at)
    for m, f in zip(masked, full):
        if (m.subject, m.relation) != (f.subject, f.relation):
            raise ParseError("source/target (subject, relation) mismatch", res_at)
    return PretrainSample(
        sample_id="",
        masked_ontology=tuple(MaskedTriple(t.subject, t.relation) for t in masked),
        masked_context=context,
        target_triples=tuple(full),
        target_next_text=next_text,
        n_masked_sentences=1,
        seed=0,
    )


def sample_to_record(sample: PretrainSample, meta: dict) -> dict:
    pair = serialize_sample(sample)
    full_meta = {"k": sample.n_masked_sentences,
                 "n_triples": len(sample.target_triples),
                 "seed": sample.seed}
    full_meta.update(meta)
    return {"sample_id": sample.sample_id, "source": pair.source_seq,
            "target": pair.target_seq, "meta": full_meta}


def sample_from_record(record: dict) -> PretrainSample:
    parsed = parse_sample(SerializedPair(record["source"], record["target"]))
    meta = record.get("meta", {})
    return PretrainSample(
        sample_id=record.get("sample_id", ""),
        masked_ontology=parsed.masked_ontology,
        masked_context=parsed.masked_context,
        target_triples=parsed.target_triples,
        target_next_text=parsed.target_next_text,
        n_masked_sentences=meta.get("k", 1),
        seed=meta.get("seed", 0),
    )
