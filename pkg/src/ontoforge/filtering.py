"""Per-sentence triple filtering.

The four steps, applied in order to the raw triples of one sentence:

1. strip stopwords from every component; drop the triple if any component
   is blank afterwards;
2. drop triples with a component longer than 4 words (counted on the
   stripped component);
3. for triples sharing a (subject, relation) pair, keep exactly one chosen
   uniformly at random;
4. if more than two remain, keep two chosen uniformly at random.

Survivors keep their input order.  Random draws follow the pinned protocol
in :mod:`ontoforge.seeding`: iterate (subject, relation) groups in
first-occurrence order and draw one index per multi-member group, then draw
one index pair when more than two survive.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from importlib import resources
from typing import Optional, Sequence

from .ingest import RawTriple, tokenize
from .seeding import rand_index, rand_pair

MAX_COMPONENT_TOKENS = 4
MAX_TRIPLES_PER_SENTENCE = 2


@dataclass(frozen=True)
class Triple:
    """A cleaned (subject, relation, object) unit; phase-2 uses the same
    shape for (domain, slot, value)."""
    subject: str
    relation: str
    object: str

    @property
    def domain(self) -> str:
        return self.subject

    @property
    def slot(self) -> str:
        return self.relation

    @property
    def value(self) -> str:
        return self.object

    def as_tuple(self) -> tuple[str, str, str]:
        return (self.subject, self.relation, self.object)


@dataclass(frozen=True)
class StopwordList:
    words: frozenset[str]
    version: str

    def __post_init__(self):
        if not self.words:
            raise ValueError("stopword list must be non-empty")


def load_stopwords() -> StopwordList:
    """The shipped list; its version tag is recorded in output headers."""
    text = (resources.files("ontoforge") / "data" / "stopwords.txt").read_text("utf-8")
    version = "sw-v0"
    words = []
    for line in text.splitlines():
        line = line.strip()
        if line.startswith("#"):
            if "version" in line:
                version = line.split("version", 1)[1].strip(" ,:")
            continue
        if line:
            words.append(line.lower())
    return StopwordList(words=frozenset(words), version=version)


def _strip_component(component: str, stops: StopwordList) -> str:
    return " ".join(t for t in tokenize(component) if t not in stops.words)


def strip_stopwords(raw: RawTriple, stops: StopwordList) -> Optional[Triple]:
    """Remove stopword tokens from each component; None when any component
    goes blank."""
    subject = _strip_component(raw.subject, stops)
    relation = _strip_component(raw.relation, stops)
    obj = _strip_component(raw.object, stops)
    if not subject or not relation or not obj:
        return None
    return Triple(subject=subject, relation=relation, object=obj)


def filter_sentence_triples(raws: Sequence[RawTriple], stops: StopwordList,
                            rng: random.Random,
                            counters: Optional[dict] = None) -> list[Triple]:
    """Apply the four filter steps to the raw triples of one sentence.
    ``counters``, when given, accumulates drop counts by reason."""

    def bump(reason: str, by: int = 1) -> None:
        if counters is not None and by:
            counters[reason] = counters.get(reason, 0) + by

    survivors: list[Triple] = []
    for raw in raws:
        triple = strip_stopwords(raw, stops)
        if triple is None:
            bump("triple_blank_after_stopwords")
            continue
        if any(len(c.split()) > MAX_COMPONENT_TOKENS for c in triple.as_tuple()):
            bump("triple_component_too_long")
            continue
        survivors.append(triple)

    groups: dict[tuple[str, str], list[int]] = {}
    for pos, triple in enumerate(survivors):
        groups.setdefault((triple.subject, triple.relation), []).append(pos)
    kept_positions: list[int] = []
    for members in groups.values():
        if len(members) == 1:
            kept_positions.append(members[0])
        else:
            kept_positions.append(members[rand_index(rng, len(members))])
            bump("triple_duplicate_pair", len(members) - 1)
    kept_positions.sort()
    kept = [survivors[p] for p in kept_positions]

    if len(kept) > MAX_TRIPLES_PER_SENTENCE:
        bump("triple_over_sentence_cap", len(kept) - MAX_TRIPLES_PER_SENTENCE)
        first, second = rand_pair(rng, len(kept))
        kept = [kept[first], kept[second]]
    return kept
