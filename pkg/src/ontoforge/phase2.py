"""Ontology text-matching over task-oriented dialogues and the samples it
yields. A sample's triples come from matching schema value aliases against
the normalized dialogue context at token boundaries; no state annotation is
read, even when the input file carries one.

Wire formats:

* ontology JSON: ``{"domains": {domain: {slot: [{"canonical": str,
  "aliases": [str, ...]}, ...]}}}``
* dialogue JSONL: ``{"dialogue_id": str, "turns": [{"user": str,
  "system": str}, ...]}``; turns may carry an optional ``"state"`` object
  (``{domain: {slot: value}}``) which only the fine-tune builder reads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Optional, Sequence

from .filtering import Triple
from .ingest import CorpusError, tokenize
from .phase1 import MaskedTriple, PretrainSample, serializable_triple


def normalize(text: str) -> str:
    """Collapse text to the matching surface: lowercased tokens joined by
    single spaces, punctuation dropped except digit-flanked colons."""
    return " ".join(tokenize(text))


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class ValueEntry:
    canonical: str
    aliases: tuple[str, ...]

    def __post_init__(self):
        if not self.canonical.strip():
            raise SchemaError("blank canonical value")
        if self.canonical not in self.aliases:
            object.__setattr__(self, "aliases", (self.canonical,) + self.aliases)


@dataclass(frozen=True)
class OntologySchema:
    domains: Mapping[str, Mapping[str, tuple[ValueEntry, ...]]]

    def validate(self) -> None:
        for domain, slots in self.domains.items():
            _check_name(domain, "domain")
            if "_" in domain:
                raise SchemaError(
                    f"domain name {domain!r} may not contain '_' "
                    "(reserved for [domain_slot] placeholders)")
            for slot, entries in slots.items():
                _check_name(slot, "slot")
                for entry in entries:
                    for alias in entry.aliases:
                        if not alias.strip():
                            raise SchemaError(
                                f"blank alias under {domain}.{slot}")

    def slots(self, domain: str) -> tuple[str, ...]:
        return tuple(self.domains.get(domain, {}))

    def canonical_map(self) -> dict[tuple[str, str, str], str]:
        """(domain, slot, normalized alias) -> canonical value."""
        table: dict[tuple[str, str, str], str] = {}
        for domain in sorted(self.domains):
            for slot in sorted(self.domains[domain]):
                for entry in self.domains[domain][slot]:
                    for alias in entry.aliases:
                        key = (domain, slot, normalize(alias))
                        table.setdefault(key, entry.canonical)
        return table


def _check_name(name: str, kind: str) -> None:
    if not name.strip():
        raise SchemaError(f"blank {kind} name")
    if name != name.lower():
        raise SchemaError(f"{kind} name {name!r} must be lowercase")


def load_schema(path: str) -> OntologySchema:
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: {exc}") from None
    if not isinstance(raw, dict) or "domains" not in raw:
        raise SchemaError(f"{path}: expected an object with a 'domains' key")
    domains: dict[str, dict[str, tuple[ValueEntry, ...]]] = {}
    for domain, slots in raw["domains"].items():
        if not isinstance(slots, dict):
            raise SchemaError(f"{path}: domain {domain!r} must map slots")
        domains[domain] = {}
        for slot, entries in slots.items():
            if not isinstance(entries, list):
                raise SchemaError(f"{path}: {domain}.{slot} must be a list")
            parsed = []
            for entry in entries:
                if not isinstance(entry, dict) or "canonical" not in entry:
                    raise SchemaError(
                        f"{path}: {domain}.{slot} entries need 'canonical'")
                aliases = entry.get("aliases", [])
                if not all(isinstance(a, str) for a in aliases):
                    raise SchemaError(f"{path}: {domain}.{slot} alias not a string")
                parsed.append(ValueEntry(entry["canonical"], tuple(aliases)))
            domains[domain][slot] = tuple(parsed)
    schema = OntologySchema(domains)
    schema.validate()
    return schema


@dataclass(frozen=True)
class Turn:
    user: str
    system: str
    state: Optional[Mapping[str, Mapping[str, str]]] = None


@dataclass(frozen=True)
class Dialogue:
    dialogue_id: str
    turns: tuple[Turn, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not self.turns:
            raise ValueError(f"dialogue {self.dialogue_id!r} has no turns")


def dialogue_from_record(record: dict) -> Dialogue:
    turns = []
    for i, turn in enumerate(record.get("turns", [])):
        if not isinstance(turn, dict):
            raise ValueError(f"turn {i} is not an object")
        user, system = turn.get("user"), turn.get("system")
        if not isinstance(user, str) or not isinstance(system, str):
            raise ValueError(f"turn {i} needs string 'user' and 'system'")
        state = turn.get("state")
        if state is not None and not isinstance(state, dict):
            raise ValueError(f"turn {i} state must be an object")
        turns.append(Turn(user=user, system=system, state=state))
    dialogue_id = record.get("dialogue_id")
    if not isinstance(dialogue_id, str) or not dialogue_id:
        raise ValueError("missing dialogue_id")
    return Dialogue(dialogue_id=dialogue_id, turns=tuple(turns))


def iter_dialogues(path: str, skip_bad: bool = False,
                   stats: Optional[dict] = None) -> Iterator[Dialogue]:
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                if "_header" in record or "_footer" in record:
                    continue
                dialogue = dialogue_from_record(record)
                if dialogue.dialogue_id in seen:
                    raise ValueError(f"duplicate dialogue_id "
                                     f"{dialogue.dialogue_id!r}")
                seen.add(dialogue.dialogue_id)
            except ValueError as exc:
                if skip_bad:
                    if stats is not None:
                        stats["skipped"] = stats.get("skipped", 0) + 1
                    continue
                raise CorpusError(path, line_no, str(exc)) from None
            yield dialogue


def match_ontology(context: str, schema: OntologySchema) -> list[Triple]:
    """Every alias occurring in normalize(context) as a whole token span is
    a mention. At one start position only the longest mentions survive; per
    (domain, slot) the last-mentioned survivor wins; result sorted by
    (domain, slot)."""
    toks = normalize(context).split()
    if not toks:
        return []
    starts: dict[str, list[int]] = {}
    for i, tok in enumerate(toks):
        starts.setdefault(tok, []).append(i)

    mentions: list[tuple[int, int, str, str, str]] = []
    for domain in sorted(schema.domains):
        for slot in sorted(schema.domains[domain]):
            for entry in schema.domains[domain][slot]:
                for alias in entry.aliases:
                    alias_toks = normalize(alias).split()
                    if not alias_toks:
                        continue
                    n = len(alias_toks)
                    for i in starts.get(alias_toks[0], ()):
                        if toks[i:i + n] == alias_toks:
                            mentions.append((i, n, domain, slot, entry.canonical))
    if not mentions:
        return []

    longest_at: dict[int, int] = {}
    for start, length, *_ in mentions:
        if length > longest_at.get(start, 0):
            longest_at[start] = length

    best: dict[tuple[str, str], tuple[int, str]] = {}
    for start, length, domain, slot, canonical in mentions:
        if length != longest_at[start]:
            continue
        key = (domain, slot)
        if key not in best or start > best[key][0]:
            best[key] = (start, canonical)
    return [Triple(subject=d, relation=s, object=best[(d, s)][1])
            for d, s in sorted(best)]


def dialogue_context(dialogue: Dialogue, turn_index: int) -> str:
    """Normalized utterances up to and including the user utterance of the
    indexed turn, space-joined."""
    if not 0 <= turn_index < len(dialogue.turns):
        raise IndexError(f"turn {turn_index} out of range for "
                         f"{dialogue.dialogue_id!r}")
    parts = []
    for turn in dialogue.turns[:turn_index]:
        parts.extend((normalize(turn.user), normalize(turn.system)))
    parts.append(normalize(dialogue.turns[turn_index].user))
    return " ".join(p for p in parts if p)


def build_tod_sample(dialogue: Dialogue, turn_index: int,
                     schema: OntologySchema, seed: int = 0,
                     counters: Optional[dict] = None
                     ) -> Optional[PretrainSample]:
    """One sample per dialogue turn; None when the system reply is blank or
    nothing in the context matches the ontology (both counted)."""
    context = dialogue_context(dialogue, turn_index)
    response = normalize(dialogue.turns[turn_index].system)
    if not response:
        _bump(counters, "turn_blank_response")
        return None
    matched = match_ontology(context, schema)
    matched = [t for t in matched if serializable_triple(t)]
    if not matched:
        _bump(counters, "turn_no_ontology_match")
        return None
    sample = PretrainSample(
        sample_id=f"p2-{dialogue.dialogue_id}-{turn_index}",
        masked_ontology=tuple(MaskedTriple(t.subject, t.relation)
                              for t in matched),
        masked_context=context,
        target_triples=tuple(matched),
        target_next_text=response,
        n_masked_sentences=1,
        seed=seed,
    )
    sample.validate()
    return sample


def _bump(counters: Optional[dict], key: str) -> None:
    if counters is not None:
        counters[key] = counters.get(key, 0) + 1
