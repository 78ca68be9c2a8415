"""Dialogue state, deterministic database lookup with result-count buckets,
delexicalization, and the fine-tune sequence layout.

Sequence grammar:

* source: ``[CTX] <history> [ONT] <schema text>``
* target: ``[BS] dom :: slot :: val | ... [DB] dom :: bucket | ... [RES] <delex response>``
  (empty state leaves the ``[BS]`` section empty; an empty ``[DB]`` section
  is written as the single token ``db_0``)

Wire formats:

* database JSON: ``{domain: [{slot: value, ...}, ...]}``; every record
  needs a name unique within its domain
* goal JSON: ``{dialogue_id: {domain: {"constraints": {slot: value},
  "requests": [slot, ...]}}}``
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .filtering import Triple
from .phase1 import ParseError, SerializedPair
from .phase2 import Dialogue, OntologySchema, normalize

BS = "[BS]"
DB = "[DB]"
CTX = "[CTX]"
ONT = "[ONT]"
RES = "[RES]"
BUCKETS = ("db_0", "db_1", "db_2", "db_3plus")

WILDCARD_VALUES = frozenset({"", "dontcare", "dont care", "don't care",
                             "not mentioned", "none"})

_PLACEHOLDER_RE = re.compile(r"\[([a-z0-9]+)_([a-z0-9_]+)\]")


class UnknownDomain(ValueError):
    pass


class DatabaseError(ValueError):
    pass


class GoalError(ValueError):
    pass


class UnresolvedPlaceholder(ValueError):
    def __init__(self, placeholder: str):
        self.placeholder = placeholder
        super().__init__(f"no source for placeholder {placeholder}")


class DialogueState:
    """At most one value per (domain, slot); values non-blank."""

    def __init__(self, triples: Iterable[tuple[str, str, str]] = ()):
        self._values: dict[tuple[str, str], str] = {}
        for domain, slot, value in triples:
            self.set(domain, slot, value)

    @classmethod
    def from_nested(cls, nested: Mapping[str, Mapping[str, str]]) -> "DialogueState":
        return cls((d, s, v) for d, slots in nested.items()
                   for s, v in slots.items())

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[str]]) -> "DialogueState":
        return cls((d, s, v) for d, s, v in pairs)

    def set(self, domain: str, slot: str, value: str) -> None:
        if not domain or not slot or not str(value).strip():
            raise ValueError(f"blank state component in "
                             f"({domain!r}, {slot!r}, {value!r})")
        self._values[(domain, slot)] = str(value)

    def get(self, domain: str, slot: str) -> Optional[str]:
        return self._values.get((domain, slot))

    def triples(self) -> list[Triple]:
        return [Triple(subject=d, relation=s, object=v)
                for (d, s), v in sorted(self._values.items())]

    def as_pairs(self) -> list[list[str]]:
        return [[d, s, v] for (d, s), v in sorted(self._values.items())]

    def domains(self) -> list[str]:
        return sorted({d for d, _ in self._values})

    def constraints(self, domain: str) -> dict[str, str]:
        return {s: v for (d, s), v in sorted(self._values.items())
                if d == domain}

    def canonicalized(self, schema: Optional[OntologySchema]) -> "DialogueState":
        """Map value variants onto canonical forms via the alias table;
        values stay normalized either way."""
        table = schema.canonical_map() if schema is not None else {}
        out = DialogueState()
        for (d, s), v in self._values.items():
            norm = normalize(v)
            out.set(d, s, normalize(table.get((d, s, norm), norm)) or norm)
        return out

    def copy(self) -> "DialogueState":
        return DialogueState((d, s, v) for (d, s), v in self._values.items())

    def __eq__(self, other) -> bool:
        return isinstance(other, DialogueState) and self._values == other._values

    def __len__(self) -> int:
        return len(self._values)

    def __repr__(self) -> str:
        return f"DialogueState({sorted(self._values.items())})"


@dataclass(frozen=True)
class DBRecord:
    domain: str
    values: Mapping[str, str]

    @property
    def name(self) -> str:
        return self.values["name"]

    def get(self, slot: str) -> Optional[str]:
        return self.values.get(slot)


@dataclass(frozen=True)
class Database:
    records: Mapping[str, tuple[DBRecord, ...]]

    def domains(self) -> list[str]:
        return sorted(self.records)

    def __contains__(self, domain: str) -> bool:
        return domain in self.records

    def of(self, domain: str) -> tuple[DBRecord, ...]:
        if domain not in self.records:
            raise UnknownDomain(domain)
        return self.records[domain]


def load_database(path: str) -> Database:
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DatabaseError(f"{path}: {exc}") from None
    if not isinstance(raw, dict):
        raise DatabaseError(f"{path}: expected an object of domains")
    records: dict[str, tuple[DBRecord, ...]] = {}
    for domain, rows in raw.items():
        if "_" in domain or domain != domain.lower():
            raise DatabaseError(f"{path}: bad domain name {domain!r}")
        if not isinstance(rows, list):
            raise DatabaseError(f"{path}: domain {domain!r} must hold a list")
        seen_names = set()
        parsed = []
        for i, row in enumerate(rows):
            if not isinstance(row, dict):
                raise DatabaseError(f"{path}: {domain}[{i}] is not an object")
            name = str(row.get("name", "")).strip()
            if not name:
                raise DatabaseError(f"{path}: {domain}[{i}] has no name")
            if name in seen_names:
                raise DatabaseError(f"{path}: {domain} name {name!r} repeated")
            seen_names.add(name)
            parsed.append(DBRecord(domain=domain,
                                   values={k: str(v) for k, v in row.items()}))
        records[domain] = tuple(parsed)
    return Database(records=records)


def query_db(db: Database, state: DialogueState, domain: str,
             schema: Optional[OntologySchema] = None) -> list[DBRecord]:
    """Records matching every non-wildcard state constraint of the domain
    under normalized (and, with a schema, canonicalized) value equality;
    a record lacking a constrained slot never matches. Source order kept."""
    rows = db.of(domain)
    table = schema.canonical_map() if schema is not None else {}

    def canon(slot: str, value: str) -> str:
        norm = normalize(value)
        return normalize(table.get((domain, slot, norm), norm)) or norm

    wanted = {slot: canon(slot, value)
              for slot, value in state.constraints(domain).items()
              if normalize(value) not in WILDCARD_VALUES}
    out = []
    for record in rows:
        for slot, value in wanted.items():
            got = record.get(slot)
            if got is None or canon(slot, got) != value:
                break
        else:
            out.append(record)
    return out


def db_bucket(count: int) -> str:
    if count < 0:
        raise ValueError(f"negative record count {count}")
    return BUCKETS[min(count, 3)]


def _claimed_spans(text: str) -> list[tuple[int, int]]:
    return [m.span() for m in _PLACEHOLDER_RE.finditer(text)]


def _overlaps(span: tuple[int, int], taken: list[tuple[int, int]]) -> bool:
    return any(span[0] < b and a < span[1] for a, b in taken)


def delexicalize(response: str, state: DialogueState,
                 record: Optional[DBRecord] = None) -> str:
    """Replace word-boundary occurrences of record and state values with
    [domain_slot] placeholders, longest value first, left to right,
    non-overlapping. Existing placeholders are never rewritten."""
    candidates: list[tuple[str, str, str, int]] = []
    if record is not None:
        for slot, value in record.values.items():
            candidates.append((value, record.domain, slot, 0))
    for triple in state.triples():
        candidates.append((triple.object, triple.subject, triple.relation, 1))
    candidates = [c for c in candidates
                  if c[0].strip() and c[0].lower() not in WILDCARD_VALUES]
    candidates.sort(key=lambda c: (-len(c[0]), c[3], c[1], c[2]))

    taken = _claimed_spans(response)
    replacements: list[tuple[int, int, str]] = []
    seen_values = set()
    for value, domain, slot, _prio in candidates:
        if value.lower() in seen_values:
            continue
        seen_values.add(value.lower())
        pattern = re.compile(r"(?<!\w)" + re.escape(value) + r"(?!\w)",
                             re.IGNORECASE)
        for m in pattern.finditer(response):
            if _overlaps(m.span(), taken):
                continue
            taken.append(m.span())
            replacements.append((m.start(), m.end(), f"[{domain}_{slot}]"))
    out = []
    cursor = 0
    for start, end, placeholder in sorted(replacements):
        out.append(response[cursor:start])
        out.append(placeholder)
        cursor = end
    out.append(response[cursor:])
    return "".join(out)


def relexicalize(delex: str, state: DialogueState,
                 record: Optional[DBRecord] = None) -> str:
    """Fill [domain_slot] placeholders, record values first, then state."""

    def fill(m: re.Match) -> str:
        domain, slot = m.group(1), m.group(2)
        if record is not None and record.domain == domain:
            value = record.get(slot)
            if value is not None:
                return value
        value = state.get(domain, slot)
        if value is None:
            raise UnresolvedPlaceholder(m.group(0))
        return value

    return _PLACEHOLDER_RE.sub(fill, delex)


@dataclass(frozen=True)
class FineTuneSample:
    sample_id: str
    dialogue_id: str
    turn: int
    history: str
    schema_text: str
    state: DialogueState
    db: Mapping[str, str]
    delex_response: str

    def validate(self) -> None:
        for domain, bucket in self.db.items():
            if bucket not in BUCKETS:
                raise ValueError(f"bad bucket {bucket!r} for {domain!r}")
        for label, text in (("history", self.history),
                            ("schema_text", self.schema_text),
                            ("response", self.delex_response)):
            for marker in (CTX, ONT, BS, DB, RES):
                if marker in text:
                    raise ValueError(f"{label} contains reserved {marker}")
        if not self.delex_response.strip():
            raise ValueError("blank response")


def schema_to_text(schema: OntologySchema) -> str:
    """Domains with their slot names only: "domain : slot slot ... | ..."."""
    parts = []
    for domain in sorted(schema.domains):
        slots = " ".join(sorted(schema.domains[domain]))
        parts.append(f"{domain} : {slots}".rstrip())
    return " | ".join(parts)


def _state_text(state: DialogueState) -> str:
    return " | ".join(f"{t.subject} :: {t.relation} :: {t.object}"
                      for t in state.triples())


def _db_text(db_state: Mapping[str, str]) -> str:
    if not db_state:
        return "db_0"
    return " | ".join(f"{domain} :: {db_state[domain]}"
                      for domain in sorted(db_state))


def serialize_finetune(sample: FineTuneSample) -> SerializedPair:
    sample.validate()
    parts = [BS]
    state_text = _state_text(sample.state)
    if state_text:
        parts.append(state_text)
    parts.extend((DB, _db_text(sample.db), RES, sample.delex_response))
    return SerializedPair(
        source_seq=f"{CTX} {sample.history} {ONT} {sample.schema_text}",
        target_seq=" ".join(parts),
    )


def parse_finetune(pair: SerializedPair) -> FineTuneSample:
    """Inverse of :func:`serialize_finetune` on the grammar-carried fields;
    envelope identifiers take defaults."""
    src, tgt = pair.source_seq, pair.target_seq
    if not src.startswith(CTX + " "):
        raise ParseError(f"source must start with '{CTX} '", 0)
    ont_at = src.find(f" {ONT} ")
    if ont_at < 0:
        raise ParseError(f"source is missing ' {ONT} '", len(CTX) + 1)
    history = src[len(CTX) + 1:ont_at]
    schema_text = src[ont_at + len(ONT) + 2:]

    if not tgt.startswith(BS):
        raise ParseError(f"target must start with '{BS}'", 0)
    db_at = tgt.find(f" {DB} ")
    if db_at < 0:
        raise ParseError(f"target is missing ' {DB} '", len(BS))
    res_at = tgt.find(f" {RES} ", db_at)
    if res_at < 0:
        raise ParseError(f"target is missing ' {RES} '", db_at)
    state_text = tgt[len(BS) + 1:db_at] if db_at > len(BS) else ""
    db_text = tgt[db_at + len(DB) + 2:res_at]
    response = tgt[res_at + len(RES) + 2:]

    state = DialogueState()
    if state_text:
        for chunk in state_text.split(" | "):
            fields = chunk.split(" :: ")
            if len(fields) != 3 or not all(fields):
                raise ParseError(f"bad state triple {chunk!r}", db_at)
            state.set(*fields)
    db_state: dict[str, str] = {}
    if db_text != "db_0":
        for chunk in db_text.split(" | "):
            fields = chunk.split(" :: ")
            if len(fields) != 2 or fields[1] not in BUCKETS:
                raise ParseError(f"bad db entry {chunk!r}", res_at)
            db_state[fields[0]] = fields[1]
    return FineTuneSample(
        sample_id="", dialogue_id="", turn=0,
        history=history, schema_text=schema_text, state=state,
        db=db_state, delex_response=response,
    )


def build_finetune_sample(dialogue: Dialogue, turn_index: int,
                          schema: OntologySchema, db: Database,
                          counters: Optional[dict] = None
                          ) -> Optional[FineTuneSample]:
    """One sample per turn from a state-annotated dialogue. The response is
    normalized, then delexicalized against the first matching record of
    each state domain plus the state itself. Blank responses are skipped."""
    from .phase2 import dialogue_context

    turn = dialogue.turns[turn_index]
    response = normalize(turn.system)
    if not response:
        if counters is not None:
            counters["turn_blank_response"] = (
                counters.get("turn_blank_response", 0) + 1)
        return None
    state = DialogueState.from_nested(turn.state or {})
    db_state: dict[str, str] = {}
    delexed = response
    for domain in state.domains():
        if domain not in db:
            continue
        matches = query_db(db, state, domain, schema=schema)
        db_state[domain] = db_bucket(len(matches))
        record = _normalized_record(matches[0]) if matches else None
        delexed = delexicalize(delexed, _normalized_state(state, domain),
                               record)
    if not state.domains():
        delexed = delexicalize(delexed, _normalized_state(state, None), None)
    sample = FineTuneSample(
        sample_id=f"ft-{dialogue.dialogue_id}-{turn_index}",
        dialogue_id=dialogue.dialogue_id,
        turn=turn_index,
        history=dialogue_context(dialogue, turn_index),
        schema_text=schema_to_text(schema),
        state=state,
        db=db_state,
        delex_response=delexed,
    )
    sample.validate()
    return sample


def _normalized_state(state: DialogueState, domain: Optional[str]
                      ) -> DialogueState:
    out = DialogueState()
    for triple in state.triples():
        if domain is not None and triple.subject != domain:
            continue
        norm = normalize(triple.object)
        if norm:
            out.set(triple.subject, triple.relation, norm)
    return out


def _normalized_record(record: DBRecord) -> DBRecord:
    values = {}
    for slot, value in record.values.items():
        norm = normalize(value)
        if norm:
            values[slot] = norm
    return DBRecord(domain=record.domain, values=values)


@dataclass(frozen=True)
class DomainGoal:
    constraints: Mapping[str, str]
    requests: tuple[str, ...]


@dataclass(frozen=True)
class Goal:
    domains: Mapping[str, DomainGoal]


def load_goals(path: str) -> dict[str, Goal]:
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise GoalError(f"{path}: {exc}") from None
    if not isinstance(raw, dict):
        raise GoalError(f"{path}: expected an object keyed by dialogue_id")
    goals: dict[str, Goal] = {}
    for dialogue_id, domains in raw.items():
        if not isinstance(domains, dict):
            raise GoalError(f"{path}: goal for {dialogue_id!r} must be "
                            "an object")
        parsed: dict[str, DomainGoal] = {}
        for domain, body in domains.items():
            if not isinstance(body, dict):
                raise GoalError(f"{path}: {dialogue_id}/{domain} must be "
                                "an object")
            constraints = body.get("constraints", {})
            requests = body.get("requests", [])
            if not isinstance(constraints, dict) or not isinstance(requests, list):
                raise GoalError(f"{path}: {dialogue_id}/{domain} needs "
                                "'constraints' object and 'requests' list")
            parsed[domain] = DomainGoal(
                constraints={str(k): str(v) for k, v in constraints.items()},
                requests=tuple(str(r) for r in requests),
            )
        goals[dialogue_id] = Goal(domains=parsed)
    return goals


def finetune_to_record(sample: FineTuneSample, seed: int = 0) -> dict:
    pair = serialize_finetune(sample)
    return {"sample_id": sample.sample_id, "source": pair.source_seq,
            "target": pair.target_seq,
            "meta": {"dialogue_id": sample.dialogue_id, "turn": sample.turn,
                     "seed": seed}}
