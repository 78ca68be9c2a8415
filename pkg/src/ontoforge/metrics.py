"""Scoring for prediction files: joint goal accuracy, corpus BLEU-4,
inform/success over goals and the database, and the combined score.

Prediction JSONL (also the gold-file format):
``{"dialogue_id": str, "turn": int, "state": [[domain, slot, value], ...],
"response": str}``.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .dialogue import (Database, DialogueState, Goal, WILDCARD_VALUES,
                       query_db)
from .ingest import CorpusError
from .phase2 import OntologySchema, normalize


class LengthMismatch(ValueError):
    pass


class MissingGoal(ValueError):
    pass


@dataclass(frozen=True)
class TurnPrediction:
    dialogue_id: str
    turn: int
    state: DialogueState
    response: str


def load_predictions(path: str) -> list[TurnPrediction]:
    preds: list[TurnPrediction] = []
    seen: set[tuple[str, int]] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                if "_header" in record or "_footer" in record:
                    continue
                key = (str(record["dialogue_id"]), int(record["turn"]))
                if key in seen:
                    raise ValueError(f"duplicate turn {key}")
                seen.add(key)
                preds.append(TurnPrediction(
                    dialogue_id=key[0], turn=key[1],
                    state=DialogueState.from_pairs(record.get("state", [])),
                    response=str(record.get("response", "")),
                ))
            except (KeyError, ValueError, TypeError) as exc:
                raise CorpusError(path, line_no, str(exc)) from None
    return preds


def _by_turn(preds: Iterable[TurnPrediction]
             ) -> dict[tuple[str, int], TurnPrediction]:
    return {(p.dialogue_id, p.turn): p for p in preds}


def jga(preds: Sequence[TurnPrediction], golds: Sequence[TurnPrediction],
        schema: Optional[OntologySchema] = None) -> float:
    """Fraction of gold turns whose predicted state set-equals the gold
    state after normalization; a missing prediction counts as wrong."""
    if not golds:
        raise LengthMismatch("no gold turns to score")
    lookup = _by_turn(preds)
    hits = 0
    for gold in golds:
        pred = lookup.get((gold.dialogue_id, gold.turn))
        if pred is None:
            continue
        if (pred.state.canonicalized(schema) ==
                gold.state.canonicalized(schema)):
            hits += 1
    return hits / len(golds)


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu(hypotheses: Sequence[Sequence[str]],
         references: Sequence[Sequence[str]]) -> float:
    """Corpus BLEU-4: clipped n-gram counts pooled over the corpus, uniform
    quarter weights, brevity penalty exp(1 - r/c) when c <= r. Any pooled
    precision of zero gives 0.0. Scaled to a percentage."""
    if len(hypotheses) != len(references):
        raise LengthMismatch(f"{len(hypotheses)} hypotheses vs "
                             f"{len(references)} references")
    if not hypotheses:
        raise LengthMismatch("need at least one pair")
    matched = [0] * 4
    total = [0] * 4
    hyp_len = 0
    ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        hyp_len += len(hyp)
        ref_len += len(ref)
        for n in range(1, 5):
            counts = _ngram_counts(hyp, n)
            ref_counts = _ngram_counts(ref, n)
            total[n - 1] += max(len(hyp) - n + 1, 0)
            matched[n - 1] += sum(min(count, ref_counts[gram])
                                  for gram, count in counts.items())
    if any(m == 0 for m in matched) or any(t == 0 for t in total):
        return 0.0
    log_precision = sum(0.25 * math.log(m / t)
                        for m, t in zip(matched, total))
    brevity = 1.0 if hyp_len > ref_len else math.exp(1 - ref_len / hyp_len)
    return 100.0 * brevity * math.exp(log_precision)


def _canon(table: Mapping[tuple[str, str, str], str], domain: str,
           slot: str, value: str) -> str:
    norm = normalize(value)
    return normalize(table.get((domain, slot, norm), norm)) or norm


def _offered_record(responses: Sequence[str], final_state: DialogueState,
                    db: Database, domain: str,
                    schema: Optional[OntologySchema]):
    """The entity the system is taken to have offered: resolve the last
    response naming the domain against the database under the final
    predicted state; first matching record on ties."""
    marker = f"[{domain}_name]"
    if not any(marker in response for response in responses):
        return None
    if domain not in db:
        return None
    matches = query_db(db, final_state, domain, schema=schema)
    return matches[0] if matches else None


def inform_success(preds: Sequence[TurnPrediction],
                   goals: Mapping[str, Goal], db: Database,
                   schema: Optional[OntologySchema] = None,
                   per_dialogue: Optional[dict] = None
                   ) -> tuple[float, float]:
    """Percentages of dialogues whose offered entity satisfies every goal
    constraint (inform) and which additionally surface every requested
    slot's placeholder (success)."""
    table = schema.canonical_map() if schema is not None else {}
    dialogues: dict[str, list[TurnPrediction]] = {}
    for pred in preds:
        dialogues.setdefault(pred.dialogue_id, []).append(pred)
    if not dialogues:
        raise LengthMismatch("no predictions to score")
    informed_count = 0
    success_count = 0
    for dialogue_id, turns in dialogues.items():
        if dialogue_id not in goals:
            raise MissingGoal(dialogue_id)
        goal = goals[dialogue_id]
        turns.sort(key=lambda p: p.turn)
        responses = [p.response for p in turns]
        final_state = turns[-1].state
        informed = True
        for domain, dgoal in goal.domains.items():
            constraints = {slot: value
                           for slot, value in dgoal.constraints.items()
                           if normalize(value) not in WILDCARD_VALUES}
            if not constraints:
                continue
            record = _offered_record(responses, final_state, db, domain,
                                     schema)
            if record is None:
                informed = False
                break
            for slot, value in constraints.items():
                got = record.get(slot)
                if got is None or (_canon(table, domain, slot, got) !=
                                   _canon(table, domain, slot, value)):
                    informed = False
                    break
            if not informed:
                break
        successful = informed
        if successful:
            for domain, dgoal in goal.domains.items():
                for slot in dgoal.requests:
                    marker = f"[{domain}_{slot}]"
                    if not any(marker in r for r in responses):
                        successful = False
                        break
                if not successful:
                    break
        informed_count += informed
        success_count += successful
        if per_dialogue is not None:
            per_dialogue[dialogue_id] = {"informed": informed,
                                         "successful": successful}
    n = len(dialogues)
    return 100.0 * informed_count / n, 100.0 * success_count / n


def combined(inform: float, success: float, bleu_score: float) -> float:
    return (inform + success) * 0.5 + bleu_score


@dataclass
class EvalReport:
    jga: float
    inform: float
    success: float
    bleu: float
    combined: float
    counts: Mapping[str, int]
    per_dialogue: list = field(default_factory=list)

    def validate(self) -> None:
        expected = combined(self.inform, self.success, self.bleu)
        if abs(self.combined - expected) > 1e-9:
            raise ValueError(f"combined {self.combined} != recomputed "
                             f"{expected}")
        if not 0.0 <= self.jga <= 1.0:
            raise ValueError(f"jga {self.jga} outside [0, 1]")

    def as_dict(self, with_per_dialogue: bool = False) -> dict:
        out = {"jga": self.jga, "inform": self.inform,
               "success": self.success, "bleu": self.bleu,
               "combined": self.combined, "counts": dict(self.counts)}
        if with_per_dialogue:
            out["per_dialogue"] = self.per_dialogue
        return out


def evaluate_predictions(preds: Sequence[TurnPrediction],
                         golds: Sequence[TurnPrediction],
                         goals: Mapping[str, Goal], db: Database,
                         schema: Optional[OntologySchema] = None
                         ) -> EvalReport:
    """Aggregate report over a prediction file scored against gold turns.
    BLEU pairs hypothesis and reference responses by (dialogue_id, turn),
    tokenized on whitespace; a missing prediction contributes an empty
    hypothesis."""
    lookup = _by_turn(preds)
    hyps = []
    refs = []
    for gold in golds:
        pred = lookup.get((gold.dialogue_id, gold.turn))
        hyps.append(pred.response.split() if pred else [])
        refs.append(gold.response.split())
    jga_score = jga(preds, golds, schema=schema)
    bleu_score = bleu(hyps, refs)
    flags: dict[str, dict] = {}
    inform, success = inform_success(preds, goals, db, schema=schema,
                                     per_dialogue=flags)
    gold_dialogue_turns: dict[str, list[TurnPrediction]] = {}
    for gold in golds:
        gold_dialogue_turns.setdefault(gold.dialogue_id, []).append(gold)
    per_dialogue = []
    for dialogue_id in sorted(flags):
        turns = gold_dialogue_turns.get(dialogue_id, [])
        entry = {"dialogue_id": dialogue_id, "turns": len(turns)}
        if turns:
            entry["jga"] = jga(preds, turns, schema=schema)
        entry.update(flags[dialogue_id])
        per_dialogue.append(entry)
    report = EvalReport(
        jga=jga_score,
        inform=inform,
        success=success,
        bleu=bleu_score,
        combined=combined(inform, success, bleu_score),
        counts={"turns": len(golds),
                "dialogues": len({g.dialogue_id for g in golds})},
        per_dialogue=per_dialogue,
    )
    report.validate()
    return report
