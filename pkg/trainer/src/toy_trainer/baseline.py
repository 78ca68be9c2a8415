"""Majority-state baseline.

Predicts, for every evaluation turn, the most frequent gold state of the
training fine-tune file (ties broken lexicographically) and an empty
response. Anything a model earns above this is signal, not prior.
"""

from __future__ import annotations

from collections import Counter

from .data import RES_MARK, Sample
from .decode import BS_MARK, DB_MARK, parse_state_tokens
from .vocab import tokenize

State = tuple[tuple[str, str, str], ...]


def state_of_target(target: str) -> State:
    """The belief-state triples of a fine-tune target, sorted."""
    tokens = tokenize(target)
    if DB_MARK in tokens:
        tokens = tokens[: tokens.index(DB_MARK)]
    elif RES_MARK in tokens:
        tokens = tokens[: tokens.index(RES_MARK)]
    if not tokens or tokens[0] != BS_MARK:
        return ()
    return tuple(sorted(parse_state_tokens(tokens)))


def majority_state(train_samples: list[Sample]) -> State:
    if not train_samples:
        raise ValueError("no training samples")
    counts = Counter(state_of_target(s.target) for s in train_samples)
    best = max(counts.values())
    return min(state for state, n in counts.items() if n == best)


def baseline_predictions(train_samples: list[Sample],
                         eval_samples: list[Sample]) -> list[dict]:
    state = majority_state(train_samples)
    records = []
    for sample in eval_samples:
        meta = sample.meta or {}
        try:
            turn = int(meta.get("turn", 0))
        except (TypeError, ValueError):
            turn = 0
        records.append({
            "dialogue_id": str(meta.get("dialogue_id") or sample.sample_id),
            "turn": turn,
            "state": [[d, s, v] for d, s, v in state],
            "response": "",
            "meta": {"baseline": "majority-state"},
        })
    return records
