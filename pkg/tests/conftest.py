"""Shared helpers: fixture loading, synthetic data builders, and the
acceptance summary printed after a run (one line per criterion)."""

import json
import random
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"


def load_fixture(name):
    with open(FIXTURES / name, encoding="utf-8") as fh:
        return json.load(fh)


def write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True, separators=(",", ":")))
            fh.write("\n")
    return str(path)


# ---------------------------------------------------------------------------
# synthetic data

_SUBJECT_WORDS = [
    "castle", "river", "bakery", "museum", "bridge", "library", "ferry",
    "gallery", "orchestra", "market", "tower", "canal", "harbour", "garden",
    "stadium", "cinema", "archive", "academy", "fountain", "lighthouse",
]
_RELATION_WORDS = [
    "serves", "offers", "contains", "houses", "hosts", "connects",
    "produces", "employs", "spans", "covers", "holds", "features",
]
_OBJECT_WORDS = [
    "breakfast", "sculptures", "concerts", "maps", "paintings", "students",
    "visitors", "lectures", "festivals", "manuscripts", "recitals", "tours",
    "workshops", "exhibits", "seminars", "markets",
]
_FILLER_WORDS = [
    "the", "a", "of", "in", "on", "and", "to", "with", "is", "was",
]


def synth_triple(rng, doc_id="d0", sent=0):
    """One plausible raw triple record; occasionally stopword-heavy or
    overlong on purpose so the filter has something to reject."""
    roll = rng.random()
    if roll < 0.15:
        subject = " ".join(rng.choice(_FILLER_WORDS) for _ in range(2))
    elif roll < 0.3:
        subject = " ".join(
            rng.choice(_SUBJECT_WORDS) for _ in range(rng.randrange(5, 8)))
    else:
        subject = " ".join(
            rng.choice(_SUBJECT_WORDS) for _ in range(rng.randrange(1, 4)))
    relation = rng.choice(_RELATION_WORDS)
    n_obj = rng.randrange(1, 5)
    object_ = " ".join(rng.choice(_OBJECT_WORDS) for _ in range(n_obj))
    return {"doc_id": doc_id, "sent": sent,
            "subj": subject, "rel": relation, "obj": object_}


def synth_sentence(rng):
    subj = rng.choice(_SUBJECT_WORDS)
    rel = rng.choice(_RELATION_WORDS)
    obj = " ".join(rng.choice(_OBJECT_WORDS) for _ in range(rng.randrange(1, 3)))
    return f"The {subj} {rel} {obj}."


def synth_doc(rng, doc_id, n_sentences=None):
    n = n_sentences or rng.randrange(3, 9)
    text = " ".join(synth_sentence(rng) for _ in range(n))
    return {"doc_id": doc_id, "text": text}


def synth_corpus(path, n_docs, seed=0, n_sentences=None):
    rng = random.Random(seed)
    return write_jsonl(
        path, (synth_doc(rng, f"doc{i:05d}", n_sentences) for i in range(n_docs)))


def synth_triples_file(path, n_docs, seed=0, max_per_doc=12):
    """Triples for n_docs docs, grouped by doc and sentence (stream order)."""
    rng = random.Random(seed)
    records = []
    for i in range(n_docs):
        doc_id = f"doc{i:05d}"
        n_sent = rng.randrange(3, 9)
        for sent in range(n_sent):
            for _ in range(rng.randrange(0, max_per_doc // 3 + 1)):
                records.append(synth_triple(rng, doc_id, sent))
    return write_jsonl(path, records)


def tod_fixture_files(root):
    """One coherent set of dialogue-side inputs: ontology, database,
    state-annotated dialogues, goals, and a matching gold/pred pair."""
    root = Path(root)
    ontology = {"domains": {
        "restaurant": {
            "area": [{"canonical": "centre", "aliases": ["center"]},
                     {"canonical": "north", "aliases": []}],
            "food": [{"canonical": "chinese", "aliases": []},
                     {"canonical": "seafood", "aliases": ["fish dishes"]}],
        },
        "hotel": {
            "area": [{"canonical": "north", "aliases": []},
                     {"canonical": "south", "aliases": []}],
            "parking": [{"canonical": "yes", "aliases": []},
                        {"canonical": "no", "aliases": []}],
        },
    }}
    db = {
        "restaurant": [
            {"name": "golden house", "area": "north", "food": "chinese",
             "phone": "01223111"},
            {"name": "sea palace", "area": "centre", "food": "seafood",
             "phone": "01223222"},
            {"name": "north garden", "area": "north", "food": "chinese",
             "phone": "01223333"},
        ],
        "hotel": [
            {"name": "rose lodge", "area": "south", "parking": "yes"},
        ],
    }
    dialogues = [
        {"dialogue_id": "mul001", "turns": [
            {"user": "i want chinese food in the north",
             "system": "golden house serves chinese food in the north",
             "state": {"restaurant": {"area": "north", "food": "chinese"}}},
            {"user": "what is the phone number?",
             "system": "the number is 01223111",
             "state": {"restaurant": {"area": "north", "food": "chinese"}}},
        ]},
        {"dialogue_id": "mul002", "turns": [
            {"user": "find me a hotel in the south with parking",
             "system": "rose lodge has parking",
             "state": {"hotel": {"area": "south", "parking": "yes"}}},
        ]},
    ]
    goals = {
        "mul001": {"restaurant": {"constraints": {"area": "north",
                                                  "food": "chinese"},
                                  "requests": ["phone"]}},
        "mul002": {"hotel": {"constraints": {"area": "south"},
                             "requests": []}},
    }
    gold = [
        {"dialogue_id": "mul001", "turn": 0,
         "state": [["restaurant", "area", "north"],
                   ["restaurant", "food", "chinese"]],
         "response": "[restaurant_name] serves [restaurant_food] in the north"},
        {"dialogue_id": "mul001", "turn": 1,
         "state": [["restaurant", "area", "north"],
                   ["restaurant", "food", "chinese"]],
         "response": "the number is [restaurant_phone]"},
        {"dialogue_id": "mul002", "turn": 0,
         "state": [["hotel", "area", "south"], ["hotel", "parking", "yes"]],
         "response": "[hotel_name] has parking"},
    ]
    preds = [
        dict(gold[0]),
        {"dialogue_id": "mul001", "turn": 1,
         "state": [["restaurant", "area", "center"],
                   ["restaurant", "food", "chinese"]],
         "response": "the number is [restaurant_phone]"},
        dict(gold[2]),
    ]
    paths = {}
    for name, payload in (("ontology", ontology), ("db", db),
                          ("goals", goals)):
        path = root / f"{name}.json"
        path.write_text(json.dumps(payload, sort_keys=True), "utf-8")
        paths[name] = str(path)
    paths["dialogues"] = write_jsonl(root / "dialogues.jsonl", dialogues)
    paths["gold"] = write_jsonl(root / "gold.jsonl", gold)
    paths["preds"] = write_jsonl(root / "preds.jsonl", preds)
    return paths


# ---------------------------------------------------------------------------
# acceptance summary

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(name): label a test as an acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    name = marker.args[0]
    if report.when == "call":
        _CRITERIA[name] = report.outcome
    elif report.when == "setup" and report.outcome != "passed":
        _CRITERIA[name] = report.outcome


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, outcome in _CRITERIA.items():
        tag = {"passed": "PASS", "failed": "FAIL"}.get(outcome, outcome.upper())
        terminalreporter.write_line(f"[{tag}] {name}")
