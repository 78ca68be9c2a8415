"""Shared fixtures: a tiny TOD world driven through the forge CLI, and
the acceptance-criterion summary lines."""

import json
import shutil
import subprocess
from pathlib import Path

import pytest

from toy_trainer.baseline import state_of_target
from toy_trainer.data import read_samples
from toy_trainer.microcorpus import build_samples
from toy_trainer.train import TrainRun, train
from toy_trainer.vocab import tokenize

FORGE = ("ontoforge",)


@pytest.fixture(scope="session", autouse=True)
def forge_available():
    if shutil.which(FORGE[0]) is None:
        pytest.fail(f"{FORGE[0]} must be installed; the trainer only "
                    "talks to it over the CLI")


def run_forge(*argv: str) -> subprocess.CompletedProcess:
    return subprocess.run([*FORGE, *argv], capture_output=True, text=True)


def write_jsonl(path, records) -> str:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    return str(path)


def _user_turn(area: str, food: str) -> dict:
    return {
        "user": f"i want {food} food in the {area}",
        "system": f"the {food} place in the {area} is well liked",
        "state": {"restaurant": {"area": area, "food": food}},
    }


def _goal(area: str, food: str, requests=()) -> dict:
    return {"restaurant": {"constraints": {"area": area, "food": food},
                           "requests": list(requests)}}


@pytest.fixture(scope="session")
def tod_world(tmp_path_factory):
    """Ontology, database, dialogues, and goals files; the fine-tune
    sample files come from build-finetune, and the gold files are read
    back out of those samples so both sides agree byte for byte."""
    root = tmp_path_factory.mktemp("tod")
    ontology = {"domains": {
        "restaurant": {
            "area": [{"canonical": "north", "aliases": []},
                     {"canonical": "south", "aliases": []},
                     {"canonical": "centre", "aliases": ["center"]}],
            "food": [{"canonical": "chinese", "aliases": []},
                     {"canonical": "indian", "aliases": []},
                     {"canonical": "seafood", "aliases": []}],
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
            {"name": "spice corner", "area": "south", "food": "indian",
             "phone": "01223222"},
            {"name": "sea palace", "area": "centre", "food": "seafood",
             "phone": "01223333"},
            {"name": "north garden", "area": "north", "food": "chinese",
             "phone": "01223444"},
        ],
        "hotel": [
            {"name": "rose lodge", "area": "south", "parking": "yes"},
        ],
    }
    train_dialogues = [
        {"dialogue_id": "mem001", "turns": [
            _user_turn("north", "chinese"),
            {"user": "what is the phone number?",
             "system": "the number is 01223111",
             "state": {"restaurant": {"area": "north", "food": "chinese"}}},
        ]},
        {"dialogue_id": "mem002", "turns": [_user_turn("south", "indian")]},
        {"dialogue_id": "mem003", "turns": [_user_turn("centre", "seafood")]},
        {"dialogue_id": "mem004", "turns": [
            {"user": "find me a hotel in the south with parking",
             "system": "rose lodge has parking",
             "state": {"hotel": {"area": "south", "parking": "yes"}}},
        ]},
    ]
    eval_dialogues = [
        {"dialogue_id": "evl001", "turns": [_user_turn("north", "chinese")]},
        {"dialogue_id": "evl002", "turns": [_user_turn("centre", "seafood")]},
    ]
    goals = {
        "mem001": _goal("north", "chinese", requests=["phone"]),
        "mem002": _goal("south", "indian"),
        "mem003": _goal("centre", "seafood"),
        "mem004": {"hotel": {"constraints": {"area": "south"},
                             "requests": []}},
        "evl001": _goal("north", "chinese"),
        "evl002": _goal("centre", "seafood"),
    }

    paths = {"root": str(root)}
    for name, payload in (("ontology", ontology), ("db", db),
                          ("goals", goals)):
        p = root / f"{name}.json"
        p.write_text(json.dumps(payload, sort_keys=True), "utf-8")
        paths[name] = str(p)
    paths["train_dialogues"] = write_jsonl(root / "train_dialogues.jsonl",
                                           train_dialogues)
    paths["eval_dialogues"] = write_jsonl(root / "eval_dialogues.jsonl",
                                          eval_dialogues)

    for side in ("train", "eval"):
        ft = str(root / f"{side}_finetune.jsonl")
        proc = run_forge("build-finetune",
                         "--dialogues", paths[f"{side}_dialogues"],
                         "--ontology", paths["ontology"],
                         "--db", paths["db"], "--out", ft)
        assert proc.returncode == 0, proc.stderr
        paths[f"{side}_finetune"] = ft
        gold = []
        for sample in read_samples(ft):
            tokens = tokenize(sample.target)
            response = " ".join(tokens[tokens.index("[RES]") + 1:])
            gold.append({
                "dialogue_id": sample.meta["dialogue_id"],
                "turn": sample.meta["turn"],
                "state": [list(t) for t in state_of_target(sample.target)],
                "response": response,
            })
        paths[f"{side}_gold"] = write_jsonl(root / f"{side}_gold.jsonl", gold)
    return paths


def evaluate_with_forge(paths: dict, preds_path: str, gold_key: str) -> dict:
    proc = run_forge("evaluate", "--preds", preds_path,
                     "--gold", paths[gold_key], "--goals", paths["goals"],
                     "--db", paths["db"], "--ontology", paths["ontology"])
    assert proc.returncode == 0, proc.stderr
    for line in proc.stdout.splitlines():
        record = json.loads(line)
        if "_header" not in record and "_footer" not in record:
            return record
    raise AssertionError("evaluate printed no report line")


@pytest.fixture(scope="session")
def micro_config():
    path = Path(__file__).resolve().parent.parent / "configs" / "micro.json"
    return json.loads(path.read_text("utf-8"))


@pytest.fixture(scope="session")
def micro_paths(tmp_path_factory, micro_config):
    """Micro-corpus sample files, built once through the forge CLI."""
    root = str(tmp_path_factory.mktemp("micro"))
    c = micro_config["corpus"]
    return {
        "train": build_samples(root, c["train_docs"], c["train_seed"],
                               "train", FORGE, c["build_seed"]),
        "heldout": build_samples(root, c["heldout_docs"], c["heldout_seed"],
                                 "heldout", FORGE, c["build_seed"]),
    }


@pytest.fixture(scope="session")
def mem_trained(tod_world):
    """One model memorizing the tiny fine-tune set; shared because the
    contract and acceptance tests all decode from it."""
    run = TrainRun(lr=1e-3, batch_size=8, epochs=300, seed=0)
    return train(tod_world["train_finetune"], None, run)


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
    if report.when != "call":
        return
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        _CRITERIA[marker.args[0]] = report.outcome


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_CRITERIA):
        flag = "PASS" if _CRITERIA[name] == "passed" else "FAIL"
        terminalreporter.write_line(f"[{flag}] {name}")
