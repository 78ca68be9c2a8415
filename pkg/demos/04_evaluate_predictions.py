"""Score a prediction file against gold annotations and user goals: joint
goal accuracy, corpus BLEU over delexicalized responses, inform/success
task completion, and the combined score.
Run with:  python3 demos/04_evaluate_predictions.py
"""

import json
import tempfile
from pathlib import Path

from ontoforge.cli import main

work = Path(tempfile.mkdtemp(prefix="forge-demo4-"))

db = {"restaurant": [
    {"name": "golden house", "area": "north", "food": "chinese",
     "phone": "01223111"},
    {"name": "sea palace", "area": "centre", "food": "seafood",
     "phone": "01223222"},
]}
goals = {"demo-1": {"restaurant": {
    "constraints": {"area": "north", "food": "chinese"},
    "requests": ["phone"],
}}}
gold = [
    {"dialogue_id": "demo-1", "turn": 0,
     "state": [["restaurant", "area", "north"],
               ["restaurant", "food", "chinese"]],
     "response": "[restaurant_name] is a [restaurant_food] place in the north"},
    {"dialogue_id": "demo-1", "turn": 1,
     "state": [["restaurant", "area", "north"],
               ["restaurant", "food", "chinese"]],
     "response": "their phone number is [restaurant_phone]"},
]
preds = [
    dict(gold[0]),
    {"dialogue_id": "demo-1", "turn": 1,
     "state": [["restaurant", "area", "north"],
               ["restaurant", "food", "chinese"]],
     "response": "the phone number is [restaurant_phone]"},
]

paths = {}
for name, payload in (("db", db), ("goals", goals)):
    paths[name] = work / f"{name}.json"
    paths[name].write_text(json.dumps(payload), "utf-8")
for name, rows in (("gold", gold), ("preds", preds)):
    paths[name] = work / f"{name}.jsonl"
    paths[name].write_text("\n".join(json.dumps(r) for r in rows) + "\n",
                           "utf-8")

print("== evaluation report (state predictions perfect, one reworded reply)")
rc = main(["evaluate", "--preds", str(paths["preds"]),
           "--gold", str(paths["gold"]), "--goals", str(paths["goals"]),
           "--db", str(paths["db"]), "--per-dialogue"])
assert rc == 0

print("\nthe offered entity satisfies the goal (informed) and the phone")
print("request is answered (successful); BLEU dips below 100 because the")
print("second reply was reworded.")
