"""Fine-tuning data from state-annotated dialogues: the belief-state /
DB-state / response target layout, database lookups through the CLI, and
the delexicalize/relexicalize round trip.
Run with:  python3 demos/03_states_db_and_delex.py
"""

import json
import tempfile
from pathlib import Path

from ontoforge.cli import main
from ontoforge.dialogue import (DBRecord, DialogueState, delexicalize,
                                relexicalize)

work = Path(tempfile.mkdtemp(prefix="forge-demo3-"))

db = {
    "restaurant": [
        {"name": "golden house", "area": "north", "food": "chinese",
         "phone": "01223 111"},
        {"name": "sea palace", "area": "centre", "food": "seafood",
         "phone": "01223 222"},
        {"name": "north garden", "area": "north", "food": "chinese",
         "phone": "01223 333"},
    ],
}
ontology = {"domains": {"restaurant": {
    "area": [{"canonical": "centre", "aliases": ["center"]},
             {"canonical": "north", "aliases": []}],
    "food": [{"canonical": "chinese", "aliases": []},
             {"canonical": "seafood", "aliases": []}],
}}}
dialogues = [{"dialogue_id": "demo-7", "turns": [
    {"user": "any chinese places in the north?",
     "system": "golden house serves chinese food in the north",
     "state": {"restaurant": {"area": "north", "food": "chinese"}}},
]}]

db_path = work / "db.json"
db_path.write_text(json.dumps(db), "utf-8")
ont_path = work / "ontology.json"
ont_path.write_text(json.dumps(ontology), "utf-8")
dlg_path = work / "dialogues.jsonl"
dlg_path.write_text("\n".join(json.dumps(d) for d in dialogues) + "\n", "utf-8")

out = work / "finetune.jsonl"
rc = main(["build-finetune", "--dialogues", str(dlg_path),
           "--ontology", str(ont_path), "--db", str(db_path),
           "--out", str(out)])
assert rc == 0

print("== fine-tune pair")
for line in out.read_text("utf-8").splitlines():
    record = json.loads(line)
    if "source" in record:
        print("  source:", record["source"])
        print("  target:", record["target"])

print("\n== db-query for the same state (two chinese places in the north)")
rc = main(["db-query", "--db", str(db_path), "--domain", "restaurant",
           "--state", '{"restaurant": {"area": "north", "food": "chinese"}}'])
assert rc == 0

print("\n== delexicalize / relexicalize round trip")
state = DialogueState.from_nested({"restaurant": {"area": "north"}})
record = DBRecord("restaurant", {"name": "golden house", "phone": "01223 111"})
response = "golden house is in the north, phone 01223 111"
delexed = delexicalize(response, state, record)
print("  response:", response)
print("  delexed: ", delexed)
print("  restored:", relexicalize(delexed, state, record))
