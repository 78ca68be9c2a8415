"""Show how dialogue turns become pretraining pairs by matching ontology
values against the running dialogue text: no state labels involved, and a
value only the system mentioned still lands in the target.
Run with:  python3 demos/02_ontology_matching.py
"""

from ontoforge.phase1 import serialize_sample
from ontoforge.phase2 import (OntologySchema, ValueEntry, build_tod_sample,
                              dialogue_context, dialogue_from_record,
                              match_ontology)


def entries(*values):
    return tuple(ValueEntry(canonical=c, aliases=tuple(a)) for c, *a in values)


schema = OntologySchema(domains={
    "restaurant": {
        "area": entries(("centre", "center"), ("north",)),
        "food": entries(("seafood", "fish dishes"), ("chinese",)),
        "name": entries(("sea palace",)),
    },
})

dialogue = dialogue_from_record({
    "dialogue_id": "demo-42",
    "turns": [
        {"user": "i am looking for fish dishes in the center of town",
         "system": "the sea palace serves seafood in the centre"},
        {"user": "sounds good, can you book a table?",
         "system": "done, the table is booked"},
    ],
})

for turn_index in range(len(dialogue.turns)):
    context = dialogue_context(dialogue, turn_index)
    print(f"== turn {turn_index} context:")
    print("  ", context)
    print("   matched:", [t.as_tuple() for t in match_ontology(context, schema)])
    sample = build_tod_sample(dialogue, turn_index, schema)
    if sample is None:
        print("   (no sample: nothing matched or blank response)")
        continue
    pair = serialize_sample(sample)
    print("   source:", pair.source_seq)
    print("   target:", pair.target_seq)
    print()

print("note the alias 'fish dishes' surfaced as its canonical value, and")
print("'sea palace', which the user never typed, appears from turn 1 on")
print("because the system said it in the visible history.")
