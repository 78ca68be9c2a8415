import math
import random

import pytest

from ontoforge.dialogue import Database, DBRecord, DialogueState, Goal, DomainGoal
from ontoforge.ingest import CorpusError
from ontoforge.metrics import (
    EvalReport,
    LengthMismatch,
    MissingGoal,
    TurnPrediction,
    bleu,
    combined,
    evaluate_predictions,
    inform_success,
    jga,
    load_predictions,
)

from conftest import write_jsonl
from test_phase2 import schema_of

SCHEMA = schema_of({
    "restaurant": {
        "area": [("centre", "center"), ("north",), ("south",)],
        "food": [("chinese",), ("indian",)],
    },
})

DB = Database(records={
    "restaurant": (
        DBRecord("restaurant", {"name": "alpha", "area": "north",
                                "food": "chinese", "phone": "111"}),
        DBRecord("restaurant", {"name": "beta", "area": "south",
                                "food": "indian", "phone": "222"}),
    ),
})


def pred(dialogue_id, turn, state=(), response=""):
    return TurnPrediction(dialogue_id=dialogue_id, turn=turn,
                          state=DialogueState(state), response=response)


def goal_of(**domains):
    return Goal(domains={
        name: DomainGoal(constraints=body.get("constraints", {}),
                         requests=tuple(body.get("requests", ())))
        for name, body in domains.items()})


# ---------------------------------------------------------------------------
# joint goal accuracy

GOLD_4 = [
    pred("d1", 0, [("restaurant", "area", "north")]),
    pred("d1", 1, [("restaurant", "area", "north"),
                   ("restaurant", "food", "chinese")]),
    pred("d2", 0, [("restaurant", "area", "centre")]),
    pred("d2", 1, [("restaurant", "area", "centre"),
                   ("restaurant", "food", "indian")]),
]


def test_jga_half_right():
    preds = [
        pred("d1", 0, [("restaurant", "area", "north")]),          # hit
        pred("d1", 1, [("restaurant", "area", "north")]),          # miss
        pred("d2", 0, [("restaurant", "area", "centre")]),          # hit
        # d2 turn 1 unpredicted -> miss
    ]
    assert jga(preds, GOLD_4) == 0.5


def test_jga_set_comparison_not_order():
    gold = [pred("d", 0, [("restaurant", "area", "north"),
                          ("restaurant", "food", "chinese")])]
    mine = [pred("d", 0, [("restaurant", "food", "chinese"),
                          ("restaurant", "area", "north")])]
    assert jga(mine, gold) == 1.0


def test_jga_normalization_and_aliases():
    gold = [pred("d", 0, [("restaurant", "area", "centre")])]
    mine = [pred("d", 0, [("restaurant", "area", "Center!")])]
    assert jga(mine, gold) == 0.0
    assert jga(mine, gold, schema=SCHEMA) == 1.0
    shouting = [pred("d", 0, [("restaurant", "area", "CENTRE ")])]
    assert jga(shouting, gold) == 1.0


def test_jga_extra_prediction_slot_is_wrong():
    gold = [pred("d", 0, [("restaurant", "area", "north")])]
    mine = [pred("d", 0, [("restaurant", "area", "north"),
                          ("restaurant", "food", "chinese")])]
    assert jga(mine, gold) == 0.0


def test_jga_empty_states_match():
    assert jga([pred("d", 0)], [pred("d", 0)]) == 1.0


def test_jga_requires_gold():
    with pytest.raises(LengthMismatch):
        jga([], [])


# ---------------------------------------------------------------------------
# BLEU

def test_bleu_identity_is_100():
    toks = "the golden house serves cheap chinese food".split()
    assert bleu([toks], [toks]) == pytest.approx(100.0, abs=1e-9)


def test_bleu_no_overlap_is_0():
    assert bleu([list("abcd")], [list("wxyz")]) == 0.0


def test_bleu_short_hypotheses_lack_4grams():
    # no 4-gram anywhere in the corpus: zero by definition
    assert bleu([["just", "three", "words"]],
                [["just", "three", "words"]]) == 0.0


def test_bleu_hand_computed_case():
    hyp = "the cat sat on mat".split()
    ref = "the cat sat on the mat".split()
    # p = (5/5, 3/4, 2/3, 1/2), c=5, r=6
    want = 100.0 * math.exp(1 - 6 / 5) * (1.0 * 0.75 * (2 / 3) * 0.5) ** 0.25
    assert bleu([hyp], [ref]) == pytest.approx(want, abs=1e-9)


def test_bleu_clipping_counts_each_ref_gram_once():
    hyp = "north north north north north".split()
    ref = "north north south east west".split()
    # unigram matches clip at ref count 2, bigram at 1; 3/4-grams miss
    assert bleu([hyp], [ref]) == 0.0
    padded_hyp = hyp + "south east west".split()
    padded_ref = ref + "north south east west".split()
    score = bleu([padded_hyp], [padded_ref])
    assert 0.0 < score < 100.0


def test_bleu_brevity_only_penalizes_short_output():
    ref = "a b c d e".split()
    # shorter output: perfect precisions scaled by exp(1 - r/c)
    short = "a b c d".split()
    assert bleu([short], [ref]) == pytest.approx(
        100.0 * math.exp(1 - 5 / 4), abs=1e-9)
    # longer output: precision drops but no brevity penalty applies
    longer = ref + ["extra"]
    assert bleu([longer], [ref]) == pytest.approx(
        100.0 * ((5 / 6) * (4 / 5) * (3 / 4) * (2 / 3)) ** 0.25, abs=1e-9)


def test_bleu_pools_over_corpus():
    # one empty hypothesis hurts but does not zero the corpus score
    hyps = [[], "the cat sat on the mat".split()]
    refs = ["hello there".split(), "the cat sat on the mat".split()]
    score = bleu(hyps, refs)
    assert 0.0 < score < 100.0


def test_bleu_length_mismatch():
    with pytest.raises(LengthMismatch):
        bleu([["a"]], [])
    with pytest.raises(LengthMismatch):
        bleu([], [])


# independent oracle -------------------------------------------------------

def oracle_bleu(hyps, refs):
    precisions = []
    for n in range(1, 5):
        num = 0
        den = 0
        for hyp, ref in zip(hyps, refs):
            hgrams = [tuple(hyp[i:i + n]) for i in range(len(hyp) - n + 1)]
            rcount = {}
            for i in range(len(ref) - n + 1):
                g = tuple(ref[i:i + n])
                rcount[g] = rcount.get(g, 0) + 1
            hcount = {}
            for g in hgrams:
                hcount[g] = hcount.get(g, 0) + 1
            num += sum(min(c, rcount.get(g, 0)) for g, c in hcount.items())
            den += len(hgrams)
        if den == 0 or num == 0:
            return 0.0
        precisions.append(num / den)
    c = sum(len(h) for h in hyps)
    r = sum(len(x) for x in refs)
    bp = 1.0 if c > r else math.exp(1 - r / c)
    return 100.0 * bp * math.exp(sum(math.log(p) for p in precisions) / 4)


def make_bleu_pairs(n_pairs, seed=0):
    rng = random.Random(seed)
    vocab = ["the", "a", "cat", "dog", "sat", "ran", "on", "mat", "rug",
             "big", "small", "north", "house", "phone"]
    pairs = []
    for _ in range(n_pairs):
        ref = [rng.choice(vocab) for _ in range(rng.randrange(4, 15))]
        hyp = [tok if rng.random() < 0.7 else rng.choice(vocab)
               for tok in ref]
        if rng.random() < 0.3:
            hyp = hyp[:rng.randrange(1, len(hyp) + 1)]
        pairs.append((hyp, ref))
    return [p[0] for p in pairs], [p[1] for p in pairs]


def test_bleu_matches_oracle_on_20_pairs():
    hyps, refs = make_bleu_pairs(20, seed=17)
    assert bleu(hyps, refs) == pytest.approx(oracle_bleu(hyps, refs),
                                             abs=1e-6)


def test_bleu_matches_oracle_on_many_seeds():
    for seed in range(25):
        hyps, refs = make_bleu_pairs(8, seed=seed)
        assert bleu(hyps, refs) == pytest.approx(oracle_bleu(hyps, refs),
                                                 abs=1e-6), seed


# ---------------------------------------------------------------------------
# inform and success

GOALS_8 = {
    f"d{i}": goal_of(restaurant={"constraints": {"area": "north"},
                                 "requests": ["phone"]})
    for i in range(1, 7)
}
GOALS_8["d7"] = goal_of(taxi={"constraints": {"destination": "airport"},
                              "requests": []})
GOALS_8["d8"] = goal_of(restaurant={"constraints": {"area": "north"},
                                    "requests": ["phone"]})

PREDS_8 = [
    # informed + successful: right area, name offered, phone surfaced
    pred("d1", 0, [("restaurant", "area", "north")],
         "[restaurant_name] is in the north, phone [restaurant_phone]"),
    # informed + successful, markers spread over two turns
    pred("d2", 0, [("restaurant", "area", "north")],
         "how about [restaurant_name]?"),
    pred("d2", 1, [("restaurant", "area", "north")],
         "the number is [restaurant_phone]"),
    # informed, not successful: requested phone never surfaced
    pred("d3", 0, [("restaurant", "area", "north")],
         "[restaurant_name] fits"),
    # never offers an entity
    pred("d4", 0, [("restaurant", "area", "north")],
         "there are places in the north, phone [restaurant_phone]"),
    # offers under the wrong final constraint: lookup yields a south place
    pred("d5", 0, [("restaurant", "area", "south")],
         "[restaurant_name] then, phone [restaurant_phone]"),
    # predicted state matches nothing in the database
    pred("d6", 0, [("restaurant", "area", "north"),
                   ("restaurant", "food", "indian")],
         "[restaurant_name], phone [restaurant_phone]"),
    # goal domain absent from the database
    pred("d7", 0, [], "your taxi is [taxi_name]"),
    # empty response, nothing offered
    pred("d8", 0, [("restaurant", "area", "north")], ""),
]


def test_inform_success_eight_dialogue_fixture():
    flags = {}
    inform, success = inform_success(PREDS_8, GOALS_8, DB,
                                     per_dialogue=flags)
    assert inform == pytest.approx(37.5, abs=1e-9)
    assert success == pytest.approx(25.0, abs=1e-9)
    assert flags["d1"] == {"informed": True, "successful": True}
    assert flags["d2"] == {"informed": True, "successful": True}
    assert flags["d3"] == {"informed": True, "successful": False}
    for d in ("d4", "d5", "d6", "d7", "d8"):
        assert flags[d] == {"informed": False, "successful": False}, d


def test_inform_vacuous_goal_counts_as_informed():
    goals = {"d": goal_of(restaurant={"constraints": {"area": "dontcare"},
                                      "requests": []})}
    inform, success = inform_success(
        [pred("d", 0, [], "anything works")], goals, DB)
    assert (inform, success) == (100.0, 100.0)


def test_inform_uses_final_turn_state():
    goals = {"d": goal_of(restaurant={"constraints": {"area": "north"},
                                      "requests": []})}
    turns = [
        pred("d", 0, [("restaurant", "area", "north")], "[restaurant_name]"),
        pred("d", 1, [("restaurant", "area", "south")], "bye"),
    ]
    inform, _ = inform_success(turns, goals, DB)
    assert inform == 0.0


def test_inform_canonicalizes_with_schema():
    goals = {"d": goal_of(restaurant={"constraints": {"area": "Center"},
                                      "requests": []})}
    db = Database(records={"restaurant": (
        DBRecord("restaurant", {"name": "gamma", "area": "centre"}),)})
    turns = [pred("d", 0, [], "[restaurant_name]")]
    inform, _ = inform_success(turns, goals, db, schema=SCHEMA)
    assert inform == 100.0
    inform, _ = inform_success(turns, goals, db)
    assert inform == 0.0


def test_inform_missing_goal_and_empty():
    with pytest.raises(MissingGoal):
        inform_success([pred("dx", 0, [], "hi")], {}, DB)
    with pytest.raises(LengthMismatch):
        inform_success([], {}, DB)


# ---------------------------------------------------------------------------
# combined score and report

def test_combined_reference_values():
    assert combined(89.40, 81.10, 18.60) == pytest.approx(103.85, abs=1e-9)
    assert combined(96.32, 89.86, 26.56) == pytest.approx(119.65, abs=1e-9)
    assert combined(0.0, 0.0, 0.0) == 0.0
    assert combined(100.0, 100.0, 100.0) == 200.0


def test_report_validate():
    report = EvalReport(jga=0.5, inform=50.0, success=25.0, bleu=10.0,
                        combined=combined(50.0, 25.0, 10.0), counts={})
    report.validate()
    broken = EvalReport(jga=0.5, inform=50.0, success=25.0, bleu=10.0,
                        combined=47.6, counts={})
    with pytest.raises(ValueError):
        broken.validate()
    off_range = EvalReport(jga=1.5, inform=0, success=0, bleu=0,
                           combined=0.0, counts={})
    with pytest.raises(ValueError):
        off_range.validate()


def test_evaluate_predictions_end_to_end():
    golds = [
        pred("d1", 0, [("restaurant", "area", "north")],
             "[restaurant_name] is in the north phone [restaurant_phone]"),
        pred("d1", 1, [("restaurant", "area", "north")], "you are welcome"),
        pred("d2", 0, [("restaurant", "area", "south")], "no luck today"),
    ]
    preds = [
        pred("d1", 0, [("restaurant", "area", "north")],
             "[restaurant_name] is in the north phone [restaurant_phone]"),
        pred("d1", 1, [("restaurant", "area", "north")], "you are welcome"),
        pred("d2", 0, [("restaurant", "area", "centre")], "no luck today"),
    ]
    goals = {
        "d1": goal_of(restaurant={"constraints": {"area": "north"},
                                  "requests": ["phone"]}),
        "d2": goal_of(restaurant={"constraints": {"area": "dontcare"},
                                  "requests": []}),
    }
    report = evaluate_predictions(preds, golds, goals, DB)
    report.validate()
    assert report.jga == pytest.approx(2 / 3)
    assert report.inform == 100.0
    assert report.success == 100.0
    assert report.bleu == pytest.approx(100.0, abs=1e-9)
    assert report.combined == pytest.approx(200.0, abs=1e-9)
    assert report.counts == {"turns": 3, "dialogues": 2}
    assert [e["dialogue_id"] for e in report.per_dialogue] == ["d1", "d2"]
    d1 = report.per_dialogue[0]
    assert d1["turns"] == 2 and d1["jga"] == 1.0
    assert d1["informed"] and d1["successful"]
    assert report.per_dialogue[1]["jga"] == 0.0


def test_evaluate_missing_prediction_empty_hypothesis():
    golds = [pred("d1", 0, [], "a b c d e"),
             pred("d1", 1, [], "f g h i j")]
    preds = [pred("d1", 0, [], "a b c d e")]
    goals = {"d1": goal_of()}
    report = evaluate_predictions(preds, golds, goals, DB)
    assert report.jga == 0.5
    assert 0.0 < report.bleu < 100.0


# ---------------------------------------------------------------------------
# prediction files

def test_load_predictions(tmp_path):
    path = write_jsonl(tmp_path / "p.jsonl", [
        {"_header": {"tool": "x"}},
        {"dialogue_id": "d1", "turn": 0,
         "state": [["restaurant", "area", "north"]], "response": "hi"},
        {"dialogue_id": "d1", "turn": 1},
    ])
    preds = load_predictions(str(path))
    assert len(preds) == 2
    assert preds[0].state.get("restaurant", "area") == "north"
    assert preds[1].response == "" and len(preds[1].state) == 0


@pytest.mark.parametrize("rows,bad_line", [
    ([{"turn": 0}], 1),
    ([{"dialogue_id": "d", "turn": 0},
      {"dialogue_id": "d", "turn": 0}], 2),
    ([{"dialogue_id": "d", "turn": "x"}], 1),
    ([{"dialogue_id": "d", "turn": 0, "state": [["a", "b"]]}], 1),
])
def test_load_predictions_rejects(tmp_path, rows, bad_line):
    path = write_jsonl(tmp_path / "p.jsonl", rows)
    with pytest.raises(CorpusError) as err:
        load_predictions(str(path))
    assert err.value.line_no == bad_line
