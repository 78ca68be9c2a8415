import random

import pytest

from ontoforge.filtering import Triple
from ontoforge.ingest import Document, Sentence
from ontoforge.phase1 import (
    CTX,
    MASK,
    NTG,
    ONT,
    RES,
    MaskedTriple,
    ParseError,
    PretrainSample,
    SerializedPair,
    TooShortDocument,
    build_sample,
    parse_sample,
    sample_from_record,
    sample_to_record,
    serializable_triple,
    serialize_sample,
    split_next_text,
)


def doc_of(doc_id, *texts):
    return Document(doc_id=doc_id, title=None,
                    sentences=tuple(Sentence.make(i, t)
                                    for i, t in enumerate(texts)))


def sample_of(triples, context="some context text", next_text="what follows",
              k=1):
    return PretrainSample(
        sample_id="p1-x",
        masked_ontology=tuple(MaskedTriple(t.subject, t.relation)
                              for t in triples),
        masked_context=context,
        target_triples=tuple(triples),
        target_next_text=next_text,
        n_masked_sentences=k,
        seed=0,
    )


FOUR_SENT = doc_of("d1", "Alpha one.", "Beta two.", "Gamma three.",
                   "Delta four.")


# ---------------------------------------------------------------------------
# next-text split

def test_split_draws_one_or_two_sentences():
    rng = random.Random(0)
    seen = set()
    for _ in range(50):
        context, masked = split_next_text(FOUR_SENT, rng)
        assert len(masked) in (1, 2)
        assert len(context) + len(masked) == 4
        assert [s.text for s in context + masked] == [
            s.text for s in FOUR_SENT.sentences]
        seen.add(len(masked))
    assert seen == {1, 2}


def test_split_is_the_pinned_draw():
    rng_a = random.Random(77)
    rng_b = random.Random(77)
    _, masked = split_next_text(FOUR_SENT, rng_a)
    want_k = 1 if rng_b.random() < 0.5 else 2
    assert len(masked) == want_k


def test_split_rejects_short_documents():
    with pytest.raises(TooShortDocument):
        split_next_text(doc_of("d2", "One.", "Two."), random.Random(0))
    # three sentences is the minimum; context keeps at least one
    three = doc_of("d3", "One.", "Two.", "Three.")
    for seed in range(10):
        context, _ = split_next_text(three, random.Random(seed))
        assert len(context) >= 1


# ---------------------------------------------------------------------------
# sample assembly

def test_build_sample_collects_context_triples_only():
    triples = {
        0: [Triple("alpha", "kind", "first")],
        1: [Triple("beta", "kind", "second")],
        2: [Triple("gamma", "kind", "third")],
        3: [Triple("delta", "kind", "fourth")],
    }
    # force k=1: find a seed whose first draw is < 0.5
    seed = next(s for s in range(100) if random.Random(s).random() < 0.5)
    sample = build_sample(FOUR_SENT, triples, random.Random(seed), seed=seed)
    assert sample.n_masked_sentences == 1
    assert [t.subject for t in sample.target_triples] == [
        "alpha", "beta", "gamma"]
    assert sample.target_next_text == "Delta four."
    assert sample.masked_context == "Alpha one. Beta two. Gamma three."
    assert sample.sample_id == "p1-d1"
    assert sample.seed == seed


def test_build_sample_none_without_context_triples():
    counters = {}
    sample = build_sample(FOUR_SENT, {}, random.Random(0), counters=counters)
    assert sample is None
    assert counters == {"doc_no_context_triples": 1}


def test_build_sample_skips_unserializable_triples():
    counters = {}
    triples = {0: [Triple("bad [MASK]", "kind", "x"),
                   Triple("alpha", "kind", "first")]}
    sample = build_sample(FOUR_SENT, triples, random.Random(0),
                          counters=counters)
    assert [t.subject for t in sample.target_triples] == ["alpha"]
    assert counters["triple_unserializable"] == 1


def test_serializable_triple():
    assert serializable_triple(Triple("a", "b", "c"))
    assert not serializable_triple(Triple("a | b", "r", "c"))
    assert not serializable_triple(Triple("a", "r :: s", "c"))
    assert not serializable_triple(Triple("a", "r", "[CTX]"))


def test_validate_rejects_misalignment_and_bad_text():
    t = Triple("a", "r", "o")
    good = sample_of([t])
    good.validate()
    with pytest.raises(ValueError):
        sample_of([]).validate()
    with pytest.raises(ValueError):
        sample_of([t], context=" ").validate()
    with pytest.raises(ValueError):
        sample_of([t], next_text="has [NTG] inside").validate()
    with pytest.raises(ValueError):
        sample_of([t], k=3).validate()
    misaligned = PretrainSample(
        sample_id="x", masked_ontology=(MaskedTriple("a", "r"),),
        masked_context="c", target_triples=(Triple("b", "r", "o"),),
        target_next_text="n", n_masked_sentences=1, seed=0)
    with pytest.raises(ValueError):
        misaligned.validate()


# ---------------------------------------------------------------------------
# sequence grammar

def test_serialize_exact_layout():
    pair = serialize_sample(sample_of(
        [Triple("berlin", "capital", "germany"),
         Triple("rhine", "flows", "north sea")],
        context="Berlin is the capital. The Rhine flows north.",
        next_text="Both are in Europe."))
    assert pair.source_seq == (
        "[ONT] berlin :: capital :: [MASK] | rhine :: flows :: [MASK] "
        "[CTX] Berlin is the capital. The Rhine flows north. [NTG]")
    assert pair.target_seq == (
        "[ONT] berlin :: capital :: germany | rhine :: flows :: north sea "
        "[RES] Both are in Europe.")


def test_parse_inverts_serialize():
    sample = sample_of([Triple("a b", "r", "o1"), Triple("c", "r2", "o2 o3")],
                       context="ctx text here", next_text="tail text")
    parsed = parse_sample(serialize_sample(sample))
    assert parsed.content_key() == sample.content_key()
    assert parsed.masked_ontology == sample.masked_ontology


def test_round_trip_many_random_samples():
    rng = random.Random(5)
    words = ["north", "cafe", "tea", "old", "bridge", "two", "x1", "q"]

    def phrase():
        return " ".join(rng.choice(words)
                        for _ in range(rng.randrange(1, 4)))

    for _ in range(10000):
        triples = [Triple(phrase(), phrase(), phrase())
                   for _ in range(rng.randrange(1, 4))]
        sample = sample_of(triples, context=phrase(), next_text=phrase())
        assert parse_sample(serialize_sample(sample)).content_key() \
            == sample.content_key()


@pytest.mark.parametrize("source,target,said", [
    ("bad start [CTX] x [NTG]", "[ONT] a :: r :: o [RES] x", "must start"),
    ("[ONT] a :: r :: [MASK] no ctx [NTG]", "[ONT] a :: r :: o [RES] x",
     "missing"),
    ("[ONT] a :: r :: [MASK] [CTX] x", "[ONT] a :: r :: o [RES] x",
     "must end"),
    ("[ONT] a :: r [CTX] x [NTG]", "[ONT] a :: r :: o [RES] x", "3"),
    ("[ONT] a :: r :: o [CTX] x [NTG]", "[ONT] a :: r :: o [RES] x",
     "must be [MASK]"),
    ("[ONT] a :: r :: [MASK] [CTX] x [NTG]", "[ONT] a :: r :: o no res",
     "missing"),
    ("[ONT] a :: r :: [MASK] [CTX] x [NTG]",
     "[ONT] a :: r :: o | b :: r :: o [RES] x", "triple counts"),
    ("[ONT] a :: r :: [MASK] [CTX] x [NTG]",
     "[ONT] b :: r :: o [RES] x", "mismatch"),
])
def test_parse_rejects_malformed(source, target, said):
    with pytest.raises(ParseError) as err:
        parse_sample(SerializedPair(source, target))
    assert said in str(err.value)


def test_parse_error_position_points_into_block():
    src = "[ONT] a :: r :: [MASK] | broken [CTX] x [NTG]"
    tgt = "[ONT] a :: r :: o [RES] x"
    with pytest.raises(ParseError) as err:
        parse_sample(SerializedPair(src, tgt))
    # offset of the second chunk: after "[ONT] " plus first chunk and " | "
    assert err.value.position == len("[ONT] ") + len("a :: r :: [MASK]") + 3


# ---------------------------------------------------------------------------
# records

def test_record_round_trip():
    sample = sample_of([Triple("a", "r", "o")], k=2)
    record = sample_to_record(sample, {"doc_id": "d1"})
    assert record["sample_id"] == "p1-x"
    assert record["meta"] == {"k": 2, "n_triples": 1, "seed": 0,
                              "doc_id": "d1"}
    back = sample_from_record(record)
    assert back.content_key() == sample.content_key()
    assert back.n_masked_sentences == 2
    assert back.sample_id == "p1-x"
