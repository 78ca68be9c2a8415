"""Deterministic pretraining-data forge and evaluation harness for
ontology-aware task-oriented dialogue models."""

__version__ = "0.1.0"

from .dialogue import (Database, DBRecord, DialogueState, FineTuneSample,
                       Goal, UnknownDomain, UnresolvedPlaceholder, db_bucket,
                       delexicalize, load_database, load_goals,
                       parse_finetune, query_db, relexicalize,
                       serialize_finetune)
from .filtering import (StopwordList, Triple, filter_sentence_triples,
                        load_stopwords, strip_stopwords)
from .ingest import (CorpusError, Document, RawTriple, Sentence, load_corpus,
                     load_triples, naive_extract, segment_sentences, tokenize)
from .metrics import (EvalReport, LengthMismatch, MissingGoal,
                      TurnPrediction, bleu, combined, evaluate_predictions,
                      inform_success, jga, load_predictions)
from .phase1 import (MaskedTriple, ParseError, PretrainSample,
                     SerializedPair, TooShortDocument, build_sample,
                     parse_sample, serialize_sample, split_next_text)
from .phase2 import (Dialogue, OntologySchema, SchemaError, Turn,
                     build_tod_sample, load_schema, match_ontology,
                     normalize)
from .seeding import hash64, rand_index, rand_pair, rng_for
