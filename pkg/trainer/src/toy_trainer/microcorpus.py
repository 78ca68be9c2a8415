"""Templated micro-corpus: tiny vocabulary, eight fixed triple patterns.

Documents are four lowercase sentences. The first and third carry one
triple each from distinct patterns; the second echoes the first object;
the fourth closes the text. The forge masks the final one or two
sentences, so every document keeps at least one triple in its context
and yields exactly one sample.

The corpus and triple files are written in the forge's wire formats and
turned into samples by shelling out to build-phase1; the trainer never
builds samples itself.
"""

from __future__ import annotations

import json
import random
import subprocess
from pathlib import Path

PATTERNS: tuple[tuple[str, str, tuple[str, ...]], ...] = (
    ("harbour cafe", "serves",
     ("tea", "coffee", "soup", "noodles", "cake", "toast")),
    ("stone inn", "offers",
     ("rooms", "parking", "breakfast", "wifi", "dinner", "storage")),
    ("city museum", "displays",
     ("paintings", "fossils", "maps", "coins", "statues", "armour")),
    ("river theatre", "presents",
     ("opera", "ballet", "drama", "comedy", "concerts", "puppetry")),
    ("green market", "sells",
     ("apples", "cheese", "flowers", "bread", "honey", "plums")),
    ("pine library", "lends",
     ("novels", "atlases", "journals", "records", "comics", "manuals")),
    ("north station", "runs",
     ("trains", "buses", "trams", "ferries", "coaches", "shuttles")),
    ("mill bakery", "bakes",
     ("rolls", "pies", "buns", "scones", "pretzels", "bagels")),
)

_CLOSERS = (
    "visitors keep coming back.",
    "the town is proud of it.",
    "everyone seems pleased.",
)


def make_documents(n_docs: int, seed: int, prefix: str = "micro"
                   ) -> tuple[list[dict], list[dict]]:
    """Returns (doc records, triple records) in the forge wire formats."""
    rng = random.Random(seed)
    docs: list[dict] = []
    triples: list[dict] = []
    for i in range(n_docs):
        doc_id = f"{prefix}{i:05d}"
        pat_a, pat_b = rng.sample(range(len(PATTERNS)), 2)
        subj_a, rel_a, objs_a = PATTERNS[pat_a]
        subj_b, rel_b, objs_b = PATTERNS[pat_b]
        obj_a = rng.choice(objs_a)
        obj_b = rng.choice(objs_b)
        sentences = (
            f"the {subj_a} {rel_a} {obj_a} these days.",
            f"locals praise the {obj_a} there.",
            f"the {subj_b} {rel_b} {obj_b} as well.",
            rng.choice(_CLOSERS),
        )
        docs.append({"doc_id": doc_id, "text": " ".join(sentences)})
        triples.append({"doc_id": doc_id, "sent": 0, "subj": subj_a,
                        "rel": rel_a, "obj": obj_a, "conf": None})
        triples.append({"doc_id": doc_id, "sent": 2, "subj": subj_b,
                        "rel": rel_b, "obj": obj_b, "conf": None})
    return docs, triples


def write_jsonl(records: list[dict], path: str) -> str:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True))
            fh.write("\n")
    return path


def build_samples(out_dir: str, n_docs: int, seed: int, prefix: str,
                  forge_cmd: tuple[str, ...] = ("ontoforge",),
                  build_seed: int = 0) -> str:
    """Generate a micro corpus and run build-phase1 on it; returns the
    sample file path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    docs, triples = make_documents(n_docs, seed, prefix)
    corpus_path = str(out / f"{prefix}_corpus.jsonl")
    triples_path = str(out / f"{prefix}_triples.jsonl")
    samples_path = str(out / f"{prefix}_samples.jsonl")
    write_jsonl(docs, corpus_path)
    write_jsonl(triples, triples_path)
    proc = subprocess.run(
        [*forge_cmd, "build-phase1", "--corpus", corpus_path,
         "--triples", triples_path, "--seed", str(build_seed),
         "--out", samples_path],
        capture_output=True, text=True)
    if proc.returncode != 0:
        raise RuntimeError(f"build-phase1 failed: {proc.stderr.strip()}")
    return samples_path
