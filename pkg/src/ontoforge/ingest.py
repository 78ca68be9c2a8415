"""Corpus loading, sentence segmentation, tokenization, and the fallback
pattern extractor.

Wire formats (UTF-8, one JSON object per line, LF endings):

* Document JSONL: ``{"doc_id": str, "title": str|null, "text": str}`` —
  segmentation applied on load — or pre-segmented
  ``{"doc_id": str, "sentences": [str, ...]}``.
* Triple JSONL: ``{"doc_id": str, "sent": int, "subj": str, "rel": str,
  "obj": str, "conf": float|null}``.

A first line of the form ``{"_header": {...}}`` (written by the CLI) is
skipped by all loaders.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Optional

_SENT_END = ".!?"
_DROPPED_PUNCT = set('.,?!:;"()')


class CorpusError(ValueError):
    """Malformed input line; carries file and line number."""

    def __init__(self, path, line_no: int, reason: str):
        self.path = str(path)
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"{self.path}:{line_no}: {reason}")

    def __reduce__(self):
        return (CorpusError, (self.path, self.line_no, self.reason))


def _load_wordlist(name: str) -> list[str]:
    text = (resources.files("ontoforge") / "data" / name).read_text("utf-8")
    return [w.strip().lower() for w in text.splitlines()
            if w.strip() and not w.startswith("#")]


def default_abbreviations() -> frozenset[str]:
    return frozenset(_load_wordlist("abbrev.txt"))


def default_verbs() -> frozenset[str]:
    return frozenset(_load_wordlist("verbs.txt"))


_ABBREVS = default_abbreviations()
_VERBS = default_verbs()

# determiners and connective words that bound the subject span and are
# stripped from the front of the object span
_BOUNDARY_WORDS = frozenset(
    "the a an this that these those my your his her its our their some any "
    "no each every all both few many much several what which whose and or "
    "but of in on at to from by with for as into near over under".split()
)
_DETERMINERS = frozenset(
    "the a an this that these those my your his her its our their some any "
    "no each every all both few many much several".split()
)
_PARTICLES = frozenset(
    "at in on to from by with of for as into near until after before "
    "during over under about around off out up down".split()
)


def tokenize(text: str) -> list[str]:
    """Lowercase word tokens; sentence punctuation is dropped, except a
    colon with digits on both sides (time values must survive)."""
    text = text.lower()
    chars = []
    for i, ch in enumerate(text):
        if ch in _DROPPED_PUNCT:
            if (ch == ":" and 0 < i < len(text) - 1
                    and text[i - 1].isdigit() and text[i + 1].isdigit()):
                chars.append(ch)
            else:
                chars.append(" ")
        else:
            chars.append(ch)
    return "".join(chars).split()


@dataclass(frozen=True)
class Sentence:
    index: int
    text: str
    tokens: tuple[str, ...] = field(default=())

    @staticmethod
    def make(index: int, text: str) -> "Sentence":
        return Sentence(index=index, text=text, tokens=tuple(tokenize(text)))


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: Optional[str]
    sentences: tuple[Sentence, ...]

    def __post_init__(self):
        if not self.doc_id:
            raise ValueError("doc_id must be non-empty")

    def text(self) -> str:
        return " ".join(s.text for s in self.sentences)


@dataclass(frozen=True)
class RawTriple:
    doc_id: str
    sentence_index: int
    subject: str
    relation: str
    object: str
    confidence: Optional[float] = None


def segment_sentences(raw_text: str,
                      abbreviations: frozenset[str] = _ABBREVS) -> list[Sentence]:
    """Split text into sentences at runs of ``. ! ?`` followed by whitespace
    or end of text, unless the word ending the run is a known abbreviation.

    Lossless modulo whitespace: rejoining the sentence texts (with collapsed
    whitespace) reproduces the input (with collapsed whitespace).
    """
    sentences: list[str] = []
    n = len(raw_text)
    start = 0
    i = 0
    while i < n:
        if raw_text[i] in _SENT_END:
            j = i
            while j + 1 < n and raw_text[j + 1] in _SENT_END:
                j += 1
            at_boundary = j + 1 >= n or raw_text[j + 1].isspace()
            if at_boundary and j == i and raw_text[i] == ".":
                k = i
                while k > start and not raw_text[k - 1].isspace():
                    k -= 1
                token = raw_text[k:i + 1].lower().lstrip("(\"'")
                if token in abbreviations:
                    at_boundary = False
            if at_boundary:
                seg = raw_text[start:j + 1].strip()
                if seg:
                    sentences.append(seg)
                start = j + 1
            i = j + 1
        else:
            i += 1
    tail = raw_text[start:].strip()
    if tail:
        sentences.append(tail)
    return [Sentence.make(idx, text) for idx, text in enumerate(sentences)]


def _doc_from_record(rec: dict, path, line_no: int) -> Document:
    doc_id = rec.get("doc_id")
    if not isinstance(doc_id, str) or not doc_id:
        raise CorpusError(path, line_no, "missing or empty doc_id")
    title = rec.get("title")
    if title is not None and not isinstance(title, str):
        raise CorpusError(path, line_no, "title must be a string or null")
    if "sentences" in rec:
        raw = rec["sentences"]
        if not isinstance(raw, list) or not all(isinstance(s, str) for s in raw):
            raise CorpusError(path, line_no, "sentences must be a list of strings")
        texts = [s.strip() for s in raw if s.strip()]
        sents = tuple(Sentence.make(i, t) for i, t in enumerate(texts))
    elif "text" in rec:
        if not isinstance(rec["text"], str):
            raise CorpusError(path, line_no, "text must be a string")
        sents = tuple(segment_sentences(rec["text"]))
    else:
        raise CorpusError(path, line_no, "document needs 'text' or 'sentences'")
    return Document(doc_id=doc_id, title=title, sentences=sents)


def _is_header(rec) -> bool:
    return isinstance(rec, dict) and ("_header" in rec or "_footer" in rec)


def load_corpus(path, fmt: str = "jsonl", skip_bad: bool = False,
                stats: Optional[dict] = None) -> Iterator[Document]:
    """Stream documents in file order.  ``plain`` treats blank-line-separated
    blocks as documents with ids doc-0, doc-1, ...  Malformed jsonl lines
    raise :class:`CorpusError` naming the line, or are counted and skipped
    when ``skip_bad`` is set."""
    if stats is None:
        stats = {}
    stats.setdefault("bad_lines", 0)
    path = Path(path)
    if fmt == "plain":
        yield from _load_plain(path)
        return
    if fmt != "jsonl":
        raise ValueError(f"unknown corpus format: {fmt!r}")
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                if _is_header(rec):
                    continue
                doc = _doc_from_record(rec, path, line_no)
                if doc.doc_id in seen:
                    raise CorpusError(path, line_no,
                                      f"duplicate doc_id {doc.doc_id!r}")
                seen.add(doc.doc_id)
            except (json.JSONDecodeError, CorpusError) as exc:
                if skip_bad:
                    stats["bad_lines"] += 1
                    continue
                if isinstance(exc, CorpusError):
                    raise
                raise CorpusError(path, line_no, f"invalid JSON: {exc.msg}")
            yield doc


def _load_plain(path: Path) -> Iterator[Document]:
    block: list[str] = []
    count = 0
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                block.append(line.strip())
            elif block:
                yield Document(doc_id=f"doc-{count}", title=None,
                               sentences=tuple(segment_sentences(" ".join(block))))
                count += 1
                block = []
    if block:
        yield Document(doc_id=f"doc-{count}", title=None,
                       sentences=tuple(segment_sentences(" ".join(block))))


def _triple_from_record(rec: dict, path, line_no: int) -> RawTriple:
    doc_id = rec.get("doc_id")
    sent = rec.get("sent")
    if not isinstance(doc_id, str) or not doc_id:
        raise CorpusError(path, line_no, "missing or empty doc_id")
    if not isinstance(sent, int) or isinstance(sent, bool) or sent < 0:
        raise CorpusError(path, line_no, "'sent' must be a non-negative integer")
    for key in ("subj", "rel", "obj"):
        if not isinstance(rec.get(key), str):
            raise CorpusError(path, line_no, f"'{key}' must be a string")
    conf = rec.get("conf")
    if conf is not None and not isinstance(conf, (int, float)):
        raise CorpusError(path, line_no, "'conf' must be a number or null")
    if conf is not None and not 0.0 <= float(conf) <= 1.0:
        raise CorpusError(path, line_no, "'conf' out of [0, 1]")
    return RawTriple(doc_id=doc_id, sentence_index=sent, subject=rec["subj"],
                     relation=rec["rel"], object=rec["obj"],
                     confidence=None if conf is None else float(conf))


def iter_triples(path, skip_bad: bool = False,
                 stats: Optional[dict] = None) -> Iterator[RawTriple]:
    """Stream raw triples in file order."""
    if stats is None:
        stats = {}
    stats.setdefault("bad_lines", 0)
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                if _is_header(rec):
                    continue
                triple = _triple_from_record(rec, path, line_no)
            except (json.JSONDecodeError, CorpusError) as exc:
                if skip_bad:
                    stats["bad_lines"] += 1
                    continue
                if isinstance(exc, CorpusError):
                    raise
                raise CorpusError(path, line_no, f"invalid JSON: {exc.msg}")
            yield triple


def load_triples(path, skip_bad: bool = False, stats: Optional[dict] = None
                 ) -> dict[tuple[str, int], list[RawTriple]]:
    """Group triples by (doc_id, sentence index), preserving file order
    within each key.  Duplicates are retained; deduplication is the
    filtering stage's job.  Triples for unknown documents are kept here and
    dropped (with a warning count) where the document stream is joined."""
    grouped: dict[tuple[str, int], list[RawTriple]] = {}
    for triple in iter_triples(path, skip_bad=skip_bad, stats=stats):
        grouped.setdefault((triple.doc_id, triple.sentence_index), []).append(triple)
    return grouped


def naive_extract(sentence: Sentence, doc_id: str = "",
                  verbs: frozenset[str] = _VERBS) -> list[RawTriple]:
    """Pattern-based subject-verb-object fallback: the longest noun-ish span
    before the first verb-list match, the verb plus trailing particles, and
    the remainder as object.  Returns [] when no pattern matches."""
    tokens = sentence.tokens
    verb_at = next((i for i, tok in enumerate(tokens) if tok in verbs), None)
    if verb_at is None or verb_at == 0:
        return []
    subj_start = verb_at
    while subj_start > 0 and tokens[subj_start - 1] not in _BOUNDARY_WORDS:
        subj_start -= 1
    subject = " ".join(tokens[subj_start:verb_at])
    if not subject:
        return []
    verb_end = verb_at + 1
    while verb_end < len(tokens) and tokens[verb_end] in _PARTICLES:
        verb_end += 1
    obj_tokens = list(tokens[verb_end:])
    while obj_tokens and obj_tokens[0] in _DETERMINERS:
        obj_tokens.pop(0)
    if not obj_tokens:
        return []
    return [RawTriple(doc_id=doc_id, sentence_index=sentence.index,
                      subject=subject,
                      relation=" ".join(tokens[verb_at:verb_end]),
                      object=" ".join(obj_tokens))]
