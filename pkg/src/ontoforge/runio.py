"""Output-file plumbing shared by the CLI subcommands: the header line every
output starts with, the footer line carrying rejection counters, streaming
JSONL readers, and input digests.

Header: ``{"_header": {"tool": "ontoforge", "version": ..., "seed": ...,
"stopwords_version": ..., "inputs": {name: {"path": ..., "sha256": ...}}}}``
Footer: ``{"_footer": {"counters": {reason: count, ...}}}``

All lines are serialized with sorted keys and compact separators so a rerun
with the same configuration is byte-identical.
"""

from __future__ import annotations

import hashlib
import json
from typing import IO, Iterator, Mapping, Optional


def dump_line(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=False)


def sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        while True:
            chunk = fh.read(1 << 20)
            if not chunk:
                break
            digest.update(chunk)
    return digest.hexdigest()


def header_record(version: str, seed: int, stopwords_version: str,
                  inputs: Mapping[str, str]) -> dict:
    return {"_header": {
        "tool": "ontoforge",
        "version": version,
        "seed": seed,
        "stopwords_version": stopwords_version,
        "inputs": {name: {"path": str(path), "sha256": sha256_file(path)}
                   for name, path in sorted(inputs.items())},
    }}


def footer_record(counters: Mapping[str, int]) -> dict:
    return {"_footer": {"counters": {k: counters[k] for k in sorted(counters)}}}


def read_header(path: str) -> Optional[dict]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                record = json.loads(line)
                return record.get("_header")
    return None


def read_footer(path: str) -> Optional[dict]:
    footer = None
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip().startswith('{"_footer"'):
                footer = json.loads(line).get("_footer")
    return footer


def read_jsonl(path: str) -> Iterator[dict]:
    """Records in file order, header and footer lines skipped."""
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            if "_header" in record or "_footer" in record:
                continue
            yield record


def write_lines(fh: IO[str], lines: Iterator[str]) -> int:
    count = 0
    for line in lines:
        fh.write(line)
        fh.write("\n")
        count += 1
    return count
