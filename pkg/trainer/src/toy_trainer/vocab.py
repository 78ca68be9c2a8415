"""Whitespace token vocabulary.

Sample files are already plain token streams separated by single spaces
(the forge never emits tabs or newlines inside a sequence), so tokenize
is just str.split. The vocabulary is frozen at training time and stored
in the checkpoint; unseen tokens at predict time map to <unk>.
"""

from __future__ import annotations

from dataclasses import dataclass

PAD = "<pad>"
BOS = "<bos>"
EOS = "<eos>"
UNK = "<unk>"

SPECIALS = (PAD, BOS, EOS, UNK)


def tokenize(text: str) -> list[str]:
    return text.split()


@dataclass(frozen=True)
class Vocab:
    tokens: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.tokens[: len(SPECIALS)] != SPECIALS:
            raise ValueError("vocab must start with the special tokens")
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(self.tokens)})

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def pad_id(self) -> int:
        return 0

    @property
    def bos_id(self) -> int:
        return 1

    @property
    def eos_id(self) -> int:
        return 2

    @property
    def unk_id(self) -> int:
        return 3

    def id_of(self, token: str) -> int:
        return self._index.get(token, 3)

    def encode(self, text: str) -> list[int]:
        return [self.id_of(t) for t in tokenize(text)]

    def decode(self, ids: list[int]) -> list[str]:
        return [self.tokens[i] for i in ids]


def build_vocab(texts: list[str]) -> Vocab:
    """Collect every distinct token, sorted for a stable id assignment."""
    seen: set[str] = set()
    for text in texts:
        seen.update(tokenize(text))
    seen.difference_update(SPECIALS)
    return Vocab(tokens=SPECIALS + tuple(sorted(seen)))
