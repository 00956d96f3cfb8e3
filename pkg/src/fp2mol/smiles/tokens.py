"""SMILES tokenization and the decoder vocabulary."""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

__all__ = [
    "TokenSequence",
    "TokenizeError",
    "tokenize_smiles",
    "detokenize",
    "Vocab",
    "PAD",
    "BOS",
    "EOS",
    "UNK",
    "RESERVED",
]

TokenSequence = list[str]

_TOKEN = re.compile(
    r"\[[^\[\]]*\]"  # bracket atom
    r"|Cl|Br"
    r"|%\d\d"
    r"|[BCNOPSFIbcnops]"
    r"|[0-9]"
    r"|[()=#\-+:/\\.*@%]"
)


class TokenizeError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


def tokenize_smiles(text: str) -> TokenSequence:
    """Split a SMILES string into atom, bond, branch and ring-closure tokens.

    Lexing is purely textual: a string that is chemically meaningless still
    tokenizes as long as every character belongs to the grammar.

    >>> tokenize_smiles("C(Cl)Br")
    ['C', '(', 'Cl', ')', 'Br']
    """
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise TokenizeError(f"illegal character {text[pos]!r}", pos)
        tokens.append(m.group())
        pos = m.end()
    return tokens


def detokenize(tokens: Iterable[str]) -> str:
    return "".join(tokens)


PAD, BOS, EOS, UNK = "<pad>", "<bos>", "<eos>", "<unk>"
RESERVED = (PAD, BOS, EOS, UNK)


@dataclass(frozen=True)
class Vocab:
    """Bijective token <-> id map with ids 0..3 reserved for PAD, BOS, EOS, UNK."""

    tokens: tuple[str, ...]
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("duplicate tokens in vocabulary")
        if set(self.tokens) & set(RESERVED):
            raise ValueError("reserved symbols cannot be vocabulary tokens")
        index = {tok: i for i, tok in enumerate(RESERVED + tuple(self.tokens))}
        object.__setattr__(self, "_index", index)

    pad_id, bos_id, eos_id, unk_id = 0, 1, 2, 3

    @classmethod
    def build(cls, corpus: Iterable[Sequence[str]]) -> Vocab:
        """Collect tokens from tokenized SMILES in first-seen order."""
        seen: dict[str, None] = {}
        for seq in corpus:
            for tok in seq:
                seen.setdefault(tok, None)
        return cls(tuple(seen))

    def __len__(self) -> int:
        return len(RESERVED) + len(self.tokens)

    def id_of(self, token: str) -> int:
        return self._index.get(token, self.unk_id)

    def token_of(self, index: int) -> str:
        if not 0 <= index < len(self):
            raise IndexError(f"token id {index} outside vocabulary of size {len(self)}")
        if index < len(RESERVED):
            return RESERVED[index]
        return self.tokens[index - len(RESERVED)]

    def encode(self, tokens: Sequence[str], bos: bool = False, eos: bool = False) -> list[int]:
        ids = [self.id_of(t) for t in tokens]
        return ([self.bos_id] if bos else []) + ids + ([self.eos_id] if eos else [])

    def decode(self, ids: Sequence[int]) -> list[str]:
        """Map ids back to tokens, dropping reserved symbols."""
        return [self.token_of(i) for i in ids if i >= len(RESERVED)]

    def to_json(self) -> str:
        return json.dumps({"tokens": list(self.tokens)}, ensure_ascii=False)

    @classmethod
    def from_json(cls, text: str) -> Vocab:
        data = json.loads(text)
        if not isinstance(data, dict) or not isinstance(data.get("tokens"), list):
            raise ValueError('vocab JSON must be an object with a "tokens" list')
        return cls(tuple(data["tokens"]))

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()
