"""SMILES reading, writing, canonicalization and tokenization."""

from functools import lru_cache

from .aromaticity import KekulizeError, kekulize, normalize, perceive_aromaticity
from .corpus import CorpusEntry, read_corpus
from .parser import SmilesError, parse_smiles
from .tokens import (
    BOS,
    EOS,
    PAD,
    UNK,
    TokenizeError,
    TokenSequence,
    Vocab,
    detokenize,
    tokenize_smiles,
)
from .writer import canonical_ranks, write_smiles

__all__ = [
    "CorpusEntry",
    "read_corpus",
    "KekulizeError",
    "SmilesError",
    "TokenizeError",
    "TokenSequence",
    "Vocab",
    "PAD",
    "BOS",
    "EOS",
    "UNK",
    "parse_smiles",
    "write_smiles",
    "canonical_ranks",
    "canonical_smiles",
    "kekulize",
    "normalize",
    "perceive_aromaticity",
    "tokenize_smiles",
    "detokenize",
]


@lru_cache(maxsize=65536)
def canonical_smiles(text: str) -> str | None:
    """Canonical form of a SMILES string, or None when it does not parse."""
    try:
        return write_smiles(parse_smiles(text), canonical=True)
    except (SmilesError, ValueError):
        return None
