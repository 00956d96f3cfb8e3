"""Reading ``<id>\\t<smiles>`` corpus files."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

__all__ = ["CorpusEntry", "read_corpus"]


@dataclass(frozen=True)
class CorpusEntry:
    lineno: int
    id: str
    smiles: str


def read_corpus(lines: Iterable[str]) -> Iterator[CorpusEntry]:
    """Yield entries from corpus lines; blank and ``#`` lines are skipped.

    A line without a tab is a bare SMILES and takes its line number as id.
    """
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.startswith("#"):
            continue
        if "\t" in line:
            ident, smiles = line.split("\t", 1)
        else:
            ident, smiles = str(lineno), line
        yield CorpusEntry(lineno, ident.strip(), smiles.strip())
