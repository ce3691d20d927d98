"""ICD-10 catalog loading, code normalization, and inverted-index lookup.

The catalog is a headerless two-column file (code, description), the shape of
the public ICD-10-CM order file after trivial preprocessing. Codes are stored
in dotted uppercase display form and compared in undotted form, since EHR
extracts vary in dot usage.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from pathlib import Path

from .errors import DuplicateCode, EmptyCode, MalformedRow, MissingFile

_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")

_DELIMITERS = {".tsv": "\t", ".txt": "\t", ".csv": ","}


def tokenize(text: str) -> list[str]:
    """Split text into lowercase alphanumeric tokens.

    Every non-alphanumeric character is a boundary, so "Auto-Immune" becomes
    ["auto", "immune"]. Numerals are kept; empty fragments are dropped.
    """
    return [word for word in _TOKEN_SPLIT.split(text.lower()) if word]


def normalize_code(raw: str) -> str:
    """Return the canonical dotted uppercase form of an ICD-10 code.

    A dot is inserted after the third character when the code is longer than
    three characters and has no dot yet; an existing dot is preserved.
    Idempotent by construction.
    """
    code = raw.strip().upper()
    if not code:
        raise EmptyCode("ICD-10 code is empty after trimming")
    if "." not in code and len(code) > 3:
        code = code[:3] + "." + code[3:]
    return code


def code_key(raw: str) -> str:
    """Undotted uppercase form used for identity comparisons."""
    return normalize_code(raw).replace(".", "")


@dataclass(frozen=True)
class IcdEntry:
    """One ICD-10 code with its description and derived token list."""

    code: str
    description: str
    tokens: tuple[str, ...]

    @classmethod
    def create(cls, code: str, description: str) -> "IcdEntry":
        return cls(
            code=normalize_code(code),
            description=description,
            tokens=tuple(tokenize(description)),
        )


class Catalog:
    """Immutable ICD-10 code catalog with an inverted token index."""

    def __init__(self, entries: list[IcdEntry]):
        self.entries: list[IcdEntry] = list(entries)
        self._position_by_key: dict[str, int] = {}
        for position, entry in enumerate(self.entries):
            key = entry.code.replace(".", "")
            if key in self._position_by_key:
                raise DuplicateCode(entry.code)
            self._position_by_key[key] = position
        self.index: dict[str, set[int]] = build_index(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, code: str) -> IcdEntry | None:
        """Look up an entry by code in any dot/case variant."""
        position = self._position_by_key.get(code_key(code))
        return self.entries[position] if position is not None else None

    def __contains__(self, code: str) -> bool:
        return self.get(code) is not None

    def positions_for_token(self, token: str) -> set[int]:
        return self.index.get(token, set())

    def vocabulary_size(self) -> int:
        return len(self.index)


def build_index(entries: list[IcdEntry]) -> dict[str, set[int]]:
    """Map each token to the set of entry positions whose description has it."""
    index: dict[str, set[int]] = {}
    for position, entry in enumerate(entries):
        for token in set(entry.tokens):
            index.setdefault(token, set()).add(position)
    return index


def load_catalog(path: str | Path, format: str | None = None) -> Catalog:
    """Load a catalog from a headerless (code, description) delimited file.

    Args:
        path: input file; delimiter inferred from its extension unless
            format is given.
        format: "tsv" or "csv" to override extension inference.

    Raises:
        MissingFile, MalformedRow, DuplicateCode.
    """
    file_path = Path(path)
    if not file_path.is_file():
        raise MissingFile(str(file_path))
    if format is not None:
        if format not in ("tsv", "csv"):
            raise ValueError(f"format must be tsv or csv, got {format!r}")
        delimiter = "\t" if format == "tsv" else ","
    else:
        delimiter = _DELIMITERS.get(file_path.suffix.lower(), "\t")

    entries: list[IcdEntry] = []
    with open(file_path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle, delimiter=delimiter)
        for line_number, row in enumerate(reader, start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) < 2:
                raise MalformedRow(line_number, "expected code and description")
            description = row[1].strip()
            if not description:
                raise MalformedRow(line_number, "empty description")
            try:
                entries.append(IcdEntry.create(row[0], description))
            except EmptyCode:
                raise MalformedRow(line_number, "empty code") from None
    return Catalog(entries)
