"""Conjunctive word matching between search terms and ICD-10 descriptions.

A code matches a term when every word of the term appears as a whole token in
the code's description. Matching runs over the catalog's inverted index; the
naive double loop is kept as the reference implementation for tests. An
optional substring mode relaxes whole-token matching for sensitivity checks.
"""

from __future__ import annotations

import csv
from collections.abc import Collection
from dataclasses import dataclass
from pathlib import Path

from .errors import EmptyTerm, MissingFile, SchemaViolation
from .icd_catalog import Catalog
from .roadmap import Roadmap, SearchTerm, TermStatus

DEFAULT_STATUSES = frozenset({TermStatus.RETAINED})


@dataclass(frozen=True)
class MatchResult:
    """Codes matched by one term, overall and within a cohort's diagnoses."""

    term_id: str
    matched_codes: frozenset[str]
    in_sample_codes: frozenset[str]


@dataclass(frozen=True)
class MatchSummary:
    """Roadmap-level counts: terms, matched codes, matched codes in sample."""

    terms: int
    matched_codes: int
    in_sample_codes: int


def match_term(term: SearchTerm, catalog: Catalog, mode: str = "token") -> set[str]:
    """Codes whose description carries every word of the term.

    mode "token" requires whole-token hits; mode "substring" accepts any
    substring occurrence in the lowercased description.
    """
    if not term.words:
        raise EmptyTerm(term.phrase)
    if mode == "substring":
        return {
            entry.code
            for entry in catalog.entries
            if all(word in entry.description.lower() for word in term.words)
        }
    if mode != "token":
        raise ValueError(f"unknown match mode: {mode!r}")
    positions: set[int] | None = None
    for word in term.words:
        posting = catalog.positions_for_token(word)
        positions = set(posting) if positions is None else positions & posting
        if not positions:
            return set()
    assert positions is not None
    return {catalog.entries[position].code for position in positions}


def match_term_naive(term: SearchTerm, catalog: Catalog) -> set[str]:
    """Reference implementation: scan every entry, no index."""
    if not term.words:
        raise EmptyTerm(term.phrase)
    matched = set()
    for entry in catalog.entries:
        tokens = set(entry.tokens)
        if all(word in tokens for word in term.words):
            matched.add(entry.code)
    return matched


def match_roadmap(
    roadmap: Roadmap,
    catalog: Catalog,
    sample_codes: set[str] | None = None,
    statuses: Collection[TermStatus] = DEFAULT_STATUSES,
    mode: str = "token",
) -> tuple[list[MatchResult], MatchSummary]:
    """Match every participating term and summarize the roadmap.

    Only terms whose status is in statuses participate (retained by default).
    sample_codes restricts the in-sample view to codes present in a cohort's
    diagnoses; when omitted, in_sample_codes is empty.

    Summary counts are exact set cardinalities: distinct participating word
    sets, the union of matched codes, and that union restricted to the sample.
    """
    results: list[MatchResult] = []
    all_matched: set[str] = set()
    word_sets: set[frozenset[str]] = set()
    sample = sample_codes or set()
    terms = [t for t in roadmap.terms if t.status in statuses]
    for term in sorted(terms, key=lambda t: t.term_id):
        matched = frozenset(match_term(term, catalog, mode=mode))
        results.append(MatchResult(
            term_id=term.term_id,
            matched_codes=matched,
            in_sample_codes=frozenset(matched & sample),
        ))
        all_matched |= matched
        word_sets.add(frozenset(term.words))
    summary = MatchSummary(
        terms=len(word_sets),
        matched_codes=len(all_matched),
        in_sample_codes=len(all_matched & sample),
    )
    return results, summary


def write_matches(
    results: list[MatchResult], roadmap: Roadmap, path: str | Path
) -> Path:
    """Persist match results as one row per (term, code).

    A term with no matches still gets one row with an empty code so the file
    round-trips the full result list.
    """
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["term_id", "component", "phrase", "code", "in_sample"])
        for result in results:
            term = roadmap.get(result.term_id)
            component = term.component.value if term else ""
            phrase = term.phrase if term else ""
            if not result.matched_codes:
                writer.writerow([result.term_id, component, phrase, "", "false"])
                continue
            for code in sorted(result.matched_codes):
                writer.writerow([
                    result.term_id, component, phrase, code,
                    "true" if code in result.in_sample_codes else "false",
                ])
    return path


def read_matches(path: str | Path) -> list[MatchResult]:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(str(path))
    matched: dict[str, set[str]] = {}
    in_sample: dict[str, set[str]] = {}
    order: list[str] = []
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        expected = ["term_id", "component", "phrase", "code", "in_sample"]
        if reader.fieldnames != expected:
            raise SchemaViolation(
                f"{path}: expected header {expected}, got {reader.fieldnames}"
            )
        for row in reader:
            term_id = row["term_id"]
            if term_id not in matched:
                matched[term_id] = set()
                in_sample[term_id] = set()
                order.append(term_id)
            code = row["code"].strip()
            if not code:
                continue
            matched[term_id].add(code)
            if row["in_sample"].strip().lower() == "true":
                in_sample[term_id].add(code)
    return [
        MatchResult(
            term_id=term_id,
            matched_codes=frozenset(matched[term_id]),
            in_sample_codes=frozenset(in_sample[term_id]),
        )
        for term_id in order
    ]
