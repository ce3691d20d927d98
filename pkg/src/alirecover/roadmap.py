"""Roadmap model: per-component search-term phrases with provenance.

A roadmap maps each ALI component to the list of search-term phrases used to
hunt for auxiliary diagnoses. Term identity is (component, tokenized words),
so "Renal Failure" and "renal failure" are the same term.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

from .errors import EmptyPhrase, MissingFile, UnknownComponent
from .icd_catalog import tokenize

logger = logging.getLogger(__name__)


class AliComponent(Enum):
    """The ten allostatic load index components."""

    SYSTOLIC_BP = "SystolicBP"
    DIASTOLIC_BP = "DiastolicBP"
    BMI = "BMI"
    TRIGLYCERIDES = "Triglycerides"
    TOTAL_CHOLESTEROL = "TotalCholesterol"
    CRP = "CRP"
    HBA1C = "HbA1c"
    SERUM_ALBUMIN = "SerumAlbumin"
    CREATININE_CLEARANCE = "CreatinineClearance"
    HOMOCYSTEINE = "Homocysteine"

    @classmethod
    def parse(cls, name: str) -> "AliComponent":
        key = name.strip().lower().replace(" ", "").replace("_", "").replace("-", "")
        for member in cls:
            if key == member.value.lower() or key == member.name.lower().replace("_", ""):
                return member
        label_hits = [m for m, label in DISPLAY_NAMES.items()
                      if key == label.lower().replace(" ", "").replace("-", "")]
        if label_hits:
            return label_hits[0]
        raise UnknownComponent(name)


DISPLAY_NAMES: dict[AliComponent, str] = {
    AliComponent.SYSTOLIC_BP: "Systolic Blood Pressure",
    AliComponent.DIASTOLIC_BP: "Diastolic Blood Pressure",
    AliComponent.BMI: "Body Mass Index",
    AliComponent.TRIGLYCERIDES: "Triglycerides",
    AliComponent.TOTAL_CHOLESTEROL: "Total Cholesterol",
    AliComponent.CRP: "C-Reactive Protein",
    AliComponent.HBA1C: "Hemoglobin A1C",
    AliComponent.SERUM_ALBUMIN: "Serum Albumin",
    AliComponent.CREATININE_CLEARANCE: "Creatinine Clearance",
    AliComponent.HOMOCYSTEINE: "Homocysteine",
}


class Provenance(Enum):
    CLINICIAN_ORIGINAL = "clinician_original"
    LLM_BASELINE = "llm_baseline"
    LLM_CONTEXT = "llm_context"
    LLM_CONTEXT_CLINICIAN = "llm_context_clinician"


class TermStatus(Enum):
    PROPOSED = "proposed"
    RETAINED = "retained"
    EXCLUDED = "excluded"


def make_term_id(component: AliComponent, words: tuple[str, ...]) -> str:
    """Stable, URL-safe identifier for a (component, words) pair."""
    return f"{component.value.lower()}:{'-'.join(words)}"


@dataclass(frozen=True)
class SearchTerm:
    """One search phrase bound to an ALI component.

    words is always tokenize(phrase); clinician_original terms are always
    retained (the original roadmap is never subject to adjudication).
    """

    component: AliComponent
    phrase: str
    words: tuple[str, ...]
    provenance: Provenance
    status: TermStatus

    def __post_init__(self) -> None:
        if not self.words:
            raise ValueError(f"term {self.phrase!r} has no words")
        if self.words != tuple(tokenize(self.phrase)):
            raise ValueError(f"words of {self.phrase!r} do not match its tokens")
        if self.provenance is Provenance.CLINICIAN_ORIGINAL and self.status is not TermStatus.RETAINED:
            raise ValueError("clinician_original terms must be retained")

    @classmethod
    def create(
        cls,
        component: AliComponent,
        phrase: str,
        provenance: Provenance = Provenance.CLINICIAN_ORIGINAL,
        status: TermStatus | None = None,
    ) -> "SearchTerm":
        if status is None:
            status = (TermStatus.RETAINED
                      if provenance is Provenance.CLINICIAN_ORIGINAL
                      else TermStatus.PROPOSED)
        return cls(
            component=component,
            phrase=phrase.strip(),
            words=tuple(tokenize(phrase)),
            provenance=provenance,
            status=status,
        )

    @property
    def term_id(self) -> str:
        return make_term_id(self.component, self.words)

    @property
    def key(self) -> tuple[AliComponent, tuple[str, ...]]:
        return (self.component, self.words)


@dataclass
class Roadmap:
    """A named collection of search terms across the ten components."""

    name: str
    terms: list[SearchTerm] = field(default_factory=list)

    def __post_init__(self) -> None:
        seen: set[tuple[AliComponent, tuple[str, ...]]] = set()
        for term in self.terms:
            if term.key in seen:
                raise ValueError(f"duplicate term {term.phrase!r} for {term.component.value}")
            seen.add(term.key)

    def __iter__(self):
        return iter(self.terms)

    def __len__(self) -> int:
        return len(self.terms)

    def terms_for(self, component: AliComponent) -> list[SearchTerm]:
        return [t for t in self.terms if t.component is component]

    def terms_with_status(self, *statuses: TermStatus) -> list[SearchTerm]:
        wanted = set(statuses)
        return [t for t in self.terms if t.status in wanted]

    def retained_terms(self) -> list[SearchTerm]:
        return self.terms_with_status(TermStatus.RETAINED)

    def get(self, term_id: str) -> SearchTerm | None:
        for term in self.terms:
            if term.term_id == term_id:
                return term
        return None

    def record_count(self) -> int:
        """Number of (component, phrase) records."""
        return len(self.terms)

    def phrase_count(self, *statuses: TermStatus) -> int:
        """Number of distinct word sets across components.

        This is the headline "search terms" count: a phrase listed under two
        components (such as Hypertension for both blood pressures) counts once.
        Defaults to retained terms only.
        """
        wanted = set(statuses) if statuses else {TermStatus.RETAINED}
        return len({frozenset(t.words) for t in self.terms if t.status in wanted})

    def with_proposals_retained(self) -> "Roadmap":
        """Copy of this roadmap with every proposed term marked retained.

        Running an un-adjudicated roadmap means treating its proposals as
        active; exclusion only ever happens through adjudication.
        """
        promoted = [
            replace(t, status=TermStatus.RETAINED) if t.status is TermStatus.PROPOSED else t
            for t in self.terms
        ]
        return Roadmap(name=self.name, terms=promoted)


def union_roadmaps(maps: list[Roadmap], name: str) -> Roadmap:
    """Set union of roadmaps keyed by (component, words).

    A term appearing in several inputs keeps the provenance (and status) of
    the earliest input that contains it.
    """
    if not maps:
        raise ValueError("union_roadmaps needs at least one input")
    merged: dict[tuple[AliComponent, tuple[str, ...]], SearchTerm] = {}
    for roadmap in maps:
        for term in roadmap.terms:
            merged.setdefault(term.key, term)
    ordered = sorted(merged.values(), key=_term_sort_key)
    return Roadmap(name=name, terms=ordered)


@dataclass
class RoadmapDiff:
    """Terms added and removed going from roadmap a to roadmap b."""

    added: list[SearchTerm]
    removed: list[SearchTerm]

    def per_component(self) -> dict[AliComponent, tuple[list[SearchTerm], list[SearchTerm]]]:
        result: dict[AliComponent, tuple[list[SearchTerm], list[SearchTerm]]] = {}
        for component in AliComponent:
            added = [t for t in self.added if t.component is component]
            removed = [t for t in self.removed if t.component is component]
            if added or removed:
                result[component] = (added, removed)
        return result


def diff_roadmaps(a: Roadmap, b: Roadmap) -> RoadmapDiff:
    """Partition terms into kept/added/removed by (component, words) key."""
    keys_a = {t.key for t in a.terms}
    keys_b = {t.key for t in b.terms}
    added = sorted((t for t in b.terms if t.key not in keys_a), key=_term_sort_key)
    removed = sorted((t for t in a.terms if t.key not in keys_b), key=_term_sort_key)
    return RoadmapDiff(added=added, removed=removed)


def _term_sort_key(term: SearchTerm) -> tuple[str, tuple[str, ...]]:
    return (term.component.value, term.words)


_COMPONENT_ORDER = {component: i for i, component in enumerate(AliComponent)}


def parse_roadmap(path: str | Path, name: str | None = None) -> Roadmap:
    """Read a roadmap CSV with header (component, phrase, provenance, status).

    provenance and status may be blank; they default to clinician_original
    and its forced retained status. Duplicate (component, words) rows are
    collapsed with a warning, keeping the first.
    """
    file_path = Path(path)
    if not file_path.is_file():
        raise MissingFile(str(file_path))
    terms: dict[tuple[AliComponent, tuple[str, ...]], SearchTerm] = {}
    with open(file_path, newline="", encoding="utf-8") as handle:
        lines = (line for line in handle if not line.startswith("#"))
        reader = csv.DictReader(lines)
        for line_number, row in enumerate(reader, start=2):
            component = AliComponent.parse(row.get("component") or "")
            phrase = (row.get("phrase") or "").strip()
            if not tokenize(phrase):
                raise EmptyPhrase(line_number)
            provenance_text = (row.get("provenance") or "").strip()
            provenance = (Provenance(provenance_text) if provenance_text
                          else Provenance.CLINICIAN_ORIGINAL)
            status_text = (row.get("status") or "").strip()
            status = TermStatus(status_text) if status_text else None
            if provenance is Provenance.CLINICIAN_ORIGINAL and status not in (None, TermStatus.RETAINED):
                logger.warning("line %d: clinician_original term %r forced to retained",
                               line_number, phrase)
                status = TermStatus.RETAINED
            term = SearchTerm.create(component, phrase, provenance, status)
            if term.key in terms:
                logger.warning("line %d: duplicate term %r for %s collapsed",
                               line_number, phrase, component.value)
                continue
            terms[term.key] = term
    return Roadmap(name=name or file_path.stem, terms=list(terms.values()))


def roadmap_csv_text(roadmap: Roadmap) -> str:
    """Roadmap rendered as CSV text, rows in canonical term order."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["component", "phrase", "provenance", "status"])
    for term in sorted(roadmap.terms, key=_term_sort_key):
        writer.writerow([term.component.value, term.phrase,
                         term.provenance.value, term.status.value])
    return out.getvalue()


def serialize_roadmap(roadmap: Roadmap, path: str | Path) -> None:
    """Write a roadmap in the same CSV format parse_roadmap reads."""
    Path(path).write_text(roadmap_csv_text(roadmap), encoding="utf-8")


def roadmap_stats(roadmap: Roadmap) -> dict:
    """Summary counts in the shape used for roadmap comparisons."""
    by_provenance: dict[str, int] = {}
    by_component: dict[str, int] = {}
    for term in roadmap.terms:
        by_provenance[term.provenance.value] = by_provenance.get(term.provenance.value, 0) + 1
        by_component[term.component.value] = by_component.get(term.component.value, 0) + 1
    return {
        "name": roadmap.name,
        "records": roadmap.record_count(),
        "distinct_phrases_retained": roadmap.phrase_count(),
        "distinct_phrases_all": roadmap.phrase_count(*TermStatus),
        "by_provenance": dict(sorted(by_provenance.items())),
        "by_component": dict(sorted(by_component.items())),
    }
