"""Recover missing allostatic load index components from ICD-10 diagnoses.

The toolkit matches roadmap search terms against an ICD-10 catalog, flips
missing biomarker components to unhealthy when a patient carries a matched
diagnosis, expands roadmaps with an LLM under clinician adjudication, and
compares the resulting index distributions and regressions across sources.
"""

__version__ = "0.1.0"

from .errors import AliRecoverError
from .icd_catalog import Catalog, IcdEntry, code_key, load_catalog, normalize_code, tokenize
from .matcher import MatchResult, MatchSummary, match_roadmap, match_term
from .phenotype import (
    AliValue,
    ComponentStatus,
    Sex,
    Threshold,
    classify,
    compute_ali,
    load_thresholds,
)
from .roadmap import (
    AliComponent,
    Provenance,
    Roadmap,
    SearchTerm,
    TermStatus,
    diff_roadmaps,
    parse_roadmap,
    serialize_roadmap,
    union_roadmaps,
)

__all__ = [
    "AliComponent",
    "AliRecoverError",
    "AliValue",
    "Catalog",
    "ComponentStatus",
    "IcdEntry",
    "MatchResult",
    "MatchSummary",
    "Provenance",
    "Roadmap",
    "SearchTerm",
    "Sex",
    "TermStatus",
    "Threshold",
    "__version__",
    "classify",
    "code_key",
    "compute_ali",
    "diff_roadmaps",
    "load_catalog",
    "load_thresholds",
    "match_roadmap",
    "match_term",
    "normalize_code",
    "parse_roadmap",
    "serialize_roadmap",
    "tokenize",
    "union_roadmaps",
]
