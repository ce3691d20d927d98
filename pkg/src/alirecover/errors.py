"""Exception types raised across the package.

Everything inherits from AliRecoverError so callers (and the CLI) can catch
validation problems in one place.
"""


class AliRecoverError(Exception):
    """Base class for all package-specific errors."""


class MissingFile(AliRecoverError):
    """A required input file does not exist."""


class MalformedRow(AliRecoverError):
    """An input row cannot be parsed."""

    def __init__(self, line: int, detail: str = ""):
        self.line = line
        suffix = f": {detail}" if detail else ""
        super().__init__(f"malformed row at line {line}{suffix}")


class DuplicateCode(AliRecoverError):
    """Two catalog entries normalize to the same ICD-10 code."""

    def __init__(self, code: str):
        self.code = code
        super().__init__(f"duplicate ICD-10 code: {code}")


class EmptyCode(AliRecoverError):
    """An ICD-10 code is empty after trimming."""


class UnknownComponent(AliRecoverError):
    """A name does not match any of the ten ALI components."""

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown ALI component: {name!r}")


class EmptyPhrase(AliRecoverError):
    """A roadmap row has no phrase text."""

    def __init__(self, line: int):
        self.line = line
        super().__init__(f"empty search phrase at line {line}")


class EmptyTerm(AliRecoverError):
    """A search term has no words to match on."""


class NonFiniteReading(AliRecoverError):
    """A biomarker reading is NaN or infinite."""


class MissingSexForCreatinine(AliRecoverError):
    """Creatinine clearance was classified without a patient sex."""


class AllMissing(AliRecoverError):
    """All ten components are missing, so the ALI is undefined."""


class SchemaViolation(AliRecoverError):
    """A cohort file does not conform to its declared schema."""


class OrphanRow(AliRecoverError):
    """A child-file row references a patient id absent from patients.csv."""

    def __init__(self, patient_id: str, source: str):
        self.patient_id = patient_id
        super().__init__(f"{source} references unknown patient {patient_id!r}")


class DuplicatePatient(AliRecoverError):
    """Two patients.csv rows share the same patient id."""

    def __init__(self, patient_id: str):
        self.patient_id = patient_id
        super().__init__(f"duplicate patient id: {patient_id!r}")


class InvalidConfig(AliRecoverError):
    """A generator or pipeline configuration value is out of range."""


class MissingOriginalRoadmap(AliRecoverError):
    """Context-mode prompting requires the original roadmap for examples."""


class EndpointUnreachable(AliRecoverError):
    """The LLM endpoint could not be reached within the retry budget."""


class AllRunsUnparseable(AliRecoverError):
    """No enhancement run produced a single parseable term."""


class UnknownTerm(AliRecoverError):
    """A decision references a term id that is not in the review queue."""

    def __init__(self, term_id: str):
        self.term_id = term_id
        super().__init__(f"unknown term id: {term_id!r}")


class InvalidVerdict(AliRecoverError):
    """A decision verdict is neither approve nor reject."""

    def __init__(self, verdict: str):
        self.verdict = verdict
        super().__init__(f"invalid verdict: {verdict!r} (expected approve or reject)")


class Separation(AliRecoverError):
    """Logistic regression diverged; the data are (quasi-)separated."""


class DegenerateOutcome(AliRecoverError):
    """The regression outcome has fewer than two distinct values."""


class SourceMismatch(AliRecoverError):
    """Analysis sources do not cover the same set of patients."""
