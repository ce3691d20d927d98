"""Patient cohort ingestion, serialization, and seeded synthetic generation.

A cohort is four delimited files joined on patient_id: demographics,
diagnosis codes, biomarker readings, and (optionally) chart-review statuses.
The synthetic generator plants a hidden ground truth per cell so that
recovery sensitivity and specificity can be measured at desk scale.
"""

from __future__ import annotations

import csv
import math
import random
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

from .errors import (
    DuplicatePatient,
    InvalidConfig,
    MissingFile,
    OrphanRow,
    SchemaViolation,
)
from .icd_catalog import Catalog, normalize_code
from .phenotype import ComponentStatus, Sex, Threshold, classify
from .roadmap import AliComponent

PATIENTS_FILE = "patients.csv"
DIAGNOSES_FILE = "diagnoses.csv"
READINGS_FILE = "readings.csv"
REVIEW_FILE = "review.csv"
TRUTH_FILE = "truth.csv"

_COMPONENT_ORDER = tuple(AliComponent)


@dataclass(frozen=True, eq=True)
class Patient:
    patient_id: str
    age: int
    sex: Sex
    race: str
    ethnicity: str
    engaged: bool
    diagnoses: tuple[str, ...]
    readings: tuple[tuple[AliComponent, float], ...]
    chart_review: tuple[tuple[AliComponent, ComponentStatus], ...] | None = None

    def __post_init__(self) -> None:
        if len(set(self.diagnoses)) != len(self.diagnoses):
            raise SchemaViolation(f"{self.patient_id}: duplicate diagnoses")
        for pairs in (self.readings, self.chart_review or ()):
            components = [component for component, _ in pairs]
            if len(set(components)) != len(components):
                raise SchemaViolation(f"{self.patient_id}: duplicate component rows")

    @property
    def reading_map(self) -> dict[AliComponent, float]:
        return dict(self.readings)

    @property
    def review_map(self) -> dict[AliComponent, ComponentStatus] | None:
        return dict(self.chart_review) if self.chart_review is not None else None


@dataclass(frozen=True)
class Cohort:
    name: str
    patients: tuple[Patient, ...]

    def __post_init__(self) -> None:
        ids = [p.patient_id for p in self.patients]
        seen: set[str] = set()
        for pid in ids:
            if pid in seen:
                raise DuplicatePatient(pid)
            seen.add(pid)

    def __len__(self) -> int:
        return len(self.patients)

    @property
    def n_reviewed(self) -> int:
        return sum(1 for p in self.patients if p.chart_review is not None)

    def get(self, patient_id: str) -> Patient:
        for patient in self.patients:
            if patient.patient_id == patient_id:
                return patient
        raise KeyError(patient_id)

    @property
    def all_diagnosis_codes(self) -> set[str]:
        codes: set[str] = set()
        for patient in self.patients:
            codes.update(patient.diagnoses)
        return codes


def ehr_statuses(
    patient: Patient,
    thresholds: Mapping[AliComponent, Threshold] | None = None,
) -> dict[AliComponent, ComponentStatus]:
    """Classify the patient's recorded readings; absent readings are Missing."""
    readings = patient.reading_map
    statuses: dict[AliComponent, ComponentStatus] = {}
    for component in _COMPONENT_ORDER:
        if component in readings:
            statuses[component] = classify(
                component, readings[component], patient.sex, thresholds
            )
        else:
            statuses[component] = ComponentStatus.MISSING
    return statuses


def _read_rows(path: Path, expected_header: list[str]) -> list[dict[str, str]]:
    if not path.is_file():
        raise MissingFile(str(path))
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != expected_header:
            raise SchemaViolation(
                f"{path}: expected header {expected_header}, got {reader.fieldnames}"
            )
        return list(reader)


def _parse_bool(raw: str, context: str) -> bool:
    text = raw.strip().lower()
    if text in ("true", "1", "yes"):
        return True
    if text in ("false", "0", "no"):
        return False
    raise SchemaViolation(f"{context}: unrecognized boolean {raw!r}")


def ingest(
    patients_csv: str | Path,
    diagnoses_csv: str | Path,
    readings_csv: str | Path,
    review_csv: str | Path | None = None,
    name: str = "cohort",
) -> Cohort:
    """Join and validate the cohort files.

    Child rows referencing unknown patients are rejected (OrphanRow), repeated
    patient ids are rejected (DuplicatePatient), and diagnosis codes are
    normalized and de-duplicated per patient.
    """
    demo_rows = _read_rows(
        Path(patients_csv),
        ["patient_id", "age", "sex", "race", "ethnicity", "engaged"],
    )
    order: list[str] = []
    demographics: dict[str, dict[str, str]] = {}
    for row in demo_rows:
        pid = row["patient_id"].strip()
        if not pid:
            raise SchemaViolation(f"{patients_csv}: empty patient_id")
        if pid in demographics:
            raise DuplicatePatient(pid)
        demographics[pid] = row
        order.append(pid)

    diagnoses: dict[str, set[str]] = {pid: set() for pid in order}
    for row in _read_rows(Path(diagnoses_csv), ["patient_id", "code"]):
        pid = row["patient_id"].strip()
        if pid not in demographics:
            raise OrphanRow(pid, str(diagnoses_csv))
        diagnoses[pid].add(normalize_code(row["code"]))

    readings: dict[str, dict[AliComponent, float]] = {pid: {} for pid in order}
    for row in _read_rows(Path(readings_csv), ["patient_id", "component", "value"]):
        pid = row["patient_id"].strip()
        if pid not in demographics:
            raise OrphanRow(pid, str(readings_csv))
        component = AliComponent.parse(row["component"])
        if component in readings[pid]:
            raise SchemaViolation(f"{pid}: duplicate reading for {component.value}")
        try:
            value = float(row["value"])
        except ValueError as exc:
            raise SchemaViolation(f"{pid}: bad reading value {row['value']!r}") from exc
        if not math.isfinite(value):
            raise SchemaViolation(f"{pid}: non-finite reading for {component.value}")
        readings[pid][component] = value

    reviews: dict[str, dict[AliComponent, ComponentStatus]] = {}
    if review_csv is not None:
        for row in _read_rows(Path(review_csv), ["patient_id", "component", "category"]):
            pid = row["patient_id"].strip()
            if pid not in demographics:
                raise OrphanRow(pid, str(review_csv))
            component = AliComponent.parse(row["component"])
            per_patient = reviews.setdefault(pid, {})
            if component in per_patient:
                raise SchemaViolation(f"{pid}: duplicate review row for {component.value}")
            per_patient[component] = ComponentStatus.parse(row["category"])
        for pid, per_patient in reviews.items():
            if set(per_patient) != set(_COMPONENT_ORDER):
                raise SchemaViolation(
                    f"{pid}: chart review must cover all ten components"
                )

    patients = []
    for pid in order:
        row = demographics[pid]
        try:
            age = int(row["age"])
        except ValueError as exc:
            raise SchemaViolation(f"{pid}: bad age {row['age']!r}") from exc
        review = reviews.get(pid)
        patients.append(Patient(
            patient_id=pid,
            age=age,
            sex=Sex.parse(row["sex"]),
            race=row["race"].strip(),
            ethnicity=row["ethnicity"].strip(),
            engaged=_parse_bool(row["engaged"], pid),
            diagnoses=tuple(sorted(diagnoses[pid])),
            readings=tuple(
                (c, readings[pid][c]) for c in _COMPONENT_ORDER if c in readings[pid]
            ),
            chart_review=tuple(
                (c, review[c]) for c in _COMPONENT_ORDER
            ) if review is not None else None,
        ))
    return Cohort(name=name, patients=tuple(patients))


def load_cohort(directory: str | Path, name: str | None = None) -> Cohort:
    directory = Path(directory)
    review = directory / REVIEW_FILE
    return ingest(
        directory / PATIENTS_FILE,
        directory / DIAGNOSES_FILE,
        directory / READINGS_FILE,
        review if review.is_file() else None,
        name=name or directory.name,
    )


def _format_value(value: float) -> str:
    # repr round-trips exactly and keeps files byte-stable across runs
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def write_cohort(cohort: Cohort, directory: str | Path) -> list[Path]:
    """Serialize a cohort to its four files; review.csv only when present."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    path = directory / PATIENTS_FILE
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["patient_id", "age", "sex", "race", "ethnicity", "engaged"])
        for p in cohort.patients:
            writer.writerow([
                p.patient_id, p.age, p.sex.value, p.race, p.ethnicity,
                "true" if p.engaged else "false",
            ])
    written.append(path)

    path = directory / DIAGNOSES_FILE
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["patient_id", "code"])
        for p in cohort.patients:
            for code in p.diagnoses:
                writer.writerow([p.patient_id, code])
    written.append(path)

    path = directory / READINGS_FILE
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["patient_id", "component", "value"])
        for p in cohort.patients:
            for component, value in p.readings:
                writer.writerow([p.patient_id, component.value, _format_value(value)])
    written.append(path)

    if cohort.n_reviewed:
        path = directory / REVIEW_FILE
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["patient_id", "component", "category"])
            for p in cohort.patients:
                if p.chart_review is None:
                    continue
                for component, status in p.chart_review:
                    writer.writerow([p.patient_id, component.value, status.value])
        written.append(path)
    return written


# --- synthetic generation ---------------------------------------------------


@dataclass(frozen=True)
class TruthRecord:
    """Hidden per-cell ground truth planted by the generator."""

    patient_id: str
    component: AliComponent
    ehr_status: ComponentStatus
    true_status: ComponentStatus
    aux_emitted: bool
    aux_code: str | None


@dataclass(frozen=True)
class SyntheticCohort:
    cohort: Cohort
    truth: tuple[TruthRecord, ...]


@dataclass(frozen=True)
class SimConfig:
    """Generator dials. Probabilities are integer counts per 1000 draws so the
    reproducible path uses randrange only, never floating-point RNG."""

    male_per_1000: int = 395
    engaged_per_1000: int = 318
    race_weights: tuple[tuple[str, int], ...] = (
        ("White", 715),
        ("Black", 181),
        ("Asian Indian", 30),
        ("American Indian or Alaska Native", 6),
        ("Other", 68),
    )
    ethnicity_weights: tuple[tuple[str, int], ...] = (
        ("Not Hispanic or Latino", 934),
        ("Hispanic or Latino", 61),
        ("Refused", 5),
    )
    age_bands: tuple[tuple[int, int], ...] = ((18, 35), (35, 48), (48, 57), (57, 66))
    diagnosis_count_bands: tuple[tuple[int, int], ...] = (
        (1, 16), (16, 30), (30, 48), (48, 121),
    )
    missing_per_1000: tuple[tuple[AliComponent, int], ...] = (
        (AliComponent.SYSTOLIC_BP, 0),
        (AliComponent.DIASTOLIC_BP, 0),
        (AliComponent.BMI, 2),
        (AliComponent.TRIGLYCERIDES, 234),
        (AliComponent.TOTAL_CHOLESTEROL, 235),
        (AliComponent.CRP, 955),
        (AliComponent.HBA1C, 300),
        (AliComponent.SERUM_ALBUMIN, 900),
        (AliComponent.CREATININE_CLEARANCE, 400),
        (AliComponent.HOMOCYSTEINE, 983),
    )
    unhealthy_per_1000: int = 333
    # hidden status of a missing cell, per 1000: remainder stays missing
    truth_unhealthy_per_1000: int = 120
    truth_healthy_per_1000: int = 50
    truth_protocol_error_per_1000: int = 30
    # auxiliary-diagnosis emission odds by cell kind
    aux_unhealthy_missing_per_1000: int = 850
    aux_unhealthy_measured_per_1000: int = 500
    aux_healthy_per_1000: int = 30
    review_count: int = 100

    def validate(self) -> None:
        per_1000 = [
            self.male_per_1000, self.engaged_per_1000, self.unhealthy_per_1000,
            self.truth_unhealthy_per_1000, self.truth_healthy_per_1000,
            self.truth_protocol_error_per_1000,
            self.aux_unhealthy_missing_per_1000,
            self.aux_unhealthy_measured_per_1000, self.aux_healthy_per_1000,
        ] + [p for _, p in self.missing_per_1000]
        if any(not 0 <= p <= 1000 for p in per_1000):
            raise InvalidConfig("per-1000 rates must lie in [0, 1000]")
        truth_total = (
            self.truth_unhealthy_per_1000 + self.truth_healthy_per_1000
            + self.truth_protocol_error_per_1000
        )
        if truth_total > 1000:
            raise InvalidConfig("hidden-status rates exceed 1000 per 1000")
        if {c for c, _ in self.missing_per_1000} != set(_COMPONENT_ORDER):
            raise InvalidConfig("missing rates must cover exactly the ten components")
        for bands in (self.age_bands, self.diagnosis_count_bands):
            if not bands or any(lo >= hi for lo, hi in bands):
                raise InvalidConfig("bands must be non-empty half-open ranges")
        for weights in (self.race_weights, self.ethnicity_weights):
            if not weights or any(w <= 0 for _, w in weights):
                raise InvalidConfig("category weights must be positive")
        if self.review_count < 0:
            raise InvalidConfig("review_count must be non-negative")


# (healthy grid, unhealthy grid) per component: (lo, hi, scale) with hi
# exclusive on the integer lattice; value = (lo + draw) / scale
_GRIDS: dict[AliComponent, tuple[tuple[int, int, int], tuple[int, int, int]]] = {
    AliComponent.SYSTOLIC_BP: ((90, 141, 1), (141, 201, 1)),
    AliComponent.DIASTOLIC_BP: ((50, 91, 1), (91, 131, 1)),
    AliComponent.BMI: ((180, 301, 10), (301, 551, 10)),
    AliComponent.TRIGLYCERIDES: ((50, 150, 1), (150, 601, 1)),
    AliComponent.TOTAL_CHOLESTEROL: ((110, 200, 1), (200, 351, 1)),
    AliComponent.CRP: ((1, 100, 10), (100, 2001, 10)),
    AliComponent.HBA1C: ((40, 65, 10), (65, 141, 10)),
    AliComponent.SERUM_ALBUMIN: ((20, 35, 10), (35, 56, 10)),
    AliComponent.HOMOCYSTEINE: ((50, 501, 10), (501, 1501, 10)),
}
_CREATININE_GRIDS: dict[Sex, tuple[tuple[int, int, int], tuple[int, int, int]]] = {
    Sex.MALE: ((110, 181, 1), (30, 110, 1)),
    Sex.FEMALE: ((100, 181, 1), (30, 100, 1)),
}


def _draw_reading(
    rng: random.Random, component: AliComponent, sex: Sex, unhealthy: bool
) -> float:
    if component is AliComponent.CREATININE_CLEARANCE:
        healthy_grid, unhealthy_grid = _CREATININE_GRIDS[sex]
    else:
        healthy_grid, unhealthy_grid = _GRIDS[component]
    lo, hi, scale = unhealthy_grid if unhealthy else healthy_grid
    return (lo + rng.randrange(hi - lo)) / scale


def _draw_band(rng: random.Random, bands: Sequence[tuple[int, int]]) -> int:
    lo, hi = bands[rng.randrange(len(bands))]
    return lo + rng.randrange(hi - lo)


def _draw_weighted(rng: random.Random, weights: Sequence[tuple[str, int]]) -> str:
    total = sum(w for _, w in weights)
    pick = rng.randrange(total)
    for label, weight in weights:
        if pick < weight:
            return label
        pick -= weight
    raise AssertionError("unreachable")


def derive_diagnosis_pools(
    catalog: Catalog,
    matched_by_component: Mapping[AliComponent, Iterable[str]],
) -> tuple[dict[AliComponent, tuple[str, ...]], tuple[str, ...]]:
    """Split the catalog into per-component auxiliary pools (codes a retained
    term matches) and a background pool (codes no retained term matches)."""
    pools: dict[AliComponent, tuple[str, ...]] = {}
    matched_union: set[str] = set()
    for component in _COMPONENT_ORDER:
        codes = sorted(matched_by_component.get(component, ()))
        pools[component] = tuple(codes)
        matched_union.update(codes)
    background = tuple(
        entry.code for entry in catalog.entries if entry.code not in matched_union
    )
    return pools, background


def generate_synthetic(
    seed: int,
    n: int,
    config: SimConfig,
    aux_pools: Mapping[AliComponent, Sequence[str]],
    background_pool: Sequence[str],
    name: str = "synthetic",
) -> SyntheticCohort:
    """Deterministic cohort with planted recovery ground truth.

    The draw sequence per patient is fixed and documented by the code order
    below; changing it changes every downstream byte, so treat it as part of
    the file format.
    """
    if n < 1:
        raise InvalidConfig("n must be at least 1")
    config.validate()
    if not background_pool:
        raise InvalidConfig("background diagnosis pool is empty")
    rng = random.Random(seed)
    missing_rates = dict(config.missing_per_1000)

    reviewed_count = min(config.review_count, n)
    reviewed_ids: set[int] = set()
    while len(reviewed_ids) < reviewed_count:
        reviewed_ids.add(rng.randrange(n))

    patients: list[Patient] = []
    truth: list[TruthRecord] = []
    for index in range(n):
        patient_id = f"P{index + 1:05d}"
        sex = Sex.MALE if rng.randrange(1000) < config.male_per_1000 else Sex.FEMALE
        age = _draw_band(rng, config.age_bands)
        race = _draw_weighted(rng, config.race_weights)
        ethnicity = _draw_weighted(rng, config.ethnicity_weights)
        engaged = rng.randrange(1000) < config.engaged_per_1000
        target_dx = _draw_band(rng, config.diagnosis_count_bands)

        readings: list[tuple[AliComponent, float]] = []
        review: list[tuple[AliComponent, ComponentStatus]] = []
        aux_codes: list[str] = []
        for component in _COMPONENT_ORDER:
            cell_missing = rng.randrange(1000) < missing_rates[component]
            if not cell_missing:
                unhealthy = rng.randrange(1000) < config.unhealthy_per_1000
                readings.append((
                    component, _draw_reading(rng, component, sex, unhealthy),
                ))
                ehr = ComponentStatus.UNHEALTHY if unhealthy else ComponentStatus.HEALTHY
                true_status = ehr
                aux_rate = (
                    config.aux_unhealthy_measured_per_1000
                    if unhealthy else config.aux_healthy_per_1000
                )
            else:
                ehr = ComponentStatus.MISSING
                pick = rng.randrange(1000)
                if pick < config.truth_unhealthy_per_1000:
                    true_status = ComponentStatus.UNHEALTHY
                    aux_rate = config.aux_unhealthy_missing_per_1000
                elif pick < config.truth_unhealthy_per_1000 + config.truth_healthy_per_1000:
                    true_status = ComponentStatus.HEALTHY
                    aux_rate = config.aux_healthy_per_1000
                elif pick < (
                    config.truth_unhealthy_per_1000 + config.truth_healthy_per_1000
                    + config.truth_protocol_error_per_1000
                ):
                    true_status = ComponentStatus.PROTOCOL_ERROR
                    aux_rate = 0
                else:
                    true_status = ComponentStatus.MISSING
                    aux_rate = 0
            pool = aux_pools.get(component, ())
            aux_code: str | None = None
            if pool and rng.randrange(1000) < aux_rate:
                aux_code = pool[rng.randrange(len(pool))]
                aux_codes.append(aux_code)
            truth.append(TruthRecord(
                patient_id=patient_id,
                component=component,
                ehr_status=ehr,
                true_status=true_status,
                aux_emitted=aux_code is not None,
                aux_code=aux_code,
            ))
            if index in reviewed_ids:
                review.append((component, true_status if cell_missing else ehr))

        codes = set(aux_codes)
        while len(codes) < target_dx:
            codes.add(background_pool[rng.randrange(len(background_pool))])
        patients.append(Patient(
            patient_id=patient_id,
            age=age,
            sex=sex,
            race=race,
            ethnicity=ethnicity,
            engaged=engaged,
            diagnoses=tuple(sorted(normalize_code(c) for c in codes)),
            readings=tuple(readings),
            chart_review=tuple(review) if index in reviewed_ids else None,
        ))
    return SyntheticCohort(
        cohort=Cohort(name=name, patients=tuple(patients)),
        truth=tuple(truth),
    )


def write_truth(truth: Iterable[TruthRecord], path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow([
            "patient_id", "component", "ehr_status", "true_status",
            "aux_emitted", "aux_code",
        ])
        for record in truth:
            writer.writerow([
                record.patient_id,
                record.component.value,
                record.ehr_status.value,
                record.true_status.value,
                "true" if record.aux_emitted else "false",
                record.aux_code or "",
            ])
    return path


def read_truth(path: str | Path) -> tuple[TruthRecord, ...]:
    rows = _read_rows(
        Path(path),
        ["patient_id", "component", "ehr_status", "true_status",
         "aux_emitted", "aux_code"],
    )
    records = []
    for row in rows:
        records.append(TruthRecord(
            patient_id=row["patient_id"],
            component=AliComponent.parse(row["component"]),
            ehr_status=ComponentStatus.parse(row["ehr_status"]),
            true_status=ComponentStatus.parse(row["true_status"]),
            aux_emitted=_parse_bool(row["aux_emitted"], row["patient_id"]),
            aux_code=row["aux_code"] or None,
        ))
    return tuple(records)
