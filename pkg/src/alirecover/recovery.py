"""Missing-data recovery: flip Missing components to Unhealthy on diagnosis
evidence.

A missing component becomes Unhealthy exactly when the patient carries a
diagnosis code matched by a retained roadmap term for that component. Healthy
and Unhealthy statuses are never touched, and recovery never produces
Healthy, so the operation is idempotent and can only raise a patient's index.
"""

from __future__ import annotations

import csv
import logging
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path

from .cohort_store import Cohort, Patient, ehr_statuses
from .icd_catalog import Catalog
from .matcher import MatchResult, match_roadmap
from .phenotype import ComponentStatus, Threshold
from .roadmap import AliComponent, Roadmap

logger = logging.getLogger(__name__)

_COMPONENT_ORDER = {component: i for i, component in enumerate(AliComponent)}

# component → code → term ids whose matches include that code
ComponentMatches = Mapping[AliComponent, Mapping[str, tuple[str, ...]]]


@dataclass(frozen=True)
class RecoveryRecord:
    """Audit record for one recovered cell."""

    patient_id: str
    component: AliComponent
    prior_status: ComponentStatus
    new_status: ComponentStatus
    evidence: tuple[tuple[str, str], ...]  # (code, term_id) pairs

    def __post_init__(self) -> None:
        assert self.prior_status is ComponentStatus.MISSING
        assert self.new_status is ComponentStatus.UNHEALTHY
        assert self.evidence


@dataclass(frozen=True)
class RecoverySummary:
    patients: int
    missing_before: int
    recovered: int
    unknown_diagnosis_codes: int

    @property
    def percent_recovered(self) -> float:
        if self.missing_before == 0:
            return 0.0
        return 100.0 * self.recovered / self.missing_before


@dataclass(frozen=True)
class CohortRecovery:
    statuses_by_patient: dict[str, dict[AliComponent, ComponentStatus]]
    records: tuple[RecoveryRecord, ...]
    summary: RecoverySummary


def build_component_matches(
    match_results: list[MatchResult], roadmap: Roadmap
) -> dict[AliComponent, dict[str, tuple[str, ...]]]:
    """Regroup term-level match results by component and code for recovery."""
    grouped: dict[AliComponent, dict[str, list[str]]] = {}
    for result in match_results:
        term = roadmap.get(result.term_id)
        assert term is not None, result.term_id
        per_code = grouped.setdefault(term.component, {})
        for code in result.matched_codes:
            per_code.setdefault(code, []).append(result.term_id)
    return {
        component: {code: tuple(sorted(ids)) for code, ids in per_code.items()}
        for component, per_code in grouped.items()
    }


def recover_patient(
    patient: Patient,
    statuses: Mapping[AliComponent, ComponentStatus],
    matches: ComponentMatches,
) -> tuple[dict[AliComponent, ComponentStatus], list[RecoveryRecord]]:
    """Apply the recovery rule to one patient.

    Returns the updated statuses (input statuses are not mutated) and the
    audit records, ordered by component.
    """
    updated = dict(statuses)
    records: list[RecoveryRecord] = []
    diagnoses = set(patient.diagnoses)
    for component in AliComponent:
        if statuses[component] is not ComponentStatus.MISSING:
            continue
        per_code = matches.get(component, {})
        evidence = sorted(
            (code, term_id)
            for code in diagnoses & set(per_code)
            for term_id in per_code[code]
        )
        if not evidence:
            continue
        updated[component] = ComponentStatus.UNHEALTHY
        records.append(RecoveryRecord(
            patient_id=patient.patient_id,
            component=component,
            prior_status=ComponentStatus.MISSING,
            new_status=ComponentStatus.UNHEALTHY,
            evidence=tuple(evidence),
        ))
    return updated, records


def recover_cohort(
    cohort: Cohort,
    roadmap: Roadmap,
    catalog: Catalog,
    thresholds: Mapping[AliComponent, Threshold] | None = None,
) -> CohortRecovery:
    """Run recovery over a whole cohort against the roadmap's retained terms.

    Diagnosis codes absent from the catalog never match anything; they are
    counted and logged rather than rejected, since EHR extracts carry retired
    and local codes.
    """
    match_results, _ = match_roadmap(
        roadmap, catalog, sample_codes=cohort.all_diagnosis_codes
    )
    matches = build_component_matches(match_results, roadmap)

    unknown = sum(
        1
        for patient in cohort.patients
        for code in patient.diagnoses
        if code not in catalog
    )
    if unknown:
        logger.warning(
            "%d diagnosis code entries not present in the catalog were ignored",
            unknown,
        )

    statuses_by_patient: dict[str, dict[AliComponent, ComponentStatus]] = {}
    all_records: list[RecoveryRecord] = []
    missing_before = 0
    for patient in cohort.patients:
        before = ehr_statuses(patient, thresholds)
        missing_before += sum(
            1 for status in before.values() if status is ComponentStatus.MISSING
        )
        after, records = recover_patient(patient, before, matches)
        statuses_by_patient[patient.patient_id] = after
        all_records.extend(records)

    all_records.sort(key=lambda r: (r.patient_id, _COMPONENT_ORDER[r.component]))
    return CohortRecovery(
        statuses_by_patient=statuses_by_patient,
        records=tuple(all_records),
        summary=RecoverySummary(
            patients=len(cohort),
            missing_before=missing_before,
            recovered=len(all_records),
            unknown_diagnosis_codes=unknown,
        ),
    )


def write_statuses(
    statuses_by_patient: Mapping[str, Mapping[AliComponent, ComponentStatus]],
    path: str | Path,
    recovered_cells: set[tuple[str, AliComponent]] | None = None,
) -> Path:
    """Write per-cell statuses, flagging cells changed by recovery."""
    recovered_cells = recovered_cells or set()
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["patient_id", "component", "status", "recovered"])
        for patient_id in sorted(statuses_by_patient):
            statuses = statuses_by_patient[patient_id]
            for component in AliComponent:
                writer.writerow([
                    patient_id,
                    component.value,
                    statuses[component].value,
                    "true" if (patient_id, component) in recovered_cells else "false",
                ])
    return path


def write_evidence(records: tuple[RecoveryRecord, ...], path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["patient_id", "component", "code", "term_id"])
        for record in records:
            for code, term_id in record.evidence:
                writer.writerow([
                    record.patient_id, record.component.value, code, term_id,
                ])
    return path
