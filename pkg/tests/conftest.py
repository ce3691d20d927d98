"""Shared fixtures: bundled catalog and roadmap, seeded synthetic cohorts,
and a three-patient cohort small enough to check by hand.
"""

from __future__ import annotations

from pathlib import Path

import pytest

from alirecover.cohort_store import (
    Cohort,
    Patient,
    SimConfig,
    SyntheticCohort,
    derive_diagnosis_pools,
    generate_synthetic,
)
from alirecover.icd_catalog import Catalog, load_catalog
from alirecover.matcher import match_roadmap
from alirecover.phenotype import ComponentStatus, Sex, Threshold, load_thresholds
from alirecover.recovery import build_component_matches
from alirecover.resources import DEMO_CATALOG, ORIGINAL_ROADMAP
from alirecover.roadmap import AliComponent, Roadmap, parse_roadmap

FIXTURES_DIR = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def catalog() -> Catalog:
    return load_catalog(DEMO_CATALOG)


@pytest.fixture(scope="session")
def original_roadmap() -> Roadmap:
    return parse_roadmap(ORIGINAL_ROADMAP)


@pytest.fixture(scope="session")
def thresholds() -> dict[AliComponent, Threshold]:
    return load_thresholds()


@pytest.fixture(scope="session")
def diagnosis_pools(catalog, original_roadmap):
    """(aux pools, background pool) derived from the bundled catalog/roadmap."""
    results, _ = match_roadmap(original_roadmap, catalog)
    matches = build_component_matches(results, original_roadmap)
    return derive_diagnosis_pools(
        catalog, {component: per_code.keys() for component, per_code in matches.items()}
    )


@pytest.fixture(scope="session")
def synth_small(diagnosis_pools) -> SyntheticCohort:
    """Seed-7 cohort of 100, every patient chart reviewed."""
    pools, background = diagnosis_pools
    return generate_synthetic(
        7, 100, SimConfig(review_count=100), pools, background, name="synthetic_7"
    )


@pytest.fixture(scope="session")
def synth_large(diagnosis_pools) -> SyntheticCohort:
    """Seed-7 cohort of 1000 with the default 100-patient review subset."""
    pools, background = diagnosis_pools
    return generate_synthetic(
        7, 1000, SimConfig(review_count=100), pools, background, name="synthetic_7"
    )


@pytest.fixture(scope="session")
def transcripts_dir() -> Path:
    return FIXTURES_DIR / "llm_transcripts"


def make_hand_cohort() -> Cohort:
    """Three patients with hand-computed statuses.

    P00001: male, measured SBP 150 (unhealthy), DBP 80, BMI 25 (healthy);
            carries I10 and E11.9, so recovery flips HbA1c only.
    P00002: female, measured CreatinineClearance 105 (healthy for a female,
            would be unhealthy for a male); carries I87.2 and A41.9, so
            recovery flips CRP, and CreatinineClearance stays measured.
    P00003: no readings at all (index undefined pre-recovery); carries
            P96.0, so recovery flips CreatinineClearance. Chart reviewed:
            Homocysteine unhealthy, CRP protocol error, the rest missing.
    """
    p1 = Patient(
        patient_id="P00001",
        age=50,
        sex=Sex.MALE,
        race="White",
        ethnicity="Not Hispanic or Latino",
        engaged=True,
        diagnoses=("E11.9", "I10"),
        readings=(
            (AliComponent.SYSTOLIC_BP, 150.0),
            (AliComponent.DIASTOLIC_BP, 80.0),
            (AliComponent.BMI, 25.0),
        ),
        chart_review=None,
    )
    p2 = Patient(
        patient_id="P00002",
        age=61,
        sex=Sex.FEMALE,
        race="Black",
        ethnicity="Not Hispanic or Latino",
        engaged=False,
        diagnoses=("A41.9", "I87.2"),
        readings=((AliComponent.CREATININE_CLEARANCE, 105.0),),
        chart_review=None,
    )
    review = tuple(
        (component, ComponentStatus.MISSING)
        for component in AliComponent
        if component is not AliComponent.HOMOCYSTEINE
    ) + ((AliComponent.HOMOCYSTEINE, ComponentStatus.UNHEALTHY),)
    review = tuple(
        (c, ComponentStatus.PROTOCOL_ERROR if c is AliComponent.CRP else s)
        for c, s in review
    )
    p3 = Patient(
        patient_id="P00003",
        age=44,
        sex=Sex.MALE,
        race="Other",
        ethnicity="Hispanic or Latino",
        engaged=True,
        diagnoses=("P96.0",),
        readings=(),
        chart_review=review,
    )
    return Cohort(name="hand", patients=(p1, p2, p3))


@pytest.fixture()
def hand_cohort() -> Cohort:
    return make_hand_cohort()
