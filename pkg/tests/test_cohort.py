"""Cohort file ingestion, serialization round trips, and the seeded
synthetic generator's internal consistency.
"""

from __future__ import annotations

import filecmp

import pytest

from alirecover.cohort_store import (
    Cohort,
    Patient,
    SimConfig,
    TruthRecord,
    derive_diagnosis_pools,
    ehr_statuses,
    generate_synthetic,
    ingest,
    load_cohort,
    read_truth,
    write_cohort,
    write_truth,
)
from alirecover.errors import (
    DuplicatePatient,
    InvalidConfig,
    OrphanRow,
    SchemaViolation,
)
from alirecover.phenotype import ComponentStatus, Sex, classify
from alirecover.roadmap import AliComponent

H = ComponentStatus.HEALTHY
U = ComponentStatus.UNHEALTHY
M = ComponentStatus.MISSING


def write_files(
    tmp_path,
    patients="patient_id,age,sex,race,ethnicity,engaged\nP1,50,male,White,Not Hispanic or Latino,true\n",
    diagnoses="patient_id,code\nP1,e119\nP1,E11.9\nP1,I10\n",
    readings="patient_id,component,value\nP1,SystolicBP,150\n",
    review=None,
):
    (tmp_path / "patients.csv").write_text(patients)
    (tmp_path / "diagnoses.csv").write_text(diagnoses)
    (tmp_path / "readings.csv").write_text(readings)
    paths = [
        tmp_path / "patients.csv",
        tmp_path / "diagnoses.csv",
        tmp_path / "readings.csv",
    ]
    if review is not None:
        (tmp_path / "review.csv").write_text(review)
        paths.append(tmp_path / "review.csv")
    else:
        paths.append(None)
    return paths


def test_ingest_normalizes_and_dedupes_codes(tmp_path):
    cohort = ingest(*write_files(tmp_path))
    patient = cohort.get("P1")
    # e119 and E11.9 collapse to one dotted code; diagnoses come back sorted
    assert patient.diagnoses == ("E11.9", "I10")
    assert patient.sex is Sex.MALE
    assert patient.engaged is True
    assert patient.reading_map == {AliComponent.SYSTOLIC_BP: 150.0}
    assert patient.chart_review is None


def test_ingest_rejects_wrong_header(tmp_path):
    paths = write_files(tmp_path)
    (tmp_path / "patients.csv").write_text("id,age\nP1,50\n")
    with pytest.raises(SchemaViolation):
        ingest(*paths)


def test_ingest_rejects_orphan_diagnosis(tmp_path):
    paths = write_files(tmp_path, diagnoses="patient_id,code\nP9,I10\n")
    with pytest.raises(OrphanRow):
        ingest(*paths)


def test_ingest_rejects_orphan_reading(tmp_path):
    paths = write_files(
        tmp_path, readings="patient_id,component,value\nP9,BMI,25\n"
    )
    with pytest.raises(OrphanRow):
        ingest(*paths)


def test_ingest_rejects_duplicate_patient(tmp_path):
    paths = write_files(
        tmp_path,
        patients=(
            "patient_id,age,sex,race,ethnicity,engaged\n"
            "P1,50,male,White,x,true\nP1,51,female,White,x,false\n"
        ),
    )
    with pytest.raises(DuplicatePatient):
        ingest(*paths)


@pytest.mark.parametrize(
    "readings",
    [
        "patient_id,component,value\nP1,SystolicBP,abc\n",
        "patient_id,component,value\nP1,SystolicBP,inf\n",
        "patient_id,component,value\nP1,SystolicBP,150\nP1,SystolicBP,151\n",
    ],
)
def test_ingest_rejects_bad_readings(tmp_path, readings):
    paths = write_files(tmp_path, readings=readings)
    with pytest.raises(SchemaViolation):
        ingest(*paths)


def test_ingest_rejects_bad_age(tmp_path):
    paths = write_files(
        tmp_path,
        patients="patient_id,age,sex,race,ethnicity,engaged\nP1,fifty,male,White,x,true\n",
    )
    with pytest.raises(SchemaViolation):
        ingest(*paths)


def test_ingest_review_must_cover_all_components(tmp_path):
    review = "patient_id,component,category\nP1,BMI,healthy\n"
    paths = write_files(tmp_path, review=review)
    with pytest.raises(SchemaViolation):
        ingest(*paths)


def test_ingest_review_accepts_spaced_category(tmp_path):
    rows = ["patient_id,component,category"]
    for component in AliComponent:
        category = "protocol error" if component is AliComponent.CRP else "missing"
        rows.append(f"P1,{component.value},{category}")
    paths = write_files(tmp_path, review="\n".join(rows) + "\n")
    cohort = ingest(*paths)
    assert cohort.get("P1").review_map[AliComponent.CRP] is ComponentStatus.PROTOCOL_ERROR
    assert cohort.n_reviewed == 1


def test_ehr_statuses_hand_cohort(hand_cohort, thresholds):
    p1 = ehr_statuses(hand_cohort.get("P00001"), thresholds)
    assert p1[AliComponent.SYSTOLIC_BP] is U
    assert p1[AliComponent.DIASTOLIC_BP] is H
    assert p1[AliComponent.BMI] is H
    assert sum(1 for s in p1.values() if s is M) == 7
    p2 = ehr_statuses(hand_cohort.get("P00002"), thresholds)
    # 105 clears the female bound of 100
    assert p2[AliComponent.CREATININE_CLEARANCE] is H


def test_cohort_rejects_duplicate_ids(hand_cohort):
    with pytest.raises(DuplicatePatient):
        Cohort(name="dup", patients=hand_cohort.patients + (hand_cohort.patients[0],))


def test_patient_rejects_duplicate_rows(hand_cohort):
    base = hand_cohort.patients[0]
    with pytest.raises(SchemaViolation):
        Patient(
            patient_id="PX",
            age=30,
            sex=Sex.MALE,
            race="White",
            ethnicity="x",
            engaged=True,
            diagnoses=("I10", "I10"),
            readings=(),
        )
    with pytest.raises(SchemaViolation):
        Patient(
            patient_id="PX",
            age=30,
            sex=Sex.MALE,
            race="White",
            ethnicity="x",
            engaged=True,
            diagnoses=(),
            readings=base.readings + base.readings[:1],
        )


def test_write_load_round_trip_is_byte_stable(tmp_path, synth_small):
    first = tmp_path / "first"
    second = tmp_path / "second"
    write_cohort(synth_small.cohort, first)
    reloaded = load_cohort(first, name=synth_small.cohort.name)
    assert reloaded.patients == synth_small.cohort.patients
    write_cohort(reloaded, second)
    for name in ("patients.csv", "diagnoses.csv", "readings.csv", "review.csv"):
        assert filecmp.cmp(first / name, second / name, shallow=False), name


def test_review_file_only_written_when_reviewed(tmp_path, hand_cohort):
    written = write_cohort(hand_cohort, tmp_path / "with_review")
    assert any(p.name == "review.csv" for p in written)
    unreviewed = Cohort(
        name="plain",
        patients=tuple(
            Patient(
                patient_id=p.patient_id,
                age=p.age,
                sex=p.sex,
                race=p.race,
                ethnicity=p.ethnicity,
                engaged=p.engaged,
                diagnoses=p.diagnoses,
                readings=p.readings,
            )
            for p in hand_cohort.patients
        ),
    )
    written = write_cohort(unreviewed, tmp_path / "no_review")
    assert not any(p.name == "review.csv" for p in written)
    assert load_cohort(tmp_path / "no_review").n_reviewed == 0


def test_truth_round_trip(tmp_path, synth_small):
    path = write_truth(synth_small.truth, tmp_path / "truth.csv")
    assert read_truth(path) == synth_small.truth


def test_generator_is_deterministic(diagnosis_pools):
    pools, background = diagnosis_pools
    config = SimConfig(review_count=10)
    a = generate_synthetic(11, 50, config, pools, background)
    b = generate_synthetic(11, 50, config, pools, background)
    assert a == b
    c = generate_synthetic(12, 50, config, pools, background)
    assert c != a


def test_generator_input_validation(diagnosis_pools):
    pools, background = diagnosis_pools
    with pytest.raises(InvalidConfig):
        generate_synthetic(1, 0, SimConfig(), pools, background)
    with pytest.raises(InvalidConfig):
        generate_synthetic(1, 10, SimConfig(), pools, ())


@pytest.mark.parametrize(
    "config",
    [
        SimConfig(male_per_1000=1001),
        SimConfig(truth_unhealthy_per_1000=900, truth_healthy_per_1000=200),
        SimConfig(missing_per_1000=((AliComponent.BMI, 10),)),
        SimConfig(age_bands=((30, 30),)),
        SimConfig(race_weights=(("White", 0),)),
        SimConfig(review_count=-1),
    ],
)
def test_sim_config_validation(config):
    with pytest.raises(InvalidConfig):
        config.validate()


def test_truth_is_consistent_with_cohort(synth_small, thresholds, diagnosis_pools):
    pools, _ = diagnosis_pools
    cohort, truth = synth_small.cohort, synth_small.truth
    assert len(truth) == len(cohort) * 10
    by_cell = {(r.patient_id, r.component): r for r in truth}
    for patient in cohort.patients:
        readings = patient.reading_map
        for component in AliComponent:
            record = by_cell[(patient.patient_id, component)]
            if component in readings:
                # measured cells: EHR status matches the planted reading
                expected = classify(component, readings[component], patient.sex, thresholds)
                assert record.ehr_status is expected
                assert record.true_status is record.ehr_status
            else:
                assert record.ehr_status is M
            assert record.aux_emitted == (record.aux_code is not None)
            if record.aux_code is not None:
                assert record.aux_code in patient.diagnoses
                assert record.aux_code in pools[component]


def test_reviewed_subset_reveals_hidden_truth(synth_small):
    cohort, truth = synth_small.cohort, synth_small.truth
    by_cell = {(r.patient_id, r.component): r for r in truth}
    reviewed = [p for p in cohort.patients if p.chart_review is not None]
    assert len(reviewed) == 100  # review_count=100 over n=100
    for patient in reviewed:
        for component, status in patient.chart_review:
            record = by_cell[(patient.patient_id, component)]
            if record.ehr_status is M:
                assert status is record.true_status
            else:
                assert status is record.ehr_status


def test_review_count_respected(synth_large):
    assert synth_large.cohort.n_reviewed == 100
    assert len(synth_large.cohort) == 1000


def test_every_patient_has_a_diagnosis(synth_small):
    for patient in synth_small.cohort.patients:
        assert len(patient.diagnoses) >= 1
        assert patient.diagnoses == tuple(sorted(patient.diagnoses))


def test_derive_diagnosis_pools_partition(catalog, diagnosis_pools):
    pools, background = diagnosis_pools
    matched_union = set()
    for codes in pools.values():
        assert list(codes) == sorted(codes)
        matched_union.update(codes)
    assert matched_union.isdisjoint(background)
    assert matched_union | set(background) == {e.code for e in catalog.entries}


def test_truth_record_equality():
    a = TruthRecord("P1", AliComponent.BMI, M, U, True, "E66.01")
    b = TruthRecord("P1", AliComponent.BMI, M, U, True, "E66.01")
    assert a == b
