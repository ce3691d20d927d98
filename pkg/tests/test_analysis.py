"""Source accounting, missingness summaries, paired index export, and the
IRLS logistic regression checked against an independent Newton fit.
"""

from __future__ import annotations

import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from alirecover.analysis import (
    ali_by_patient,
    ali_pairs,
    fit_logistic,
    flowchart,
    missingness_profiles,
    quantiles,
    remap_protocol_errors,
    restrict_source,
    simulate_logistic_outcomes,
    source_from_ehr,
    source_from_recovery,
    source_from_review,
    write_ali_pairs,
    write_flowchart,
    write_missingness,
    write_regression,
)
from alirecover.errors import (
    DegenerateOutcome,
    SchemaViolation,
    Separation,
    SourceMismatch,
)
from alirecover.phenotype import ComponentStatus
from alirecover.recovery import recover_cohort
from alirecover.roadmap import AliComponent

from oracles import count_recovered_cells, newton_logistic

H = ComponentStatus.HEALTHY
U = ComponentStatus.UNHEALTHY
M = ComponentStatus.MISSING
P = ComponentStatus.PROTOCOL_ERROR


status_dict = st.dictionaries(
    keys=st.sampled_from(list(AliComponent)),
    values=st.sampled_from([H, U, M, P]),
    min_size=10,
    max_size=10,
)


@given(status_dict)
def test_remap_protocol_errors_is_idempotent(statuses):
    once = remap_protocol_errors(statuses)
    assert P not in once.values()
    assert remap_protocol_errors(once) == once
    for component, status in statuses.items():
        expected = M if status is P else status
        assert once[component] is expected


def test_source_from_review_remaps_by_default(hand_cohort):
    remapped = source_from_review(hand_cohort)
    assert set(remapped) == {"P00003"}  # only the reviewed patient
    assert remapped["P00003"][AliComponent.CRP] is M
    raw = source_from_review(hand_cohort, remap=False)
    assert raw["P00003"][AliComponent.CRP] is P


def test_flowchart_rejects_unremapped_protocol_errors(hand_cohort, catalog, original_roadmap):
    reviewed_ids = {"P00003"}
    sources = {
        "ehr": restrict_source(source_from_ehr(hand_cohort), reviewed_ids),
        "review": source_from_review(hand_cohort, remap=False),
    }
    with pytest.raises(SchemaViolation):
        flowchart(sources)


def test_flowchart_requires_same_patients(hand_cohort):
    sources = {
        "ehr": source_from_ehr(hand_cohort),
        "review": source_from_review(hand_cohort),
    }
    with pytest.raises(SourceMismatch):
        flowchart(sources)


def test_flowchart_requires_baseline(hand_cohort):
    with pytest.raises(SourceMismatch):
        flowchart({"review": source_from_review(hand_cohort)})


def test_flowchart_partition_and_recount(synth_small, original_roadmap, catalog, thresholds):
    cohort = synth_small.cohort
    recovery = recover_cohort(cohort, original_roadmap, catalog, thresholds)
    sources = {
        "ehr": source_from_ehr(cohort, thresholds),
        "original": source_from_recovery(recovery),
    }
    counts = flowchart(sources)
    for name, c in counts.items():
        assert c.data_points == len(cohort) * 10, name
    # the baseline can never recover relative to itself
    assert counts["ehr"].recovered == 0
    # recovered equals both the recovery records and an independent recount
    assert counts["original"].recovered == len(recovery.records)
    assert counts["original"].recovered == count_recovered_cells(
        sources["ehr"], sources["original"]
    )
    assert counts["original"].ehr_missing == counts["ehr"].missing
    assert counts["original"].recovered_percent == pytest.approx(
        100.0 * len(recovery.records) / counts["ehr"].missing
    )


def test_quantiles_use_linear_interpolation():
    assert quantiles([1, 2, 3, 4]) == (1.75, 2.5, 3.25)
    assert quantiles([5]) == (5.0, 5.0, 5.0)
    assert quantiles([1, 2, 3, 4, 5]) == (2.0, 3.0, 4.0)
    with pytest.raises(ValueError):
        quantiles([])


def test_missingness_profiles(hand_cohort, thresholds):
    source = source_from_ehr(hand_cohort, thresholds)
    profiles = missingness_profiles({"ehr": source})
    profile = profiles["ehr"]
    assert profile.non_missing_per_patient == {
        "P00001": 3,
        "P00002": 1,
        "P00003": 0,
    }
    assert profile.missing_per_component[AliComponent.SYSTOLIC_BP] == 2
    assert profile.missing_per_component[AliComponent.HOMOCYSTEINE] == 3
    assert profile.missing_quartiles == (8.0, 9.0, 9.5)
    assert profile.non_missing_quartiles == (0.5, 1.0, 2.0)


def test_ali_by_patient_skips_undefined(hand_cohort, thresholds):
    values, undefined = ali_by_patient(source_from_ehr(hand_cohort, thresholds))
    assert undefined == ["P00003"]
    assert values["P00001"].numerator == 1 and values["P00001"].denominator == 3
    assert values["P00002"].value == 0.0


def test_ali_pairs(hand_cohort, catalog, original_roadmap, thresholds):
    recovery = recover_cohort(hand_cohort, original_roadmap, catalog, thresholds)
    sources = {
        "ehr": source_from_ehr(hand_cohort, thresholds),
        "original": source_from_recovery(recovery),
    }
    pairs = ali_pairs(sources, "ehr", "original")
    assert pairs.excluded_patients == ("P00003",)  # undefined on the EHR side
    assert pairs.rows == (
        ("P00001", pytest.approx(1 / 3), pytest.approx(2 / 4)),
        ("P00002", 0.0, pytest.approx(1 / 2)),
    )
    with pytest.raises(SourceMismatch):
        ali_pairs(sources, "ehr", "review")


def test_simulate_logistic_outcomes_deterministic():
    xs_a, ys_a = simulate_logistic_outcomes(7, 500, -1.5, 2.0)
    xs_b, ys_b = simulate_logistic_outcomes(7, 500, -1.5, 2.0)
    assert xs_a == xs_b and ys_a == ys_b
    xs_c, _ = simulate_logistic_outcomes(8, 500, -1.5, 2.0)
    assert xs_c != xs_a
    assert all(0.0 <= x <= 1.0 for x in xs_a)
    assert set(ys_a) == {0, 1}


def test_fit_recovers_known_coefficients():
    xs, ys = simulate_logistic_outcomes(42, 1000, -1.5, 2.0)
    fit = fit_logistic(ys, xs)
    for true, estimate, se in zip(
        (-1.5, 2.0), fit.coefficients, fit.standard_errors
    ):
        assert abs(estimate - true) < 3 * se
    assert fit.gradient_norm < 1e-10


def test_fit_agrees_with_newton_oracle():
    xs, ys = simulate_logistic_outcomes(13, 800, -0.5, 1.0)
    fit = fit_logistic(ys, xs)
    b0, b1 = newton_logistic(xs, ys)
    assert fit.coefficients[0] == pytest.approx(b0, abs=1e-8)
    assert fit.coefficients[1] == pytest.approx(b1, abs=1e-8)


def test_fit_reports_wald_intervals_and_odds_ratios():
    xs, ys = simulate_logistic_outcomes(99, 400, 0.3, -0.8)
    fit = fit_logistic(ys, xs)
    for coef, se, (lo, hi), ratio in zip(
        fit.coefficients, fit.standard_errors, fit.conf_intervals, fit.odds_ratios
    ):
        assert lo == pytest.approx(coef - 1.96 * se)
        assert hi == pytest.approx(coef + 1.96 * se)
        assert ratio == pytest.approx(math.exp(coef))


def test_log_likelihood_trace_is_non_decreasing():
    xs, ys = simulate_logistic_outcomes(5, 600, -1.0, 1.5)
    fit = fit_logistic(ys, xs)
    trace = fit.log_likelihood_trace
    assert len(trace) == fit.iterations + 1
    assert all(b >= a - 1e-12 for a, b in zip(trace, trace[1:]))
    assert fit.log_likelihood == trace[-1]


def test_degenerate_outcomes_rejected():
    with pytest.raises(DegenerateOutcome):
        fit_logistic([1, 1, 1, 1], [0.1, 0.2, 0.3, 0.4])
    with pytest.raises(DegenerateOutcome):
        fit_logistic([1], [0.5])


def test_input_validation():
    with pytest.raises(SchemaViolation):
        fit_logistic([0, 1, 1], [0.1, 0.2])
    with pytest.raises(SchemaViolation):
        fit_logistic([0, 1], [0.1, math.nan])


def test_perfect_separation_raises():
    xs = [0.0, 0.1, 0.2, 0.3, 0.7, 0.8, 0.9, 1.0]
    ys = [0, 0, 0, 0, 1, 1, 1, 1]
    with pytest.raises(Separation):
        fit_logistic(ys, xs)


def test_write_flowchart(tmp_path, synth_small, original_roadmap, catalog):
    recovery = recover_cohort(synth_small.cohort, original_roadmap, catalog)
    counts = flowchart({
        "ehr": source_from_ehr(synth_small.cohort),
        "original": source_from_recovery(recovery),
    })
    path = write_flowchart(counts, tmp_path / "flowchart.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "source,healthy,unhealthy,missing,recovered,ehr_missing,recovered_percent"
    assert len(lines) == 3
    assert lines[1].startswith("ehr,")  # sorted by source name


def test_write_missingness(tmp_path, hand_cohort):
    profiles = missingness_profiles({"ehr": source_from_ehr(hand_cohort)})
    path = write_missingness(profiles, tmp_path / "missingness.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "source,component,missing_count"
    assert len(lines) == 11
    assert "ehr,SystolicBP,2" in lines


def test_write_ali_pairs_round_trips_floats(tmp_path, hand_cohort, catalog, original_roadmap):
    recovery = recover_cohort(hand_cohort, original_roadmap, catalog)
    sources = {
        "ehr": source_from_ehr(hand_cohort),
        "original": source_from_recovery(recovery),
    }
    pairs = ali_pairs(sources, "ehr", "original")
    path = write_ali_pairs(pairs, tmp_path / "pairs.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "patient_id,ali_ehr,ali_original"
    pid, a, b = lines[1].split(",")
    assert pid == "P00001"
    assert float(a) == pairs.rows[0][1]
    assert float(b) == pairs.rows[0][2]


def test_write_regression(tmp_path):
    xs, ys = simulate_logistic_outcomes(3, 300, -1.0, 1.0)
    fit = fit_logistic(ys, xs)
    path = write_regression(fit, tmp_path / "fit.json")
    payload = json.loads(path.read_text())
    assert payload["intercept"] == fit.coefficients[0]
    assert payload["iterations"] == fit.iterations
    assert set(payload) == {
        "intercept", "slope", "se_intercept", "se_slope",
        "ci_intercept", "ci_slope", "or_intercept", "or_slope",
        "iterations", "gradient_norm", "log_likelihood",
    }
