"""Comparison analyses across status sources.

A "source" is one way of assigning the ten component statuses to every
patient: the raw EHR extract, chart review, or recovery under some roadmap.
This module does the four-way data-point accounting, missingness summaries,
paired index export for external smoothing plots, and the naive-versus-
augmented logistic regression.
"""

from __future__ import annotations

import csv
import json
import math
import random
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cohort_store import Cohort, ehr_statuses
from .errors import (
    AllMissing,
    DegenerateOutcome,
    SchemaViolation,
    Separation,
    SourceMismatch,
)
from .phenotype import AliValue, ComponentStatus, Threshold, compute_ali
from .recovery import CohortRecovery
from .roadmap import AliComponent

# per-patient component statuses, keyed by patient id
Source = Mapping[str, Mapping[AliComponent, ComponentStatus]]

EHR_SOURCE = "ehr"


def remap_protocol_errors(
    statuses: Mapping[AliComponent, ComponentStatus],
) -> dict[AliComponent, ComponentStatus]:
    """ProtocolError becomes Missing; everything else passes through.

    Chart reviewers flag cells that violate measurement protocol; those cells
    carry no usable value, so comparisons treat them as missing. Idempotent.
    """
    return {
        component: (
            ComponentStatus.MISSING
            if status is ComponentStatus.PROTOCOL_ERROR
            else status
        )
        for component, status in statuses.items()
    }


def source_from_ehr(
    cohort: Cohort, thresholds: Mapping[AliComponent, Threshold] | None = None
) -> dict[str, dict[AliComponent, ComponentStatus]]:
    return {p.patient_id: ehr_statuses(p, thresholds) for p in cohort.patients}


def source_from_review(
    cohort: Cohort, remap: bool = True
) -> dict[str, dict[AliComponent, ComponentStatus]]:
    """Chart-review statuses for the reviewed subset only."""
    source: dict[str, dict[AliComponent, ComponentStatus]] = {}
    for patient in cohort.patients:
        review = patient.review_map
        if review is None:
            continue
        source[patient.patient_id] = remap_protocol_errors(review) if remap else dict(review)
    return source


def source_from_recovery(recovery: CohortRecovery) -> dict[str, dict[AliComponent, ComponentStatus]]:
    return {pid: dict(statuses) for pid, statuses in recovery.statuses_by_patient.items()}


def restrict_source(source: Source, patient_ids: set[str]) -> dict[str, dict[AliComponent, ComponentStatus]]:
    return {pid: dict(statuses) for pid, statuses in source.items() if pid in patient_ids}


def _check_same_patients(sources: Mapping[str, Source]) -> list[str]:
    names = list(sources)
    if not names:
        raise SourceMismatch("no sources given")
    base_ids = set(sources[names[0]])
    for name in names[1:]:
        if set(sources[name]) != base_ids:
            raise SourceMismatch(
                f"source {name!r} covers different patients than {names[0]!r}"
            )
    return sorted(base_ids)


@dataclass(frozen=True)
class FlowchartCounts:
    """Three-way status partition for one source, plus recovery counts
    relative to the EHR baseline's missing cells."""

    source: str
    healthy: int
    unhealthy: int
    missing: int
    recovered: int
    ehr_missing: int

    @property
    def data_points(self) -> int:
        return self.healthy + self.unhealthy + self.missing

    @property
    def recovered_percent(self) -> float:
        if self.ehr_missing == 0:
            return 0.0
        return 100.0 * self.recovered / self.ehr_missing


def flowchart(
    sources: Mapping[str, Source], baseline: str = EHR_SOURCE
) -> dict[str, FlowchartCounts]:
    """Count Healthy/Unhealthy/Missing per source over the same patients.

    recovered counts cells that are Missing in the baseline source and
    Unhealthy in the given source, the only transition the recovery design
    permits.
    """
    if baseline not in sources:
        raise SourceMismatch(f"baseline source {baseline!r} not supplied")
    patient_ids = _check_same_patients(sources)
    base = sources[baseline]
    ehr_missing = sum(
        1
        for pid in patient_ids
        for component in AliComponent
        if base[pid][component] is ComponentStatus.MISSING
    )
    results: dict[str, FlowchartCounts] = {}
    for name, source in sources.items():
        tally = {status: 0 for status in ComponentStatus}
        recovered = 0
        for pid in patient_ids:
            statuses = source[pid]
            for component in AliComponent:
                status = statuses[component]
                if status is ComponentStatus.PROTOCOL_ERROR:
                    raise SchemaViolation(
                        f"{name}: protocol_error must be remapped before accounting"
                    )
                tally[status] += 1
                if (
                    base[pid][component] is ComponentStatus.MISSING
                    and status is ComponentStatus.UNHEALTHY
                ):
                    recovered += 1
        results[name] = FlowchartCounts(
            source=name,
            healthy=tally[ComponentStatus.HEALTHY],
            unhealthy=tally[ComponentStatus.UNHEALTHY],
            missing=tally[ComponentStatus.MISSING],
            recovered=recovered,
            ehr_missing=ehr_missing,
        )
    return results


def quantiles(values: Sequence[float]) -> tuple[float, float, float]:
    """(q1, median, q3) with linear interpolation between order statistics."""
    if not values:
        raise ValueError("no values to summarize")
    q1, q2, q3 = np.percentile(np.asarray(values, dtype=float), [25, 50, 75])
    return float(q1), float(q2), float(q3)


@dataclass(frozen=True)
class MissingnessProfile:
    source: str
    non_missing_per_patient: dict[str, int]
    missing_per_component: dict[AliComponent, int]
    non_missing_quartiles: tuple[float, float, float]
    missing_quartiles: tuple[float, float, float]


def missingness_profiles(sources: Mapping[str, Source]) -> dict[str, MissingnessProfile]:
    patient_ids = _check_same_patients(sources)
    profiles: dict[str, MissingnessProfile] = {}
    for name, source in sources.items():
        per_patient: dict[str, int] = {}
        per_component = {component: 0 for component in AliComponent}
        for pid in patient_ids:
            statuses = source[pid]
            missing = 0
            for component in AliComponent:
                if statuses[component] is ComponentStatus.MISSING:
                    missing += 1
                    per_component[component] += 1
            per_patient[pid] = len(AliComponent) - missing
        missing_counts = [len(AliComponent) - v for v in per_patient.values()]
        profiles[name] = MissingnessProfile(
            source=name,
            non_missing_per_patient=per_patient,
            missing_per_component=per_component,
            non_missing_quartiles=quantiles(list(per_patient.values())),
            missing_quartiles=quantiles(missing_counts),
        )
    return profiles


def ali_by_patient(source: Source) -> tuple[dict[str, AliValue], list[str]]:
    """Index per patient; all-missing patients are skipped and listed."""
    values: dict[str, AliValue] = {}
    undefined: list[str] = []
    for pid in sorted(source):
        try:
            values[pid] = compute_ali(source[pid])
        except AllMissing:
            undefined.append(pid)
    return values, undefined


@dataclass(frozen=True)
class AliPairs:
    source_a: str
    source_b: str
    rows: tuple[tuple[str, float, float], ...]
    excluded_patients: tuple[str, ...]


def ali_pairs(sources: Mapping[str, Source], source_a: str, source_b: str) -> AliPairs:
    """Paired per-patient index values for plotting one source against another.

    Patients with no defined index on either side are excluded and reported,
    never silently dropped.
    """
    for name in (source_a, source_b):
        if name not in sources:
            raise SourceMismatch(f"source {name!r} not supplied")
    _check_same_patients({source_a: sources[source_a], source_b: sources[source_b]})
    a_values, a_undefined = ali_by_patient(sources[source_a])
    b_values, b_undefined = ali_by_patient(sources[source_b])
    excluded = sorted(set(a_undefined) | set(b_undefined))
    rows = tuple(
        (pid, a_values[pid].value, b_values[pid].value)
        for pid in sorted(a_values)
        if pid in b_values
    )
    return AliPairs(
        source_a=source_a,
        source_b=source_b,
        rows=rows,
        excluded_patients=tuple(excluded),
    )


# --- logistic regression -----------------------------------------------------


@dataclass(frozen=True)
class RegressionFit:
    coefficients: tuple[float, float]  # (intercept, slope)
    standard_errors: tuple[float, float]
    conf_intervals: tuple[tuple[float, float], tuple[float, float]]
    odds_ratios: tuple[float, float]
    iterations: int
    gradient_norm: float  # scaled by N at the optimum
    log_likelihood: float
    log_likelihood_trace: tuple[float, ...]

    def to_json(self) -> dict:
        return {
            "intercept": self.coefficients[0],
            "slope": self.coefficients[1],
            "se_intercept": self.standard_errors[0],
            "se_slope": self.standard_errors[1],
            "ci_intercept": list(self.conf_intervals[0]),
            "ci_slope": list(self.conf_intervals[1]),
            "or_intercept": self.odds_ratios[0],
            "or_slope": self.odds_ratios[1],
            "iterations": self.iterations,
            "gradient_norm": self.gradient_norm,
            "log_likelihood": self.log_likelihood,
        }


def _log_likelihood(eta: np.ndarray, y: np.ndarray) -> float:
    # y*eta - log(1 + exp(eta)), computed without overflow
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def fit_logistic(
    outcome: Sequence[bool | int],
    predictor: Sequence[float],
    max_iterations: int = 50,
    tolerance: float = 1e-10,
) -> RegressionFit:
    """Maximum-likelihood simple logistic regression by IRLS.

    Convergence: scaled score norm below tolerance within the iteration cap.
    Step halving keeps the log-likelihood non-decreasing. Diverging
    coefficients or a singular information matrix raise Separation instead of
    returning garbage; a constant outcome raises DegenerateOutcome.
    """
    y = np.asarray([1.0 if v else 0.0 for v in outcome], dtype=float)
    x = np.asarray(predictor, dtype=float)
    if y.shape != x.shape or y.ndim != 1:
        raise SchemaViolation("outcome and predictor must be equal-length vectors")
    n = y.size
    if n < 2 or len(np.unique(y)) < 2:
        raise DegenerateOutcome("outcome must contain both classes")
    if not np.all(np.isfinite(x)):
        raise SchemaViolation("predictor contains non-finite values")

    design = np.column_stack([np.ones(n), x])
    beta = np.zeros(2)
    eta = design @ beta
    ll = _log_likelihood(eta, y)
    trace = [ll]
    iterations = 0
    while True:
        mu = 1.0 / (1.0 + np.exp(-eta))
        gradient = design.T @ (y - mu)
        gradient_norm = float(np.linalg.norm(gradient)) / n
        if gradient_norm < tolerance or iterations >= max_iterations:
            break
        weights = mu * (1.0 - mu)
        information = design.T @ (design * weights[:, None])
        try:
            delta = np.linalg.solve(information, gradient)
        except np.linalg.LinAlgError as exc:
            raise Separation("information matrix is singular") from exc
        step = 1.0
        for _ in range(30):
            candidate_ll = _log_likelihood(design @ (beta + step * delta), y)
            if candidate_ll >= ll - 1e-12:
                break
            step /= 2.0
        beta = beta + step * delta
        eta = design @ beta
        ll = _log_likelihood(eta, y)
        trace.append(ll)
        iterations += 1
        if np.max(np.abs(beta)) > 30.0:
            raise Separation(
                f"coefficients diverging (|beta| > 30) at iteration {iterations}"
            )

    weights = mu * (1.0 - mu)
    information = design.T @ (design * weights[:, None])
    covariance = np.linalg.inv(information)
    se = np.sqrt(np.diag(covariance))
    coefficients = (float(beta[0]), float(beta[1]))
    standard_errors = (float(se[0]), float(se[1]))
    conf = tuple(
        (c - 1.96 * s, c + 1.96 * s)
        for c, s in zip(coefficients, standard_errors)
    )
    return RegressionFit(
        coefficients=coefficients,
        standard_errors=standard_errors,
        conf_intervals=(conf[0], conf[1]),
        odds_ratios=(math.exp(coefficients[0]), math.exp(coefficients[1])),
        iterations=iterations,
        gradient_norm=gradient_norm,
        log_likelihood=ll,
        log_likelihood_trace=tuple(trace),
    )


def simulate_logistic_outcomes(
    seed: int, n: int, intercept: float, slope: float
) -> tuple[list[float], list[int]]:
    """Draw (predictor, outcome) pairs from a known logistic model.

    Predictors sit on a 0.01 grid in [0, 1] (the index scale) and the
    Bernoulli draw uses integer thresholds, so results are platform-stable.
    """
    rng = random.Random(seed)
    xs: list[float] = []
    ys: list[int] = []
    for _ in range(n):
        x = rng.randrange(101) / 100.0
        p = 1.0 / (1.0 + math.exp(-(intercept + slope * x)))
        ys.append(1 if rng.randrange(1_000_000) < round(p * 1_000_000) else 0)
        xs.append(x)
    return xs, ys


# --- file outputs -------------------------------------------------------------


def write_flowchart(counts: Mapping[str, FlowchartCounts], path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow([
            "source", "healthy", "unhealthy", "missing",
            "recovered", "ehr_missing", "recovered_percent",
        ])
        for name in sorted(counts):
            c = counts[name]
            writer.writerow([
                c.source, c.healthy, c.unhealthy, c.missing,
                c.recovered, c.ehr_missing, f"{c.recovered_percent:.4f}",
            ])
    return path


def write_missingness(
    profiles: Mapping[str, MissingnessProfile], path: str | Path
) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["source", "component", "missing_count"])
        for name in sorted(profiles):
            profile = profiles[name]
            for component in AliComponent:
                writer.writerow([
                    name, component.value, profile.missing_per_component[component],
                ])
    return path


def write_ali_pairs(pairs: AliPairs, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["patient_id", f"ali_{pairs.source_a}", f"ali_{pairs.source_b}"])
        for pid, a, b in pairs.rows:
            writer.writerow([pid, repr(a), repr(b)])
    return path


def write_regression(fit: RegressionFit, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(fit.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
