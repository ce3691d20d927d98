"""Component status classification and allostatic load index computation.

Readings are discretized at clinically driven thresholds into Healthy or
Unhealthy. The index is the proportion of unhealthy components among the
non-missing ones; an all-missing patient has no defined index and raises.
"""

from __future__ import annotations

import csv
import enum
import logging
import math
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path

from .errors import (
    AllMissing,
    InvalidConfig,
    MalformedRow,
    MissingFile,
    MissingSexForCreatinine,
    NonFiniteReading,
    SchemaViolation,
)
from .resources import DEFAULT_THRESHOLDS
from .roadmap import AliComponent

COMPONENT_COUNT = 10

logger = logging.getLogger(__name__)


class Sex(enum.Enum):
    MALE = "male"
    FEMALE = "female"

    @classmethod
    def parse(cls, raw: str) -> "Sex":
        text = raw.strip().lower()
        if text in ("m", "male"):
            return cls.MALE
        if text in ("f", "female"):
            return cls.FEMALE
        raise SchemaViolation(f"unrecognized sex value: {raw!r}")


class ComponentStatus(enum.Enum):
    HEALTHY = "healthy"
    UNHEALTHY = "unhealthy"
    MISSING = "missing"
    # assigned only during chart-review ingestion, never by classification
    PROTOCOL_ERROR = "protocol_error"

    @classmethod
    def parse(cls, raw: str) -> "ComponentStatus":
        text = raw.strip().lower().replace(" ", "_").replace("-", "_")
        for status in cls:
            if status.value == text:
                return status
        raise SchemaViolation(f"unrecognized component status: {raw!r}")


_COMPARATORS = {
    "gt": lambda reading, bound: reading > bound,
    "ge": lambda reading, bound: reading >= bound,
    "lt": lambda reading, bound: reading < bound,
    "le": lambda reading, bound: reading <= bound,
}


@dataclass(frozen=True)
class Threshold:
    """One component's cut point. Sex-specific bounds override value."""

    component: AliComponent
    comparator: str
    value: float | None
    male_value: float | None = None
    female_value: float | None = None

    def __post_init__(self) -> None:
        if self.comparator not in _COMPARATORS:
            raise InvalidConfig(f"unknown comparator: {self.comparator!r}")
        if self.sex_specific:
            if self.male_value is None or self.female_value is None:
                raise InvalidConfig(
                    f"{self.component.value}: sex-specific threshold needs both bounds"
                )
        elif self.value is None:
            raise InvalidConfig(f"{self.component.value}: threshold value required")

    @property
    def sex_specific(self) -> bool:
        return self.male_value is not None or self.female_value is not None

    def bound_for(self, sex: Sex | None) -> float:
        if not self.sex_specific:
            assert self.value is not None
            return self.value
        if sex is None:
            raise MissingSexForCreatinine(self.component.value)
        bound = self.male_value if sex is Sex.MALE else self.female_value
        assert bound is not None
        return bound


def load_thresholds(path: str | Path = DEFAULT_THRESHOLDS) -> dict[AliComponent, Threshold]:
    """Read the threshold table; exactly one row per component, all ten present."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(str(path))
    thresholds: dict[AliComponent, Threshold] = {}
    with path.open(newline="", encoding="utf-8") as handle:
        rows = [r for r in csv.reader(handle) if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise InvalidConfig(f"{path}: empty threshold file")
    header = [cell.strip() for cell in rows[0]]
    expected = ["component", "comparator", "value", "male_value", "female_value"]
    if header != expected:
        raise InvalidConfig(f"{path}: expected header {expected}, got {header}")
    for line_number, row in enumerate(rows[1:], start=2):
        if len(row) != len(expected):
            raise MalformedRow(line_number, f"expected {len(expected)} columns")
        component = AliComponent.parse(row[0])
        if component in thresholds:
            raise InvalidConfig(f"{path}: duplicate threshold for {component.value}")

        def number(cell: str) -> float | None:
            cell = cell.strip()
            return float(cell) if cell else None

        thresholds[component] = Threshold(
            component=component,
            comparator=row[1].strip(),
            value=number(row[2]),
            male_value=number(row[3]),
            female_value=number(row[4]),
        )
    missing = [c.value for c in AliComponent if c not in thresholds]
    if missing:
        raise InvalidConfig(f"{path}: no threshold for {', '.join(missing)}")
    albumin = thresholds[AliComponent.SERUM_ALBUMIN]
    if albumin.comparator in ("gt", "ge"):
        # flag-high albumin is the inverted direction the default file ships;
        # keep it loud so overrides are a conscious choice
        logger.warning(
            "SerumAlbumin threshold flags high values unhealthy (%s %s); "
            "low albumin is the clinically adverse side",
            albumin.comparator,
            albumin.value,
        )
    return thresholds


def classify(
    component: AliComponent,
    reading: float,
    sex: Sex | None = None,
    thresholds: Mapping[AliComponent, Threshold] | None = None,
) -> ComponentStatus:
    """Healthy or Unhealthy for a finite reading at the component's threshold."""
    if not math.isfinite(reading):
        raise NonFiniteReading(f"{component.value}: {reading!r}")
    if thresholds is None:
        thresholds = _default_thresholds()
    threshold = thresholds[component]
    bound = threshold.bound_for(sex if threshold.sex_specific else None)
    unhealthy = _COMPARATORS[threshold.comparator](reading, bound)
    return ComponentStatus.UNHEALTHY if unhealthy else ComponentStatus.HEALTHY


_DEFAULT_CACHE: dict[AliComponent, Threshold] | None = None


def _default_thresholds() -> dict[AliComponent, Threshold]:
    global _DEFAULT_CACHE
    if _DEFAULT_CACHE is None:
        _DEFAULT_CACHE = load_thresholds(DEFAULT_THRESHOLDS)
    return _DEFAULT_CACHE


@dataclass(frozen=True)
class AliValue:
    """Unhealthy count over non-missing count, with both counts kept."""

    numerator: int
    denominator: int

    def __post_init__(self) -> None:
        if self.denominator < 1:
            raise AllMissing("no non-missing components")
        if not 0 <= self.numerator <= self.denominator:
            raise SchemaViolation(
                f"inconsistent index counts: {self.numerator}/{self.denominator}"
            )

    @property
    def value(self) -> float:
        return self.numerator / self.denominator


def compute_ali(statuses: Mapping[AliComponent, ComponentStatus]) -> AliValue:
    """Index over exactly ten component statuses.

    ProtocolError is not a valid input here; remap it to Missing first (the
    analysis module owns that step).
    """
    if set(statuses) != set(AliComponent):
        raise SchemaViolation(
            f"expected statuses for all {COMPONENT_COUNT} components, "
            f"got {len(statuses)}"
        )
    numerator = 0
    denominator = 0
    for component, status in statuses.items():
        if status is ComponentStatus.PROTOCOL_ERROR:
            raise SchemaViolation(
                f"{component.value}: protocol_error must be remapped before "
                "index computation"
            )
        if status is ComponentStatus.MISSING:
            continue
        denominator += 1
        if status is ComponentStatus.UNHEALTHY:
            numerator += 1
    return AliValue(numerator=numerator, denominator=denominator)
