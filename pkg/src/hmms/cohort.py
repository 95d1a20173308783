"""Cohort and feature-matrix extraction.

Produces one row per student whose age falls inside the query window,
columns being the requested catalog keys plus the derived features "bmi"
and "immunization_status". Output is deterministic: rows sort by screening
id and every cell renders through one formatting function.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import date, datetime
from pathlib import Path
from typing import TYPE_CHECKING, Any

from .catalog import Cardinality, ParameterCatalog, compute_bmi, format_bmi
from .dates import age_at
from .errors import OutOfRange, OutputUnwritable, UnresolvedFeatureKey
from .immunization import ImmunizationSchedule, evaluate_immunization

if TYPE_CHECKING:
    from .store import RecordsStore, StudentRecord

DERIVED_FEATURES = ("bmi", "immunization_status")


@dataclass(frozen=True)
class CohortQuery:
    age_min: int
    age_max: int
    features: tuple[str, ...]
    as_of: date
    include_incomplete: bool = False

    def __post_init__(self):
        if self.age_min > self.age_max:
            raise OutOfRange(f"age_min {self.age_min} exceeds age_max {self.age_max}")


def resolve_features(features: tuple[str, ...], catalog: ParameterCatalog) -> None:
    unresolved = [f for f in features if f not in catalog and f not in DERIVED_FEATURES]
    if unresolved:
        raise UnresolvedFeatureKey(
            f"unknown feature keys: {', '.join(unresolved)}", keys=unresolved
        )


def render_cell(value: Any) -> str:
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return f"{value:g}"
    if isinstance(value, date) and not isinstance(value, datetime):
        return value.isoformat()
    return str(value)


def _latest_as_of(record: "StudentRecord", key: str, as_of: date):
    history = record.observations.get(key, ())
    chosen = None
    for entry in history:
        if entry.recorded_at.date() <= as_of:
            chosen = entry
    return chosen


def _feature_value(
    record: "StudentRecord",
    key: str,
    catalog: ParameterCatalog,
    schedule: ImmunizationSchedule,
    as_of: date,
) -> Any | None:
    if key == "bmi":
        height = _latest_as_of(record, "height", as_of)
        weight = _latest_as_of(record, "weight", as_of)
        if height is None or weight is None:
            return None
        return format_bmi(compute_bmi(float(weight.value), float(height.value)))
    if key == "immunization_status":
        dob = record.one_time_values.get("date_of_birth")
        if dob is None:
            return None
        status = evaluate_immunization(dob.value, list(record.doses), schedule, as_of)
        return status.overall.value
    definition = catalog[key]
    if definition.cardinality is Cardinality.ONE_TIME:
        held = record.one_time_values.get(key)
        return held.value if held else None
    entry = _latest_as_of(record, key, as_of)
    return entry.value if entry else None


def build_cohort(
    store: "RecordsStore",
    catalog: ParameterCatalog,
    schedule: ImmunizationSchedule,
    query: CohortQuery,
) -> tuple[list[str], list[list[str]]]:
    """Header and rows of the feature matrix for ``query``."""
    resolve_features(query.features, catalog)
    header = ["screening_id", *query.features]
    rows: list[list[str]] = []
    for screening_id in store.list_screening_ids():
        record = store.get_record(screening_id)
        dob = record.one_time_values.get("date_of_birth")
        if dob is None or not isinstance(dob.value, date):
            continue
        years = age_at(dob.value, query.as_of).years
        if not query.age_min <= years <= query.age_max:
            continue
        cells: list[str] = [screening_id]
        complete = True
        for feature in query.features:
            value = _feature_value(record, feature, catalog, schedule, query.as_of)
            if value is None:
                complete = False
                cells.append("")
            else:
                cells.append(value if isinstance(value, str) else render_cell(value))
        if complete or query.include_incomplete:
            rows.append(cells)
    rows.sort(key=lambda r: r[0])
    return header, rows


def write_cohort_csv(path: str | Path, header: list[str], rows: list[list[str]]) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise OutputUnwritable(f"cannot write {path}: {exc}") from exc
