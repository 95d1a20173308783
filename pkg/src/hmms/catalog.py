"""Screening parameter schema: definitions, value validation, derived values.

The shipped catalog (``data/catalog.json``) defines the 45 screening
parameters, 18 entered once at admission and 27 re-measured at every annual
camp. A catalog with any other totals is rejected at load time.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Any, Iterator

from .errors import (
    CatalogCountMismatch,
    DuplicateKey,
    MalformedCatalog,
    NonPositiveInput,
    OutOfRange,
    TypeMismatch,
    UnknownEnumValue,
)

EXPECTED_TOTAL = 45
EXPECTED_ONE_TIME = 18
EXPECTED_MULTIPLE_TIME = 27

BLOOD_GROUPS = ("A+", "A-", "B+", "B-", "AB+", "AB-", "O+", "O-")

_TRUE_WORDS = {"true", "yes", "y", "1"}
_FALSE_WORDS = {"false", "no", "n", "0"}


class Area(str, Enum):
    GENERAL_INFORMATION = "General Information"
    VACCINATION = "Vaccination"
    CLINICAL_TEST = "Clinical Test"
    DENTAL_CONDITION = "Dental Condition"
    NUTRITION = "Nutrition"
    EYE_CONDITION = "Eye Condition"
    HEARING_CONDITION = "Hearing Condition"
    ENT = "ENT"
    SKIN_CONDITION = "Skin Condition"
    MENTAL_CONDITION = "Mental Condition"
    HYGIENIC_INFORMATION = "Hygienic Information"


class Cardinality(str, Enum):
    ONE_TIME = "one_time"
    MULTIPLE_TIME = "multiple_time"


class KindType(str, Enum):
    TEXT = "text"
    INTEGER = "integer"
    DECIMAL = "decimal"
    DATE = "date"
    BOOLEAN = "boolean"
    ENUMERATED = "enumerated"
    BLOOD_GROUP = "blood_group"
    PHOTO_REF = "photo_ref"


@dataclass(frozen=True)
class ValueKind:
    """Typed payload description for a parameter.

    ``unit`` applies to decimals, ``allowed`` to enumerations, and
    ``allow_detail`` marks enumerations that carry a free-text sub-result
    (the lab-test parameters).
    """

    type: KindType
    unit: str | None = None
    allowed: tuple[str, ...] = ()
    allow_detail: bool = False


@dataclass(frozen=True)
class Constraints:
    min: float | None = None
    max: float | None = None
    pattern: str | None = None


@dataclass(frozen=True)
class ParameterDefinition:
    key: str
    display_name: str
    area: Area
    cardinality: Cardinality
    kind: ValueKind
    constraints: Constraints = field(default_factory=Constraints)


class ParameterCatalog:
    """Ordered, immutable collection of parameter definitions."""

    def __init__(self, version: str, definitions: list[ParameterDefinition]):
        self.version = version
        self.definitions: tuple[ParameterDefinition, ...] = tuple(definitions)
        self._by_key = {d.key: d for d in self.definitions}
        self._index = {d.key: i for i, d in enumerate(self.definitions)}

    def __iter__(self) -> Iterator[ParameterDefinition]:
        return iter(self.definitions)

    def __len__(self) -> int:
        return len(self.definitions)

    def __contains__(self, key: str) -> bool:
        return key in self._by_key

    def get(self, key: str) -> ParameterDefinition | None:
        return self._by_key.get(key)

    def __getitem__(self, key: str) -> ParameterDefinition:
        return self._by_key[key]

    def index_of(self, key: str) -> int:
        return self._index[key]

    def keys(self) -> list[str]:
        return [d.key for d in self.definitions]

    def one_time(self) -> list[ParameterDefinition]:
        return [d for d in self.definitions if d.cardinality is Cardinality.ONE_TIME]

    def multiple_time(self) -> list[ParameterDefinition]:
        return [d for d in self.definitions if d.cardinality is Cardinality.MULTIPLE_TIME]


@dataclass(frozen=True)
class ParameterValue:
    """A validated, typed observation of one parameter."""

    key: str
    value: Any
    recorded_at: datetime
    camp_year: int | None = None
    recorded_by: str = ""
    detail: str | None = None


def default_catalog_path() -> Path:
    return Path(str(resources.files("hmms").joinpath("data/catalog.json")))


def load_catalog(source: str | Path) -> ParameterCatalog:
    """Load and validate a catalog file.

    Raises MalformedCatalog on syntax or schema problems, DuplicateKey on a
    repeated parameter key, and CatalogCountMismatch when the totals differ
    from 45 / 18 one-time / 27 multiple-time.
    """
    path = Path(source)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise MalformedCatalog(f"cannot read catalog file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MalformedCatalog(f"catalog file {path} is not valid JSON: {exc}") from exc

    if not isinstance(raw, dict) or "parameters" not in raw:
        raise MalformedCatalog("catalog file must be an object with a 'parameters' list")
    version = raw.get("catalog_version")
    if not isinstance(version, str) or not version:
        raise MalformedCatalog("catalog file must carry a string 'catalog_version'")
    entries = raw["parameters"]
    if not isinstance(entries, list):
        raise MalformedCatalog("'parameters' must be a list")

    definitions: list[ParameterDefinition] = []
    seen: set[str] = set()
    for i, entry in enumerate(entries):
        definition = _parse_definition(entry, position=i)
        if definition.key in seen:
            raise DuplicateKey(f"parameter key defined twice: {definition.key!r}", key=definition.key)
        seen.add(definition.key)
        definitions.append(definition)

    total = len(definitions)
    one_time = sum(1 for d in definitions if d.cardinality is Cardinality.ONE_TIME)
    multiple = total - one_time
    if (total, one_time, multiple) != (EXPECTED_TOTAL, EXPECTED_ONE_TIME, EXPECTED_MULTIPLE_TIME):
        raise CatalogCountMismatch(
            f"catalog must define {EXPECTED_TOTAL} parameters "
            f"({EXPECTED_ONE_TIME} one-time, {EXPECTED_MULTIPLE_TIME} multiple-time); "
            f"got {total} ({one_time}, {multiple})",
            total=total,
            one_time=one_time,
            multiple_time=multiple,
        )
    return ParameterCatalog(version, definitions)


def load_default_catalog() -> ParameterCatalog:
    return load_catalog(default_catalog_path())


def _parse_definition(entry: Any, position: int) -> ParameterDefinition:
    if not isinstance(entry, dict):
        raise MalformedCatalog(f"parameter #{position} is not an object")
    try:
        key = entry["key"]
        display_name = entry["display_name"]
        area = Area(entry["area"])
        cardinality = Cardinality(entry["cardinality"])
        kind_raw = entry["kind"]
    except KeyError as exc:
        raise MalformedCatalog(f"parameter #{position} missing field {exc}") from exc
    except ValueError as exc:
        raise MalformedCatalog(f"parameter #{position}: {exc}") from exc
    if not isinstance(key, str) or not key:
        raise MalformedCatalog(f"parameter #{position} has an invalid key")

    kind = _parse_kind(kind_raw, key)
    constraints = _parse_constraints(entry.get("constraints"), key)
    return ParameterDefinition(
        key=key,
        display_name=display_name,
        area=area,
        cardinality=cardinality,
        kind=kind,
        constraints=constraints,
    )


def _parse_kind(raw: Any, key: str) -> ValueKind:
    if not isinstance(raw, dict) or "type" not in raw:
        raise MalformedCatalog(f"parameter {key!r}: kind must be an object with a 'type'")
    try:
        kind_type = KindType(raw["type"])
    except ValueError as exc:
        raise MalformedCatalog(f"parameter {key!r}: unknown kind {raw['type']!r}") from exc

    unit = raw.get("unit")
    allowed = tuple(raw.get("allowed", ()))
    allow_detail = bool(raw.get("allow_detail", False))
    if kind_type is KindType.DECIMAL and not unit:
        raise MalformedCatalog(f"parameter {key!r}: decimal kind requires an explicit unit")
    if kind_type is KindType.ENUMERATED and not allowed:
        raise MalformedCatalog(f"parameter {key!r}: enumerated kind requires allowed values")
    if kind_type is not KindType.ENUMERATED and allowed:
        raise MalformedCatalog(f"parameter {key!r}: only enumerated kinds take allowed values")
    return ValueKind(type=kind_type, unit=unit, allowed=allowed, allow_detail=allow_detail)


def _parse_constraints(raw: Any, key: str) -> Constraints:
    if raw is None:
        return Constraints()
    if not isinstance(raw, dict):
        raise MalformedCatalog(f"parameter {key!r}: constraints must be an object")
    minimum = raw.get("min")
    maximum = raw.get("max")
    if minimum is not None and maximum is not None and not minimum < maximum:
        raise MalformedCatalog(f"parameter {key!r}: constraint min must be < max")
    return Constraints(min=minimum, max=maximum, pattern=raw.get("pattern"))


def validate_value(
    definition: ParameterDefinition,
    raw: Any,
    *,
    recorded_at: datetime | None = None,
    camp_year: int | None = None,
    recorded_by: str = "",
) -> ParameterValue:
    """Validate ``raw`` against ``definition`` and return a typed value.

    Total over arbitrary input: returns a ParameterValue or raises one of
    TypeMismatch / OutOfRange / UnknownEnumValue, never anything else.
    """
    if definition.cardinality is Cardinality.MULTIPLE_TIME:
        if camp_year is None:
            raise TypeMismatch(
                f"{definition.key}: camp_year is required for a multiple-time parameter",
                key=definition.key,
            )
        if not isinstance(camp_year, int) or isinstance(camp_year, bool) or not 1900 <= camp_year <= 2200:
            raise TypeMismatch(f"{definition.key}: camp_year must be a calendar year", key=definition.key)
    elif camp_year is not None:
        raise TypeMismatch(
            f"{definition.key}: camp_year is not allowed for a one-time parameter",
            key=definition.key,
        )

    detail: str | None = None
    if isinstance(raw, dict):
        extra = set(raw) - {"value", "detail"}
        if extra or "value" not in raw:
            raise TypeMismatch(f"{definition.key}: object values take only 'value' and 'detail'", key=definition.key)
        detail = raw.get("detail")
        raw = raw["value"]
        if detail is not None and not isinstance(detail, str):
            raise TypeMismatch(f"{definition.key}: detail must be text", key=definition.key)
        if detail is not None and not definition.kind.allow_detail:
            raise TypeMismatch(f"{definition.key}: this parameter does not take a detail text", key=definition.key)

    value = _coerce(definition, raw)
    return ParameterValue(
        key=definition.key,
        value=value,
        recorded_at=recorded_at or datetime.now(timezone.utc),
        camp_year=camp_year,
        recorded_by=recorded_by,
        detail=detail,
    )


def _coerce(definition: ParameterDefinition, raw: Any) -> Any:
    kind = definition.kind
    key = definition.key

    if kind.type is KindType.TEXT:
        if not isinstance(raw, str):
            raise TypeMismatch(f"{key}: expected text, got {type(raw).__name__}", key=key)
        _check_pattern(definition, raw)
        return raw

    if kind.type is KindType.PHOTO_REF:
        if not isinstance(raw, str) or not raw.strip():
            raise TypeMismatch(f"{key}: expected a non-empty photo reference", key=key)
        return raw

    if kind.type is KindType.INTEGER:
        value = _parse_int(key, raw)
        _check_range(definition, value)
        return value

    if kind.type is KindType.DECIMAL:
        value = _parse_float(key, raw)
        _check_range(definition, value)
        return value

    if kind.type is KindType.DATE:
        if isinstance(raw, date) and not isinstance(raw, datetime):
            return raw
        if isinstance(raw, str):
            try:
                return date.fromisoformat(raw)
            except ValueError:
                pass
        raise TypeMismatch(f"{key}: expected an ISO date (YYYY-MM-DD)", key=key)

    if kind.type is KindType.BOOLEAN:
        if isinstance(raw, bool):
            return raw
        if isinstance(raw, str):
            lowered = raw.strip().lower()
            if lowered in _TRUE_WORDS:
                return True
            if lowered in _FALSE_WORDS:
                return False
        raise TypeMismatch(f"{key}: expected a yes/no value", key=key)

    if kind.type is KindType.ENUMERATED:
        if not isinstance(raw, str):
            raise TypeMismatch(f"{key}: expected one of {list(kind.allowed)}", key=key)
        if raw not in kind.allowed:
            raise UnknownEnumValue(
                f"{key}: {raw!r} is not one of {list(kind.allowed)}",
                key=key,
                allowed=list(kind.allowed),
            )
        return raw

    if kind.type is KindType.BLOOD_GROUP:
        if not isinstance(raw, str):
            raise TypeMismatch(f"{key}: expected a blood group string", key=key)
        normalized = raw.strip().upper()
        if normalized not in BLOOD_GROUPS:
            raise UnknownEnumValue(
                f"{key}: {raw!r} is not a blood group ({', '.join(BLOOD_GROUPS)})",
                key=key,
                allowed=list(BLOOD_GROUPS),
            )
        return normalized

    raise TypeMismatch(f"{key}: unsupported kind {kind.type}", key=key)


def _parse_int(key: str, raw: Any) -> int:
    if isinstance(raw, bool):
        raise TypeMismatch(f"{key}: expected an integer, got a boolean", key=key)
    if isinstance(raw, int):
        return raw
    if isinstance(raw, str):
        try:
            return int(raw.strip())
        except ValueError:
            pass
    raise TypeMismatch(f"{key}: expected an integer", key=key)


def _parse_float(key: str, raw: Any) -> float:
    if isinstance(raw, bool):
        raise TypeMismatch(f"{key}: expected a number, got a boolean", key=key)
    if isinstance(raw, (int, float)):
        return float(raw)
    if isinstance(raw, str):
        try:
            return float(raw.strip())
        except ValueError:
            pass
    raise TypeMismatch(f"{key}: expected a number", key=key)


def _check_range(definition: ParameterDefinition, value: float) -> None:
    c = definition.constraints
    if c.min is not None and value < c.min:
        raise OutOfRange(
            f"{definition.key}: {value} is below the minimum {c.min}",
            key=definition.key, min=c.min, max=c.max,
        )
    if c.max is not None and value > c.max:
        raise OutOfRange(
            f"{definition.key}: {value} is above the maximum {c.max}",
            key=definition.key, min=c.min, max=c.max,
        )


def _check_pattern(definition: ParameterDefinition, value: str) -> None:
    pattern = definition.constraints.pattern
    if pattern is not None and re.fullmatch(pattern, value) is None:
        raise OutOfRange(
            f"{definition.key}: value does not match the required pattern {pattern!r}",
            key=definition.key, pattern=pattern,
        )


def compute_bmi(weight_kg: float, height_cm: float) -> float:
    """Body mass index in kg/m², full precision."""
    if weight_kg <= 0 or height_cm <= 0:
        raise NonPositiveInput(f"weight and height must be positive, got {weight_kg} kg / {height_cm} cm")
    meters = height_cm / 100.0
    return weight_kg / (meters * meters)


def round_bmi(value: float) -> float:
    """BMI display rounding: half-up to two decimals."""
    return float(Decimal(repr(value)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def format_bmi(value: float) -> str:
    return f"{round_bmi(value):.2f}"
