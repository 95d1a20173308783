"""National immunization schedule as data, plus dose-history evaluation.

A dose is Given when a matching event exists, Pending while the recommended
age plus the grace period still lies in the future, and Overdue from that
point on. Matching is by (vaccine code, dose number) only; the standard
being enforced is completeness, not timing compliance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import date, timedelta
from enum import Enum
from importlib import resources
from pathlib import Path

from .dates import offset_due_date
from .errors import (
    DoseAgeArityMismatch,
    DuplicateDose,
    InvalidDoseEvent,
    MalformedSchedule,
    NegativeAge,
    UnknownVaccineCode,
)

DEFAULT_GRACE_DAYS = 28


@dataclass(frozen=True)
class AgeOffset:
    """Recommended age from birth, in whole weeks or months ("After Birth" = 0 weeks)."""

    weeks: int | None = None
    months: int | None = None

    def __post_init__(self):
        if (self.weeks is None) == (self.months is None):
            raise MalformedSchedule("age offset must give exactly one of weeks or months")

    def due_date(self, dob: date) -> date:
        return offset_due_date(dob, weeks=self.weeks, months=self.months)

    def approx_days(self) -> int:
        return self.weeks * 7 if self.weeks is not None else self.months * 31

    def label(self) -> str:
        if self.months is not None:
            return f"{self.months} months"
        if self.weeks == 0:
            return "after birth"
        return f"{self.weeks} weeks"


@dataclass(frozen=True)
class VaccineSpec:
    vaccine_code: str
    diseases_prevented: tuple[str, ...]
    dose_count: int
    recommended_ages: tuple[AgeOffset, ...]

    def __post_init__(self):
        if self.dose_count < 1:
            raise MalformedSchedule(f"{self.vaccine_code}: dose_count must be positive")
        if len(self.recommended_ages) != self.dose_count:
            raise DoseAgeArityMismatch(
                f"{self.vaccine_code}: {self.dose_count} doses but "
                f"{len(self.recommended_ages)} recommended ages",
                vaccine_code=self.vaccine_code,
            )
        days = [o.approx_days() for o in self.recommended_ages]
        if days != sorted(days):
            raise MalformedSchedule(f"{self.vaccine_code}: recommended ages must be non-decreasing")


@dataclass(frozen=True)
class ImmunizationSchedule:
    vaccines: tuple[VaccineSpec, ...]
    grace_period: timedelta = timedelta(days=DEFAULT_GRACE_DAYS)
    version: str = "1"

    def total_doses(self) -> int:
        return sum(v.dose_count for v in self.vaccines)

    def by_code(self, code: str) -> VaccineSpec | None:
        for v in self.vaccines:
            if v.vaccine_code == code:
                return v
        return None


@dataclass(frozen=True)
class DoseEvent:
    vaccine_code: str
    dose_number: int
    given_on: date


class DoseState(str, Enum):
    GIVEN = "Given"
    PENDING = "Pending"
    OVERDUE = "Overdue"


class OverallStatus(str, Enum):
    COMPLETE = "Complete"
    INCOMPLETE = "Incomplete"
    PENDING_ONLY = "PendingOnly"


@dataclass(frozen=True)
class PerDoseStatus:
    vaccine_code: str
    dose_number: int
    state: DoseState
    due_on: date


@dataclass(frozen=True)
class ImmunizationStatus:
    overall: OverallStatus
    per_dose: tuple[PerDoseStatus, ...]

    def counts(self) -> dict[str, int]:
        out = {s.value: 0 for s in DoseState}
        for d in self.per_dose:
            out[d.state.value] += 1
        return out


def evaluate_immunization(
    dob: date,
    doses: list[DoseEvent],
    schedule: ImmunizationSchedule,
    as_of: date,
) -> ImmunizationStatus:
    """Evaluate a dose history against the schedule at ``as_of``.

    Raises UnknownVaccineCode for events naming vaccines outside the
    schedule, DuplicateDose for a repeated (code, dose number) pair, and
    InvalidDoseEvent for dose numbers beyond the vaccine's count or doses
    given before birth.
    """
    if as_of < dob:
        raise NegativeAge(f"as_of {as_of} precedes date of birth {dob}")

    given: set[tuple[str, int]] = set()
    for event in doses:
        spec = schedule.by_code(event.vaccine_code)
        if spec is None:
            raise UnknownVaccineCode(
                f"vaccine code {event.vaccine_code!r} is not in the schedule",
                vaccine_code=event.vaccine_code,
            )
        if not 1 <= event.dose_number <= spec.dose_count:
            raise InvalidDoseEvent(
                f"{event.vaccine_code}: dose number {event.dose_number} outside 1..{spec.dose_count}",
                vaccine_code=event.vaccine_code,
                dose_number=event.dose_number,
            )
        if event.given_on < dob:
            raise InvalidDoseEvent(
                f"{event.vaccine_code} dose {event.dose_number} given before date of birth",
                vaccine_code=event.vaccine_code,
                dose_number=event.dose_number,
            )
        pair = (event.vaccine_code, event.dose_number)
        if pair in given:
            raise DuplicateDose(
                f"{event.vaccine_code} dose {event.dose_number} recorded twice",
                vaccine_code=event.vaccine_code,
                dose_number=event.dose_number,
            )
        given.add(pair)

    per_dose: list[PerDoseStatus] = []
    for spec in schedule.vaccines:
        for number, offset in enumerate(spec.recommended_ages, start=1):
            due = offset.due_date(dob)
            if (spec.vaccine_code, number) in given:
                state = DoseState.GIVEN
            elif due + schedule.grace_period > as_of:
                state = DoseState.PENDING
            else:
                state = DoseState.OVERDUE
            per_dose.append(PerDoseStatus(spec.vaccine_code, number, state, due))

    states = {d.state for d in per_dose}
    if states <= {DoseState.GIVEN}:
        overall = OverallStatus.COMPLETE
    elif DoseState.OVERDUE in states:
        overall = OverallStatus.INCOMPLETE
    else:
        overall = OverallStatus.PENDING_ONLY
    return ImmunizationStatus(overall=overall, per_dose=tuple(per_dose))


def default_schedule_path() -> Path:
    return Path(str(resources.files("hmms").joinpath("data/schedule.json")))


def load_schedule(source: str | Path) -> ImmunizationSchedule:
    """Load and validate a schedule file.

    Raises MalformedSchedule on syntax/shape problems and
    DoseAgeArityMismatch when a vaccine's recommended-age list does not
    match its dose count.
    """
    path = Path(source)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise MalformedSchedule(f"cannot read schedule file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MalformedSchedule(f"schedule file {path} is not valid JSON: {exc}") from exc

    if not isinstance(raw, dict) or not isinstance(raw.get("vaccines"), list):
        raise MalformedSchedule("schedule file must be an object with a 'vaccines' list")
    version = raw.get("schedule_version")
    if not isinstance(version, str) or not version:
        raise MalformedSchedule("schedule file must carry a string 'schedule_version'")
    grace_days = raw.get("grace_period_days", DEFAULT_GRACE_DAYS)
    if not isinstance(grace_days, int) or grace_days < 0:
        raise MalformedSchedule("grace_period_days must be a non-negative integer")

    vaccines: list[VaccineSpec] = []
    seen: set[str] = set()
    for entry in raw["vaccines"]:
        if not isinstance(entry, dict):
            raise MalformedSchedule("each vaccine entry must be an object")
        try:
            code = entry["code"]
            diseases = tuple(entry.get("diseases_prevented", ()))
            dose_count = entry["dose_count"]
            ages = [_parse_offset(o, code) for o in entry["recommended_ages"]]
        except KeyError as exc:
            raise MalformedSchedule(f"vaccine entry missing field {exc}") from exc
        if code in seen:
            raise MalformedSchedule(f"vaccine code defined twice: {code!r}")
        seen.add(code)
        vaccines.append(
            VaccineSpec(
                vaccine_code=code,
                diseases_prevented=diseases,
                dose_count=dose_count,
                recommended_ages=tuple(ages),
            )
        )
    return ImmunizationSchedule(
        vaccines=tuple(vaccines),
        grace_period=timedelta(days=grace_days),
        version=version,
    )


def load_default_schedule() -> ImmunizationSchedule:
    return load_schedule(default_schedule_path())


def _parse_offset(raw, code: str) -> AgeOffset:
    if not isinstance(raw, dict) or len(raw) != 1 or next(iter(raw)) not in ("weeks", "months"):
        raise MalformedSchedule(f"{code}: recommended age must be {{'weeks': n}} or {{'months': n}}")
    unit, amount = next(iter(raw.items()))
    if not isinstance(amount, int) or amount < 0:
        raise MalformedSchedule(f"{code}: recommended age must be a non-negative whole number")
    return AgeOffset(weeks=amount) if unit == "weeks" else AgeOffset(months=amount)
