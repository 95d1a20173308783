"""Calendar arithmetic shared by the catalog and the immunization engine.

Month convention: a month completes on the anniversary of the day-of-month;
when the target month is too short, the last day of that month completes it
(so Jan 31 + 1 month falls on Feb 28/29).
"""

from __future__ import annotations

import calendar
from dataclasses import dataclass
from datetime import date, timedelta

from .errors import NegativeAge


def add_months(d: date, months: int) -> date:
    """Return ``d`` shifted by whole months, day clamped to the month's end."""
    total = d.year * 12 + (d.month - 1) + months
    year, month = divmod(total, 12)
    month += 1
    day = min(d.day, calendar.monthrange(year, month)[1])
    return date(year, month, day)


def completed_months(start: date, end: date) -> int:
    """Whole months elapsed from ``start`` to ``end`` (anniversary-day rule)."""
    if end < start:
        raise NegativeAge(f"end date {end} precedes start date {start}")
    months = (end.year - start.year) * 12 + (end.month - start.month)
    anniversary_day = min(start.day, calendar.monthrange(end.year, end.month)[1])
    if end.day < anniversary_day:
        months -= 1
    return months


@dataclass(frozen=True)
class Age:
    """Age at a reference date, in completed weeks, months and years."""

    weeks: int
    months: int
    years: int


def age_at(dob: date, as_of: date) -> Age:
    """Age in completed weeks, months and years.

    Raises NegativeAge when ``as_of`` precedes ``dob``.
    """
    if as_of < dob:
        raise NegativeAge(f"as_of {as_of} precedes date of birth {dob}")
    weeks = (as_of - dob).days // 7
    months = completed_months(dob, as_of)
    return Age(weeks=weeks, months=months, years=months // 12)


def offset_due_date(dob: date, *, weeks: int | None = None, months: int | None = None) -> date:
    """Date at which an age offset from birth is reached.

    Exactly one of ``weeks``/``months`` must be given; mixing the units of
    an age offset is always a caller bug.
    """
    if (weeks is None) == (months is None):
        raise ValueError("give exactly one of weeks or months")
    if months is not None:
        return add_months(dob, months)
    return dob + timedelta(weeks=weeks)
