"""Role-based access control and the student-facing minimal projection.

The grant matrix is deliberately small and closed: four roles, fourteen
actions, deny by default. Anything not listed here is not a capability of
the system, so route handlers map onto these actions rather than inventing
their own checks.
"""

from __future__ import annotations

import hashlib
import hmac
import secrets
from dataclasses import dataclass
from datetime import date
from enum import Enum
from typing import TYPE_CHECKING, Any

from .catalog import compute_bmi, format_bmi
from .immunization import ImmunizationSchedule, evaluate_immunization

if TYPE_CHECKING:
    from .store import StudentRecord


class Role(str, Enum):
    ADMIN = "admin"
    NURSE = "nurse"
    DOCTOR = "doctor"
    STUDENT = "student"


class Action(str, Enum):
    MANAGE_STAFF = "manage_staff"
    SEARCH_STUDENT = "search_student"
    PUNCH_CARD = "punch_card"
    VIEW_BASIC_INFO = "view_basic_info"
    VIEW_HEALTH_DATA = "view_health_data"
    VIEW_OLD_HEALTH_DATA = "view_old_health_data"
    INPUT_HEALTH_DATA = "input_health_data"
    EDIT_HEALTH_DATA = "edit_health_data"
    DELETE_HEALTH_DATA = "delete_health_data"
    PRINT_HEALTH_DATA = "print_health_data"
    RUN_SCREENING = "run_screening"
    MANAGE_RULESETS = "manage_rulesets"
    EXPORT_COHORT = "export_cohort"
    VIEW_MINIMAL_SELF = "view_minimal_self"


ROLE_GRANTS: dict[Role, frozenset[Action]] = {
    Role.ADMIN: frozenset({
        Action.MANAGE_STAFF,
        Action.VIEW_BASIC_INFO,
        Action.VIEW_HEALTH_DATA,
        Action.DELETE_HEALTH_DATA,
        Action.MANAGE_RULESETS,
        Action.EXPORT_COHORT,
    }),
    Role.NURSE: frozenset({
        Action.SEARCH_STUDENT,
        Action.PUNCH_CARD,
        Action.VIEW_BASIC_INFO,
        Action.VIEW_HEALTH_DATA,
        Action.INPUT_HEALTH_DATA,
        Action.EDIT_HEALTH_DATA,
        Action.PRINT_HEALTH_DATA,
        Action.RUN_SCREENING,
    }),
    Role.DOCTOR: frozenset({
        Action.SEARCH_STUDENT,
        Action.PUNCH_CARD,
        Action.VIEW_BASIC_INFO,
        Action.VIEW_HEALTH_DATA,
        Action.VIEW_OLD_HEALTH_DATA,
        Action.PRINT_HEALTH_DATA,
    }),
    Role.STUDENT: frozenset({
        Action.VIEW_MINIMAL_SELF,
    }),
}


@dataclass(frozen=True)
class Principal:
    """An authenticated account. screening_id is set only for student logins."""

    principal_id: str
    username: str
    display_name: str
    role: Role
    screening_id: str | None = None


@dataclass(frozen=True)
class Decision:
    allowed: bool
    reason: str

    def __bool__(self) -> bool:
        return self.allowed


def authorize(principal: Principal, action: Action, target_screening_id: str | None = None) -> Decision:
    """Decide whether ``principal`` may perform ``action``.

    Students hold exactly one grant and only against their own record, so
    the target must be supplied for ViewMinimalSelf. Every other (role,
    action) pair is answered from the grant matrix; unknown combinations
    are denied.
    """
    if principal.role is Role.STUDENT:
        if action is not Action.VIEW_MINIMAL_SELF:
            return Decision(False, f"student denied {action.value}")
        if target_screening_id is None or target_screening_id != principal.screening_id:
            return Decision(False, "students may only view their own record")
        return Decision(True, "student granted view_minimal_self on own record")
    granted = ROLE_GRANTS.get(principal.role, frozenset())
    if action in granted:
        return Decision(True, f"{principal.role.value} granted {action.value}")
    return Decision(False, f"{principal.role.value} denied {action.value}")


# -- password storage ----------------------------------------------------------

_PBKDF2_ITERATIONS = 120_000


def hash_password(password: str) -> tuple[str, str]:
    """Salted PBKDF2-SHA256 digest; returns (salt_hex, digest_hex)."""
    salt = secrets.token_bytes(16)
    digest = hashlib.pbkdf2_hmac("sha256", password.encode("utf-8"), salt, _PBKDF2_ITERATIONS)
    return salt.hex(), digest.hex()


def verify_password(password: str, salt_hex: str, digest_hex: str) -> bool:
    candidate = hashlib.pbkdf2_hmac(
        "sha256", password.encode("utf-8"), bytes.fromhex(salt_hex), _PBKDF2_ITERATIONS
    )
    return hmac.compare_digest(candidate.hex(), digest_hex)


# -- minimal student projection ---------------------------------------------------

MINIMAL_VIEW_FIELDS = (
    "screening_id",
    "student_name",
    "present_class",
    "height_cm",
    "weight_kg",
    "bmi",
    "immunization",
    "notices",
)


@dataclass(frozen=True)
class MinimalView:
    """The only shape of health data a student login can ever receive."""

    screening_id: str
    student_name: str | None = None
    present_class: str | None = None
    height_cm: float | None = None
    weight_kg: float | None = None
    bmi: str | None = None
    immunization: str | None = None
    notices: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "screening_id": self.screening_id,
            "student_name": self.student_name,
            "present_class": self.present_class,
            "height_cm": self.height_cm,
            "weight_kg": self.weight_kg,
            "bmi": self.bmi,
            "immunization": self.immunization,
            "notices": list(self.notices),
        }


def minimal_view(
    source: "StudentRecord | MinimalView",
    schedule: ImmunizationSchedule | None = None,
    as_of: date | None = None,
) -> MinimalView:
    """Project a record down to the student-safe allow list.

    Idempotent by construction: projecting an existing MinimalView returns
    an equal view, so accidental double application cannot widen the data.
    """
    if isinstance(source, MinimalView):
        return MinimalView(**{**source.__dict__, "notices": tuple(source.notices)})

    def latest(key: str):
        history = source.observations.get(key, ())
        return history[-1].value if history else None

    height = latest("height")
    weight = latest("weight")
    bmi = None
    if isinstance(height, (int, float)) and isinstance(weight, (int, float)) and height > 0:
        bmi = format_bmi(compute_bmi(float(weight), float(height)))

    immunization = None
    dob_value = source.one_time_values.get("date_of_birth")
    if schedule is not None and dob_value is not None and isinstance(dob_value.value, date):
        status = evaluate_immunization(
            dob_value.value, list(source.doses), schedule, as_of=as_of or date.today()
        )
        immunization = status.overall.value

    notices = []
    for referral in source.referrals:
        if referral.status.value == "Closed":
            continue
        notice = (
            f"Referral {referral.status.value.lower()}:"
            f" {len(referral.failed_findings)} finding(s) need follow-up"
        )
        if referral.doctor_notes:
            notice += f". Doctor: {referral.doctor_notes}"
        notices.append(notice)

    name_value = source.one_time_values.get("student_name")
    present_class = latest("present_class")
    return MinimalView(
        screening_id=source.screening_id,
        student_name=name_value.value if name_value else None,
        present_class=str(present_class) if present_class is not None else None,
        height_cm=float(height) if isinstance(height, (int, float)) else None,
        weight_kg=float(weight) if isinstance(weight, (int, float)) else None,
        bmi=bmi,
        immunization=immunization,
        notices=tuple(notices),
    )
