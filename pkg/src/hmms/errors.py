"""Domain error hierarchy.

Every error carries a stable machine-readable ``code`` so the API layer can
map it to exactly one HTTP status and clients can branch without parsing
messages.
"""

from __future__ import annotations


class HmmsError(Exception):
    """Base class for all domain errors."""

    code = "hmms_error"

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> dict:
        body = {"code": self.code, "message": self.message}
        if self.details:
            body["details"] = self.details
        return body


# --- catalog ----------------------------------------------------------------

class MalformedCatalog(HmmsError):
    code = "malformed_catalog"


class CatalogCountMismatch(HmmsError):
    code = "catalog_count_mismatch"


class DuplicateKey(HmmsError):
    code = "duplicate_key"


class TypeMismatch(HmmsError):
    code = "type_mismatch"


class OutOfRange(HmmsError):
    code = "out_of_range"


class UnknownEnumValue(HmmsError):
    code = "unknown_enum_value"


class NonPositiveInput(HmmsError):
    code = "non_positive_input"


class NegativeAge(HmmsError):
    code = "negative_age"


# --- immunization -----------------------------------------------------------

class MalformedSchedule(HmmsError):
    code = "malformed_schedule"


class DoseAgeArityMismatch(HmmsError):
    code = "dose_age_arity_mismatch"


class UnknownVaccineCode(HmmsError):
    code = "unknown_vaccine_code"


class DuplicateDose(HmmsError):
    code = "duplicate_dose"


class InvalidDoseEvent(HmmsError):
    code = "invalid_dose_event"


# --- screening --------------------------------------------------------------

class MalformedRuleset(HmmsError):
    code = "malformed_ruleset"


class UnresolvedRuleKey(HmmsError):
    code = "unresolved_rule_key"


class PredicateTypeMismatch(HmmsError):
    code = "predicate_type_mismatch"


# --- records store ----------------------------------------------------------

class UnknownStudent(HmmsError):
    code = "unknown_student"


class UnknownParameter(HmmsError):
    code = "unknown_parameter"


class UnknownCard(HmmsError):
    code = "unknown_card"


class UnknownReferral(HmmsError):
    code = "unknown_referral"


class DuplicateScreeningId(HmmsError):
    code = "duplicate_screening_id"


class DuplicateRfidToken(HmmsError):
    code = "duplicate_rfid_token"


class MissingRequiredField(HmmsError):
    code = "missing_required_field"


class ImmutableParameter(HmmsError):
    code = "immutable_parameter"


class IllegalTransition(HmmsError):
    code = "illegal_transition"


class NothingToEdit(HmmsError):
    code = "nothing_to_edit"


class InvalidRfidToken(HmmsError):
    code = "invalid_rfid_token"


# --- access / principals ----------------------------------------------------

class UnknownPrincipal(HmmsError):
    code = "unknown_principal"


class DuplicateUsername(HmmsError):
    code = "duplicate_username"


class InvalidPrincipal(HmmsError):
    code = "invalid_principal"


# --- cli / export -----------------------------------------------------------

class FileUnreadable(HmmsError):
    code = "file_unreadable"


class HeaderMismatch(HmmsError):
    code = "header_mismatch"


class UnresolvedFeatureKey(HmmsError):
    code = "unresolved_feature_key"


class OutputUnwritable(HmmsError):
    code = "output_unwritable"


class MalformedConfig(HmmsError):
    code = "malformed_config"
