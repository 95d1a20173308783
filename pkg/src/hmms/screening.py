"""Clinical rules engine: evaluates a student record against a ruleset.

Thresholds are ruleset configuration, not code. The shipped default ruleset
(``data/ruleset.json``) is NON-AUTHORITATIVE reference data for bring-up;
deploying schools are expected to install their own clinically reviewed
ruleset. Only the immunization-completeness standard is fully specified by
the national schedule.

A referral is produced exactly when at least one finding fails, and it
carries exactly the failed findings.
"""

from __future__ import annotations

import json
import uuid
from dataclasses import dataclass, replace
from datetime import date, datetime, timezone
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import TYPE_CHECKING, Any, Iterable

from .catalog import Cardinality, KindType, ParameterCatalog, ParameterValue, compute_bmi, format_bmi
from .dates import age_at
from .errors import MalformedRuleset, UnresolvedRuleKey
from .immunization import ImmunizationSchedule, OverallStatus, evaluate_immunization

if TYPE_CHECKING:
    from .store import StudentRecord

PSEUDO_KEYS = ("bmi", "immunization")

# Catalog parameter -> Table-style test names in the disease-hints data file.
PARAMETER_TESTS = {
    "cbc_esr": ("CBC", "ESR"),
    "blood_group": ("Blood Group & RH Typing",),
    "hbsag": ("HBsAg",),
    "urine_re": ("Urine R/E",),
    "stool_re": ("Stool R/E",),
    "tsh": ("TSH",),
}


class PredicateType(str, Enum):
    NUMERIC_RANGE = "numeric_range"
    MUST_EQUAL = "must_equal"
    MUST_BE_COMPLETE = "must_be_complete"
    REQUIRED_PRESENT = "required_present"


class Severity(str, Enum):
    FAIL = "fail"
    WARN = "warn"


class Verdict(str, Enum):
    PASS = "Pass"
    WARN = "Warn"
    FAIL = "Fail"


@dataclass(frozen=True)
class AgeBand:
    age_min: int
    age_max: int
    min: float | None = None
    max: float | None = None


@dataclass(frozen=True)
class Predicate:
    type: PredicateType
    min: float | None = None
    max: float | None = None
    bands: tuple[AgeBand, ...] = ()
    value: Any = None


@dataclass(frozen=True)
class ClinicalRule:
    rule_id: str
    parameter_key: str
    predicate: Predicate
    severity_on_fail: Severity = Severity.FAIL
    message: str = ""


@dataclass(frozen=True)
class Ruleset:
    version: str
    rules: tuple[ClinicalRule, ...]


@dataclass(frozen=True)
class Finding:
    rule_id: str
    parameter_key: str
    observed: str
    verdict: Verdict
    disease_hints: tuple[str, ...] = ()
    message: str = ""


class ReferralStatus(str, Enum):
    OPEN = "Open"
    SEEN = "Seen"
    CLOSED = "Closed"


# Open -> Seen -> Closed, with Open -> Closed allowed as a shortcut.
LEGAL_TRANSITIONS = {
    (ReferralStatus.OPEN, ReferralStatus.SEEN),
    (ReferralStatus.OPEN, ReferralStatus.CLOSED),
    (ReferralStatus.SEEN, ReferralStatus.CLOSED),
}


def is_legal_transition(current: ReferralStatus, new: ReferralStatus) -> bool:
    return (current, new) in LEGAL_TRANSITIONS


@dataclass(frozen=True)
class Referral:
    referral_id: str
    screening_id: str
    created_at: datetime
    failed_findings: tuple[Finding, ...]
    status: ReferralStatus = ReferralStatus.OPEN
    doctor_notes: str | None = None

    def __post_init__(self):
        if not self.failed_findings:
            raise ValueError("a referral must carry at least one failed finding")
        if any(f.verdict is not Verdict.FAIL for f in self.failed_findings):
            raise ValueError("a referral may only carry failed findings")


@dataclass(frozen=True)
class RuleIssue:
    rule_id: str
    code: str
    message: str


# --- disease hints (Table-style test -> disease list data file) -------------

_hints_cache: dict[str, tuple[str, ...]] | None = None


def _hints_table() -> dict[str, tuple[str, ...]]:
    global _hints_cache
    if _hints_cache is None:
        raw = json.loads(
            resources.files("hmms").joinpath("data/disease_hints.json").read_text(encoding="utf-8")
        )
        _hints_cache = {name: tuple(diseases) for name, diseases in raw["tests"].items()}
    return _hints_cache


def lookup_disease_hints(test_key: str) -> list[str]:
    """Disease list for a known test name; empty list for anything else."""
    return list(_hints_table().get(test_key, ()))


def hints_for_parameter(parameter_key: str) -> tuple[str, ...]:
    """Concatenated disease hints for a catalog parameter (empty if unmapped)."""
    hints: list[str] = []
    for test in PARAMETER_TESTS.get(parameter_key, ()):
        hints.extend(lookup_disease_hints(test))
    return tuple(hints)


# --- ruleset loading and validation ------------------------------------------

def default_ruleset_path() -> Path:
    return Path(str(resources.files("hmms").joinpath("data/ruleset.json")))


def load_ruleset(source: str | Path) -> Ruleset:
    path = Path(source)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise MalformedRuleset(f"cannot read ruleset file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MalformedRuleset(f"ruleset file {path} is not valid JSON: {exc}") from exc
    return parse_ruleset(raw)


def load_default_ruleset() -> Ruleset:
    return load_ruleset(default_ruleset_path())


def parse_ruleset(raw: Any) -> Ruleset:
    if not isinstance(raw, dict) or not isinstance(raw.get("rules"), list):
        raise MalformedRuleset("ruleset must be an object with a 'rules' list")
    version = raw.get("ruleset_version")
    if not isinstance(version, str) or not version:
        raise MalformedRuleset("ruleset must carry a string 'ruleset_version'")
    rules = []
    seen: set[str] = set()
    for entry in raw["rules"]:
        rule = _parse_rule(entry)
        if rule.rule_id in seen:
            raise MalformedRuleset(f"rule_id defined twice: {rule.rule_id!r}")
        seen.add(rule.rule_id)
        rules.append(rule)
    return Ruleset(version=version, rules=tuple(rules))


def _parse_rule(entry: Any) -> ClinicalRule:
    if not isinstance(entry, dict):
        raise MalformedRuleset("each rule must be an object")
    try:
        rule_id = entry["rule_id"]
        parameter_key = entry["parameter_key"]
        predicate_raw = entry["predicate"]
        severity = Severity(entry.get("severity_on_fail", "fail"))
    except KeyError as exc:
        raise MalformedRuleset(f"rule missing field {exc}") from exc
    except ValueError as exc:
        raise MalformedRuleset(str(exc)) from exc
    if not isinstance(predicate_raw, dict) or "type" not in predicate_raw:
        raise MalformedRuleset(f"rule {rule_id!r}: predicate must be an object with a 'type'")
    try:
        ptype = PredicateType(predicate_raw["type"])
    except ValueError as exc:
        raise MalformedRuleset(f"rule {rule_id!r}: unknown predicate type") from exc
    bands = tuple(
        AgeBand(
            age_min=b["age_min"],
            age_max=b["age_max"],
            min=b.get("min"),
            max=b.get("max"),
        )
        for b in predicate_raw.get("bands", ())
    )
    predicate = Predicate(
        type=ptype,
        min=predicate_raw.get("min"),
        max=predicate_raw.get("max"),
        bands=bands,
        value=predicate_raw.get("value"),
    )
    return ClinicalRule(
        rule_id=rule_id,
        parameter_key=parameter_key,
        predicate=predicate,
        severity_on_fail=severity,
        message=entry.get("message", ""),
    )


def validate_ruleset(rules: list[ClinicalRule] | Ruleset, catalog: ParameterCatalog) -> list[RuleIssue]:
    """Check every rule against the catalog; returns issues, never raises."""
    if isinstance(rules, Ruleset):
        rules = list(rules.rules)
    issues: list[RuleIssue] = []
    for rule in rules:
        issues.extend(_validate_rule(rule, catalog))
    return issues


def _validate_rule(rule: ClinicalRule, catalog: ParameterCatalog) -> list[RuleIssue]:
    issues: list[RuleIssue] = []
    key = rule.parameter_key
    pred = rule.predicate
    is_pseudo = key in PSEUDO_KEYS
    definition = catalog.get(key) if not is_pseudo else None

    if not is_pseudo and definition is None:
        return [RuleIssue(rule.rule_id, "unresolved_rule_key", f"unknown parameter key {key!r}")]

    if pred.type is PredicateType.MUST_BE_COMPLETE:
        if key != "immunization":
            issues.append(
                RuleIssue(rule.rule_id, "predicate_type_mismatch",
                          "must_be_complete applies only to the 'immunization' pseudo-key")
            )
        return issues

    if key == "immunization":
        issues.append(
            RuleIssue(rule.rule_id, "predicate_type_mismatch",
                      "the 'immunization' pseudo-key takes only must_be_complete")
        )
        return issues

    if pred.type is PredicateType.NUMERIC_RANGE:
        if key != "bmi" and definition is not None and definition.kind.type not in (
            KindType.INTEGER, KindType.DECIMAL,
        ):
            issues.append(
                RuleIssue(rule.rule_id, "predicate_type_mismatch",
                          f"numeric_range needs a numeric parameter, {key!r} is {definition.kind.type.value}")
            )
        if pred.min is not None and pred.max is not None and not pred.min < pred.max:
            issues.append(RuleIssue(rule.rule_id, "invalid_range", "min must be < max"))
        for band in pred.bands:
            if band.age_min > band.age_max:
                issues.append(RuleIssue(rule.rule_id, "invalid_range",
                                        f"band {band.age_min}-{band.age_max}: age_min > age_max"))
            if band.min is not None and band.max is not None and not band.min < band.max:
                issues.append(RuleIssue(rule.rule_id, "invalid_range",
                                        f"band {band.age_min}-{band.age_max}: min must be < max"))
    elif pred.type is PredicateType.MUST_EQUAL:
        if key == "bmi" or definition is None or definition.kind.type not in (
            KindType.ENUMERATED, KindType.BOOLEAN, KindType.BLOOD_GROUP,
        ):
            issues.append(
                RuleIssue(rule.rule_id, "predicate_type_mismatch",
                          "must_equal needs an enumerated or boolean parameter")
            )
        elif definition.kind.type is KindType.ENUMERATED and pred.value not in definition.kind.allowed:
            issues.append(
                RuleIssue(rule.rule_id, "unknown_enum_value",
                          f"{pred.value!r} is not an allowed value of {key!r}")
            )
        elif definition.kind.type is KindType.BOOLEAN and not isinstance(pred.value, bool):
            issues.append(
                RuleIssue(rule.rule_id, "predicate_type_mismatch",
                          "must_equal on a boolean parameter takes true or false")
            )
    elif pred.type is PredicateType.REQUIRED_PRESENT:
        if is_pseudo:
            issues.append(
                RuleIssue(rule.rule_id, "predicate_type_mismatch",
                          "required_present applies only to catalog parameters")
            )
    return issues


# --- evaluation ---------------------------------------------------------------

def run_screening(
    student: "StudentRecord",
    rules: list[ClinicalRule] | Ruleset,
    catalog: ParameterCatalog,
    schedule: ImmunizationSchedule,
    as_of: date,
) -> tuple[list[Finding], Referral | None]:
    """Evaluate every applicable rule; build a referral iff any finding fails.

    Findings come back in catalog order, ties broken by rule_id; pseudo-keys
    sort at their natural catalog rows (bmi at the BMI parameter,
    immunization at Vaccination Status).
    """
    if isinstance(rules, Ruleset):
        rules = list(rules.rules)
    unresolved = [
        r.rule_id
        for r in rules
        if r.parameter_key not in PSEUDO_KEYS and catalog.get(r.parameter_key) is None
    ]
    if unresolved:
        raise UnresolvedRuleKey(
            f"ruleset does not resolve against the catalog: {', '.join(sorted(unresolved))}",
            rule_ids=sorted(unresolved),
        )

    ordered = sorted(rules, key=lambda r: (_anchor_index(r.parameter_key, catalog), r.rule_id))
    findings = [_evaluate_rule(rule, student, catalog, schedule, as_of) for rule in ordered]

    failed = tuple(f for f in findings if f.verdict is Verdict.FAIL)
    referral = None
    if failed:
        referral = Referral(
            referral_id=uuid.uuid4().hex,
            screening_id=student.screening_id,
            created_at=datetime.now(timezone.utc),
            failed_findings=failed,
        )
    return findings, referral


def screen_all(
    students: Iterable["StudentRecord"],
    rules: list[ClinicalRule] | Ruleset,
    catalog: ParameterCatalog,
    schedule: ImmunizationSchedule,
    as_of: date,
) -> dict[str, tuple[list[Finding], Referral | None]]:
    """Screen a whole cohort; the result per student is exactly run_screening's."""
    return {
        student.screening_id: run_screening(student, rules, catalog, schedule, as_of)
        for student in students
    }


def _anchor_index(key: str, catalog: ParameterCatalog) -> int:
    anchor = {"bmi": "bmi", "immunization": "vaccination_status"}.get(key, key)
    if anchor in catalog:
        return catalog.index_of(anchor)
    return len(catalog)


def _evaluate_rule(
    rule: ClinicalRule,
    student: "StudentRecord",
    catalog: ParameterCatalog,
    schedule: ImmunizationSchedule,
    as_of: date,
) -> Finding:
    hints = hints_for_parameter(rule.parameter_key)
    fail_verdict = Verdict.FAIL if rule.severity_on_fail is Severity.FAIL else Verdict.WARN

    def finding(observed: str, verdict: Verdict, message: str) -> Finding:
        return Finding(
            rule_id=rule.rule_id,
            parameter_key=rule.parameter_key,
            observed=observed,
            verdict=verdict,
            disease_hints=hints,
            message=message,
        )

    if rule.predicate.type is PredicateType.MUST_BE_COMPLETE:
        dob = _one_time_date(student, "date_of_birth")
        if dob is None:
            return finding("", Verdict.WARN, "not measured: date of birth missing")
        status = evaluate_immunization(dob, list(student.doses), schedule, as_of)
        if status.overall is OverallStatus.COMPLETE:
            return finding(status.overall.value, Verdict.PASS, "ok")
        if status.overall is OverallStatus.PENDING_ONLY:
            return finding(status.overall.value, Verdict.WARN, "doses pending, none overdue")
        overdue = [f"{d.vaccine_code} dose {d.dose_number}" for d in status.per_dose if d.state.value == "Overdue"]
        return finding(status.overall.value, fail_verdict, rule.message or f"overdue: {', '.join(overdue)}")

    if rule.parameter_key == "bmi":
        observed = _observed_bmi(student, as_of)
        if observed is None:
            return finding("", Verdict.WARN, "not measured")
        return _check_numeric(rule, observed, format_bmi(observed), student, as_of, finding, fail_verdict)

    value = _observed_value(student, rule.parameter_key, catalog, as_of)

    if rule.predicate.type is PredicateType.REQUIRED_PRESENT:
        if value is None:
            return finding("", fail_verdict, rule.message or "required value missing")
        return finding(_render(value.value), Verdict.PASS, "ok")

    if value is None:
        return finding("", Verdict.WARN, "not measured")

    if rule.predicate.type is PredicateType.NUMERIC_RANGE:
        return _check_numeric(
            rule, float(value.value), _render(value.value), student, as_of, finding, fail_verdict
        )

    # must_equal
    if value.value == rule.predicate.value:
        return finding(_render(value.value), Verdict.PASS, "ok")
    return finding(_render(value.value), fail_verdict, rule.message or f"expected {rule.predicate.value!r}")


def _check_numeric(rule, observed: float, rendered: str, student, as_of, finding, fail_verdict) -> Finding:
    pred = rule.predicate
    lo, hi = pred.min, pred.max
    if pred.bands:
        dob = _one_time_date(student, "date_of_birth")
        years = age_at(dob, as_of).years if dob is not None else None
        band = next(
            (b for b in pred.bands if years is not None and b.age_min <= years <= b.age_max),
            None,
        )
        if band is None:
            return finding(rendered, Verdict.WARN, "no applicable band")
        lo, hi = band.min, band.max
    if (lo is not None and observed < lo) or (hi is not None and observed > hi):
        bounds = f"[{lo if lo is not None else '-inf'}, {hi if hi is not None else 'inf'}]"
        return finding(rendered, fail_verdict, rule.message or f"outside {bounds}")
    return finding(rendered, Verdict.PASS, "ok")


def _observed_value(
    student: "StudentRecord", key: str, catalog: ParameterCatalog, as_of: date
) -> ParameterValue | None:
    definition = catalog.get(key)
    if definition is None:
        return None
    if definition.cardinality is Cardinality.ONE_TIME:
        return student.one_time_values.get(key)
    history = student.observations.get(key, ())
    eligible = [v for v in history if v.recorded_at.date() <= as_of]
    return eligible[-1] if eligible else None


def _observed_bmi(student: "StudentRecord", as_of: date) -> float | None:
    """BMI from the latest height and weight on or before ``as_of``."""
    height = _latest_number(student, "height", as_of)
    weight = _latest_number(student, "weight", as_of)
    if height is None or weight is None or height <= 0 or weight <= 0:
        return None
    return compute_bmi(weight, height)


def _latest_number(student: "StudentRecord", key: str, as_of: date) -> float | None:
    history = student.observations.get(key, ())
    eligible = [v for v in history if v.recorded_at.date() <= as_of]
    return float(eligible[-1].value) if eligible else None


def _one_time_date(student: "StudentRecord", key: str) -> date | None:
    value = student.one_time_values.get(key)
    return value.value if value is not None else None


def _render(value: Any) -> str:
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return f"{value:g}"
    if isinstance(value, date):
        return value.isoformat()
    return str(value)


# --- wire/persistence serialization ------------------------------------------

def finding_to_dict(finding: Finding) -> dict:
    return {
        "rule_id": finding.rule_id,
        "parameter_key": finding.parameter_key,
        "observed": finding.observed,
        "verdict": finding.verdict.value,
        "disease_hints": list(finding.disease_hints),
        "message": finding.message,
    }


def finding_from_dict(raw: dict) -> Finding:
    return Finding(
        rule_id=raw["rule_id"],
        parameter_key=raw["parameter_key"],
        observed=raw["observed"],
        verdict=Verdict(raw["verdict"]),
        disease_hints=tuple(raw.get("disease_hints", ())),
        message=raw.get("message", ""),
    )


def referral_to_dict(referral: Referral) -> dict:
    return {
        "referral_id": referral.referral_id,
        "screening_id": referral.screening_id,
        "created_at": referral.created_at.isoformat(),
        "status": referral.status.value,
        "doctor_notes": referral.doctor_notes,
        "failed_findings": [finding_to_dict(f) for f in referral.failed_findings],
    }


def referral_from_dict(raw: dict) -> Referral:
    return Referral(
        referral_id=raw["referral_id"],
        screening_id=raw["screening_id"],
        created_at=datetime.fromisoformat(raw["created_at"]),
        failed_findings=tuple(finding_from_dict(f) for f in raw["failed_findings"]),
        status=ReferralStatus(raw["status"]),
        doctor_notes=raw.get("doctor_notes"),
    )


def with_status(referral: Referral, status: ReferralStatus, notes: str | None = None) -> Referral:
    updated = replace(referral, status=status)
    if notes is not None:
        updated = replace(updated, doctor_notes=notes)
    return updated
