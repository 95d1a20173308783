"""Clinical rules engine: verdicts, referral construction, ruleset validation."""

import random
from datetime import date, datetime, timezone

import pytest

from hmms.errors import MalformedRuleset, UnresolvedRuleKey
from hmms.screening import (
    AgeBand,
    ClinicalRule,
    Finding,
    Predicate,
    PredicateType,
    Referral,
    ReferralStatus,
    Ruleset,
    Severity,
    Verdict,
    hints_for_parameter,
    is_legal_transition,
    lookup_disease_hints,
    parse_ruleset,
    run_screening,
    validate_ruleset,
    with_status,
)

AS_OF = date(2024, 6, 1)


def rule(rule_id, key, predicate, severity=Severity.FAIL):
    return ClinicalRule(rule_id=rule_id, parameter_key=key, predicate=predicate,
                        severity_on_fail=severity)


def numeric(min=None, max=None, bands=()):
    return Predicate(type=PredicateType.NUMERIC_RANGE, min=min, max=max, bands=tuple(bands))


def must_equal(value):
    return Predicate(type=PredicateType.MUST_EQUAL, value=value)


@pytest.fixture
def student(register, store, make_value):
    register(screening_id="S-RULES", rfid_token="CARD-RULES", dob="2015-03-10")
    for key, raw in [("height", 120.0), ("weight", 22.0), ("vision", "Normal")]:
        store.record_value("S-RULES", make_value(key, raw, camp_year=2024))
    return store.get_record("S-RULES")


class TestVerdicts:
    def test_numeric_pass(self, student, catalog, schedule):
        findings, referral = run_screening(
            student, [rule("r1", "height", numeric(min=100, max=150))], catalog, schedule, AS_OF)
        assert findings[0].verdict is Verdict.PASS
        assert referral is None

    def test_numeric_fail_builds_referral(self, student, catalog, schedule):
        findings, referral = run_screening(
            student, [rule("r1", "height", numeric(min=130))], catalog, schedule, AS_OF)
        assert findings[0].verdict is Verdict.FAIL
        assert referral is not None
        assert referral.failed_findings == (findings[0],)
        assert referral.status is ReferralStatus.OPEN

    def test_severity_warn_never_refers(self, student, catalog, schedule):
        findings, referral = run_screening(
            student, [rule("r1", "height", numeric(min=130), severity=Severity.WARN)],
            catalog, schedule, AS_OF)
        assert findings[0].verdict is Verdict.WARN
        assert referral is None

    def test_absent_value_warns_not_measured(self, student, catalog, schedule):
        findings, referral = run_screening(
            student, [rule("r1", "muac", numeric(min=12.5))], catalog, schedule, AS_OF)
        assert findings[0].verdict is Verdict.WARN
        assert "not measured" in findings[0].message
        assert referral is None

    def test_required_present_fails_on_absence(self, student, catalog, schedule):
        predicate = Predicate(type=PredicateType.REQUIRED_PRESENT)
        findings, referral = run_screening(
            student, [rule("r1", "muac", predicate)], catalog, schedule, AS_OF)
        assert findings[0].verdict is Verdict.FAIL
        assert referral is not None

    def test_must_equal_on_enum(self, student, catalog, schedule):
        findings, _ = run_screening(
            student, [rule("r1", "vision", must_equal("Normal"))], catalog, schedule, AS_OF)
        assert findings[0].verdict is Verdict.PASS

    def test_age_band_selection(self, student, catalog, schedule):
        # Student is 9 years old at AS_OF; the 6-9 band applies.
        bands = [AgeBand(age_min=4, age_max=5, min=13, max=18),
                 AgeBand(age_min=6, age_max=9, min=13, max=19.5)]
        findings, _ = run_screening(
            student, [rule("r1", "bmi", numeric(bands=bands))], catalog, schedule, AS_OF)
        # BMI = 22.0 / 1.2^2 = 15.28, inside 13..19.5
        assert findings[0].verdict is Verdict.PASS

    def test_no_applicable_band_warns(self, student, catalog, schedule):
        bands = [AgeBand(age_min=13, age_max=16, min=14.5, max=25)]
        findings, referral = run_screening(
            student, [rule("r1", "bmi", numeric(bands=bands))], catalog, schedule, AS_OF)
        assert findings[0].verdict is Verdict.WARN
        assert "band" in findings[0].message.lower()
        assert referral is None

    def test_bmi_pseudo_key_uses_latest_measurements(self, student, catalog, schedule, store, make_value):
        later = datetime(2024, 6, 1, 12, 0, tzinfo=timezone.utc)
        store.record_value("S-RULES", make_value("weight", 50.0, camp_year=2024, at=later))
        record = store.get_record("S-RULES")
        findings, referral = run_screening(
            record, [rule("r1", "bmi", numeric(max=25.0))], catalog, schedule, AS_OF)
        # BMI = 50 / 1.2^2 = 34.72 -> Fail against max 25
        assert findings[0].verdict is Verdict.FAIL
        assert "34.72" in findings[0].observed

    def test_immunization_must_be_complete(self, student, catalog, schedule):
        predicate = Predicate(type=PredicateType.MUST_BE_COMPLETE)
        findings, referral = run_screening(
            student, [rule("r1", "immunization", predicate)], catalog, schedule, AS_OF)
        # 9-year-old with no doses at all: everything overdue -> Fail.
        assert findings[0].verdict is Verdict.FAIL
        assert referral is not None

    def test_immunization_pending_only_warns(self, catalog, schedule, register, store):
        register(screening_id="S-BABY", rfid_token="CARD-BABY", dob="2024-05-25")
        record = store.get_record("S-BABY")
        predicate = Predicate(type=PredicateType.MUST_BE_COMPLETE)
        findings, referral = run_screening(
            record, [rule("r1", "immunization", predicate)], catalog, schedule, AS_OF)
        # One week old: every dose still inside its grace window.
        assert findings[0].verdict is Verdict.WARN
        assert referral is None

    def test_unresolved_key_raises_upfront(self, student, catalog, schedule):
        with pytest.raises(UnresolvedRuleKey):
            run_screening(student, [rule("r1", "Hieght", numeric(min=1))], catalog, schedule, AS_OF)


class TestFindingOrderAndDeterminism:
    def test_catalog_order_with_rule_id_ties(self, student, catalog, schedule):
        rules = [
            rule("z-last", "weight", numeric(min=1)),
            rule("a-first", "weight", numeric(min=1)),
            rule("m-height", "height", numeric(min=1)),
        ]
        findings, _ = run_screening(student, rules, catalog, schedule, AS_OF)
        assert [f.rule_id for f in findings] == ["m-height", "a-first", "z-last"]

    def test_pseudo_keys_anchor_at_catalog_rows(self, student, catalog, schedule):
        rules = [
            rule("r-bmi", "bmi", numeric(min=1)),
            rule("r-imm", "immunization", Predicate(type=PredicateType.MUST_BE_COMPLETE)),
            rule("r-height", "height", numeric(min=1)),
        ]
        findings, _ = run_screening(student, rules, catalog, schedule, AS_OF)
        # Catalog order: vaccination_status (one-time area) < height < bmi.
        assert [f.rule_id for f in findings] == ["r-imm", "r-height", "r-bmi"]

    def test_two_runs_identical_findings(self, student, catalog, schedule, ruleset):
        first, _ = run_screening(student, ruleset, catalog, schedule, AS_OF)
        second, _ = run_screening(student, ruleset, catalog, schedule, AS_OF)
        assert first == second

    def test_rule_independence(self, student, catalog, schedule):
        r1 = rule("r1", "height", numeric(min=130))
        r2 = rule("r2", "weight", numeric(min=1))
        alone, _ = run_screening(student, [r1], catalog, schedule, AS_OF)
        together, _ = run_screening(student, [r1, r2], catalog, schedule, AS_OF)
        assert alone[0] == [f for f in together if f.rule_id == "r1"][0]


class TestReferralIffFailure:
    def test_randomized(self, catalog, schedule, ruleset, register, store, make_value):
        rng = random.Random(99)
        vision_values = ["Normal", "Mild", "Abnormal-Refer"]
        for i in range(40):
            sid = f"S-R{i:03d}"
            register(screening_id=sid, rfid_token=f"CARD-R{i:03d}",
                     dob=f"20{rng.randrange(10, 19):02d}-06-15")
            if rng.random() < 0.8:
                store.record_value(sid, make_value("height", rng.uniform(90, 180), camp_year=2024))
                store.record_value(sid, make_value("weight", rng.uniform(12, 80), camp_year=2024))
            if rng.random() < 0.5:
                store.record_value(sid, make_value("vision", rng.choice(vision_values), camp_year=2024))
            record = store.get_record(sid)
            findings, referral = run_screening(record, ruleset, catalog, schedule, AS_OF)
            fails = tuple(f for f in findings if f.verdict is Verdict.FAIL)
            assert (referral is not None) == bool(fails)
            if referral is not None:
                assert referral.failed_findings == fails


class TestReferralLifecycle:
    def test_legal_transitions(self):
        assert is_legal_transition(ReferralStatus.OPEN, ReferralStatus.SEEN)
        assert is_legal_transition(ReferralStatus.OPEN, ReferralStatus.CLOSED)
        assert is_legal_transition(ReferralStatus.SEEN, ReferralStatus.CLOSED)

    def test_illegal_transitions(self):
        for current, new in [
            (ReferralStatus.SEEN, ReferralStatus.OPEN),
            (ReferralStatus.CLOSED, ReferralStatus.OPEN),
            (ReferralStatus.CLOSED, ReferralStatus.SEEN),
            (ReferralStatus.OPEN, ReferralStatus.OPEN),
        ]:
            assert not is_legal_transition(current, new)

    def test_with_status(self):
        finding = Finding(rule_id="r", parameter_key="height", observed="101",
                          verdict=Verdict.FAIL)
        referral = Referral(referral_id="x", screening_id="S", created_at=datetime.now(timezone.utc),
                            failed_findings=(finding,))
        seen = with_status(referral, ReferralStatus.SEEN, notes="checked")
        assert seen.status is ReferralStatus.SEEN
        assert seen.doctor_notes == "checked"
        assert referral.status is ReferralStatus.OPEN  # original untouched

    def test_referral_requires_failures(self):
        with pytest.raises(ValueError):
            Referral(referral_id="x", screening_id="S",
                     created_at=datetime.now(timezone.utc), failed_findings=())


class TestDiseaseHints:
    def test_cbc_exact_list(self):
        assert lookup_disease_hints("CBC") == [
            "Anemia", "infection", "inflammation", "bleeding disorder", "cancer",
        ]

    def test_unknown_test_empty(self):
        assert lookup_disease_hints("Karyotype") == []

    def test_hbsag_mentions_hepatitis(self):
        hints = lookup_disease_hints("HBsAg")
        assert any("hepatitis B" in h for h in hints)

    def test_parameter_mapping(self):
        assert "Anemia" in hints_for_parameter("cbc_esr")
        assert hints_for_parameter("height") == ()

    def test_fail_findings_carry_hints(self, catalog, schedule, register, store, make_value):
        register(screening_id="S-HINT", rfid_token="CARD-HINT", dob="2014-01-01")
        store.record_value("S-HINT", make_value("cbc_esr", "Abnormal", camp_year=2024))
        record = store.get_record("S-HINT")
        findings, _ = run_screening(
            record, [rule("r1", "cbc_esr", must_equal("Normal"))], catalog, schedule, AS_OF)
        assert findings[0].verdict is Verdict.FAIL
        assert "Anemia" in findings[0].disease_hints


class TestRulesetValidation:
    def test_default_ruleset_clean(self, ruleset, catalog):
        assert validate_ruleset(ruleset, catalog) == []

    def test_typo_key_unresolved(self, catalog):
        issues = validate_ruleset([rule("r1", "Hieght", numeric(min=1))], catalog)
        assert [i.code for i in issues] == ["unresolved_rule_key"]

    def test_numeric_on_boolean_mismatch(self, catalog):
        issues = validate_ruleset([rule("r1", "helminthiasis", numeric(min=0))], catalog)
        assert [i.code for i in issues] == ["predicate_type_mismatch"]

    def test_inverted_range(self, catalog):
        issues = validate_ruleset([rule("r1", "height", numeric(min=150, max=100))], catalog)
        assert [i.code for i in issues] == ["invalid_range"]

    def test_unknown_enum_value(self, catalog):
        issues = validate_ruleset([rule("r1", "vision", must_equal("Perfect"))], catalog)
        assert [i.code for i in issues] == ["unknown_enum_value"]

    def test_must_be_complete_only_on_immunization(self, catalog):
        predicate = Predicate(type=PredicateType.MUST_BE_COMPLETE)
        issues = validate_ruleset([rule("r1", "height", predicate)], catalog)
        assert issues and issues[0].code == "predicate_type_mismatch"
        assert validate_ruleset([rule("r2", "immunization", predicate)], catalog) == []

    def test_parse_rejects_duplicate_rule_ids(self):
        raw = {
            "ruleset_version": "t",
            "rules": [
                {"rule_id": "r1", "parameter_key": "height",
                 "predicate": {"type": "numeric_range", "min": 1}},
                {"rule_id": "r1", "parameter_key": "weight",
                 "predicate": {"type": "numeric_range", "min": 1}},
            ],
        }
        with pytest.raises(MalformedRuleset):
            parse_ruleset(raw)

    def test_parse_round_trip(self):
        raw = {
            "ruleset_version": "t",
            "rules": [
                {"rule_id": "r1", "parameter_key": "height", "severity_on_fail": "warn",
                 "predicate": {"type": "numeric_range", "min": 50, "max": 210}},
            ],
        }
        parsed = parse_ruleset(raw)
        assert isinstance(parsed, Ruleset)
        assert parsed.rules[0].severity_on_fail is Severity.WARN
        assert parsed.rules[0].predicate.min == 50
