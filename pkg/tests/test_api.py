"""API contract: authentication, per-route authorization, status mapping."""

import pytest

from tests.conftest import seed_full_student

ROLES = ("admin", "nurse", "doctor", "student")


def login(api, role):
    return api.headers(role)


class TestAuthentication:
    def test_login_bad_credentials(self, api):
        response = api.client.post("/api/v1/login", json={"username": "nurse", "password": "wrong"})
        assert response.status_code == 401
        assert response.json()["error"]["code"] == "unauthenticated"

    def test_missing_token(self, api):
        response = api.client.get("/api/v1/students/S-SELF")
        assert response.status_code == 401

    def test_garbage_token(self, api):
        response = api.client.get("/api/v1/students/S-SELF",
                                  headers={"Authorization": "Bearer nonsense"})
        assert response.status_code == 401

    def test_logout_invalidates(self, api):
        response = api.client.post("/api/v1/login",
                                   json={"username": "nurse", "password": "pw-nurse-1"})
        token = response.json()["token"]
        headers = {"Authorization": f"Bearer {token}"}
        assert api.client.get("/api/v1/catalog", headers=headers).status_code == 200
        assert api.client.post("/api/v1/logout", headers=headers).status_code == 200
        assert api.client.get("/api/v1/catalog", headers=headers).status_code == 401

    def test_healthz_needs_no_auth(self, api):
        response = api.client.get("/api/v1/healthz")
        assert response.status_code == 200
        body = response.json()
        assert body["status"] == "ok"
        assert body["api_version"] == "1"
        assert "45 parameters" in body["checks"]["catalog"]

    def test_catalog_any_authenticated_role(self, api):
        for role in ROLES:
            response = api.client.get("/api/v1/catalog", headers=api.headers(role))
            assert response.status_code == 200, role
            assert len(response.json()["parameters"]) == 45


# Route matrix: (name, method, path, body, success status, allowed roles).
# Paths may reference the seeded student S-MTRX; referral id and staff id are
# substituted at call time.
def matrix_cases():
    return [
        ("register", "POST", "/api/v1/students",
         lambda role: {"rfid_token": f"CARD-NEW-{role}", "values": {
             "screening_id": f"S-NEW-{role}", "student_name": "New Kid",
             "date_of_birth": "2016-04-01"}},
         201, {"nurse"}),
        ("search", "GET", "/api/v1/students?q=S-MTRX", None, 200, {"nurse", "doctor"}),
        ("get_record", "GET", "/api/v1/students/S-MTRX", None, 200,
         {"admin", "nurse", "doctor"}),
        ("get_basic", "GET", "/api/v1/students/S-MTRX/basic", None, 200,
         {"admin", "nurse", "doctor"}),
        ("post_value", "POST", "/api/v1/students/S-MTRX/values",
         lambda role: {"key": "muac", "value": 14.5, "camp_year": 2024}, 201, {"nurse"}),
        ("put_value", "PUT", "/api/v1/students/S-MTRX/values",
         lambda role: {"key": "height", "value": 124.0, "camp_year": 2024}, 200, {"nurse"}),
        ("post_dose", "POST", "/api/v1/students/S-MTRX/doses",
         lambda role: {"vaccine_code": "MR-1", "dose_number": 1, "given_on": "2014-03-01"},
         201, {"nurse"}),
        ("punch", "POST", "/api/v1/punch",
         lambda role: {"rfid_token": "CARD-MTRX"}, 200, {"nurse", "doctor"}),
        ("screen", "POST", "/api/v1/students/S-MTRX/screen", lambda role: {}, 200, {"nurse"}),
        ("referrals", "GET", "/api/v1/students/S-MTRX/referrals", None, 200,
         {"admin", "nurse", "doctor"}),
        ("patch_referral", "PATCH", "/api/v1/referrals/{referral_id}",
         lambda role: {"status": "Seen", "doctor_notes": "reviewed"}, 200, {"nurse"}),
        ("print", "GET", "/api/v1/students/S-MTRX/print", None, 200, {"nurse", "doctor"}),
        ("me_minimal", "GET", "/api/v1/me/minimal", None, 200, {"student"}),
        ("staff_list", "GET", "/api/v1/staff", None, 200, {"admin"}),
        ("staff_create", "POST", "/api/v1/staff",
         lambda role: {"username": f"extra-{role}", "display_name": "Extra",
                       "role": "doctor", "password": "pw-extra-123"}, 201, {"admin"}),
        ("staff_update", "PATCH", "/api/v1/staff/{staff_id}",
         lambda role: {"display_name": "Renamed"}, 200, {"admin"}),
        ("staff_delete", "DELETE", "/api/v1/staff/{staff_id}", None, 200, {"admin"}),
        ("ruleset_validate", "POST", "/api/v1/rulesets/validate",
         lambda role: {"ruleset_version": "t", "rules": []}, 200, {"admin"}),
        ("export_cohort", "POST", "/api/v1/export/cohort",
         lambda role: {"age_min": 4, "age_max": 16, "features": ["height"],
                       "include_incomplete": True}, 200, {"admin"}),
        ("delete_health_data", "DELETE", "/api/v1/students/S-MTRX/health-data", None,
         200, {"admin"}),
        ("purge_student", "DELETE", "/api/v1/students/S-MTRX", None, 200, {"admin"}),
    ]


class TestRouteRoleMatrix:
    def test_every_route_with_every_role(self, api):
        from hmms import Role

        seed_full_student(api, screening_id="S-MTRX", rfid_token="CARD-MTRX")

        # Prerequisites for PATCH /referrals and /staff routes.
        screen = api.client.post("/api/v1/students/S-MTRX/screen",
                                 headers=api.headers("nurse"), json={})
        assert screen.status_code == 200
        referral_id = screen.json()["referral"]["referral_id"]
        spare = api.store.create_principal("spare-doc", "Spare", Role.DOCTOR, "pw-spare-123")

        for name, method, path, body, success, allowed in matrix_cases():
            for role in ROLES:
                concrete = path.replace("{referral_id}", referral_id)
                concrete = concrete.replace("{staff_id}", spare.principal_id)
                payload = body(role) if callable(body) else body
                response = api.client.request(method, concrete, headers=api.headers(role),
                                              json=payload)
                if role in allowed:
                    assert response.status_code == success, (name, role, response.text)
                else:
                    assert response.status_code == 403, (name, role, response.text)
                    assert response.json()["error"]["code"] == "forbidden"
                if name == "patch_referral" and role in allowed:
                    # Only one legal transition from Open; later roles are denied anyway.
                    continue

    def test_deny_leaves_no_trace(self, api):
        seed_full_student(api, screening_id="S-DENY", rfid_token="CARD-DENY")
        before = len(api.store.get_record("S-DENY").observations.get("muac", ()))
        response = api.client.post("/api/v1/students/S-DENY/values",
                                   headers=api.headers("doctor"),
                                   json={"key": "muac", "value": 15.0, "camp_year": 2024})
        assert response.status_code == 403
        after = len(api.store.get_record("S-DENY").observations.get("muac", ()))
        assert before == after


class TestStatusMapping:
    def test_unknown_student_404(self, api):
        response = api.client.get("/api/v1/students/S-GHOST", headers=api.headers("nurse"))
        assert response.status_code == 404
        assert response.json()["error"]["code"] == "unknown_student"

    def test_unknown_card_404(self, api):
        response = api.client.post("/api/v1/punch", headers=api.headers("doctor"),
                                   json={"rfid_token": "CARD-GHOST"})
        assert response.status_code == 404
        assert response.json()["error"]["code"] == "unknown_card"

    def test_unknown_referral_404(self, api):
        response = api.client.patch("/api/v1/referrals/nope", headers=api.headers("nurse"),
                                    json={"status": "Seen"})
        assert response.status_code == 404

    def test_duplicate_registration_409(self, api):
        body = {"rfid_token": "CARD-DUP", "values": {
            "screening_id": "S-DUP", "student_name": "Dup", "date_of_birth": "2015-01-01"}}
        assert api.client.post("/api/v1/students", headers=api.headers("nurse"),
                               json=body).status_code == 201
        response = api.client.post("/api/v1/students", headers=api.headers("nurse"), json=body)
        assert response.status_code == 409
        assert response.json()["error"]["code"] == "duplicate_screening_id"

    def test_one_time_rewrite_409(self, api):
        seed_full_student(api, screening_id="S-IMM", rfid_token="CARD-IMM")
        body = {"key": "birth_weight", "value": 3.0}
        assert api.client.post("/api/v1/students/S-IMM/values", headers=api.headers("nurse"),
                               json=body).status_code == 201
        response = api.client.post("/api/v1/students/S-IMM/values",
                                   headers=api.headers("nurse"),
                                   json={"key": "birth_weight", "value": 3.4})
        assert response.status_code == 409
        assert response.json()["error"]["code"] == "immutable_parameter"

    def test_duplicate_dose_409(self, api):
        seed_full_student(api, screening_id="S-DOSE", rfid_token="CARD-DOSE")
        body = {"vaccine_code": "BCG", "dose_number": 1, "given_on": "2013-06-01"}
        response = api.client.post("/api/v1/students/S-DOSE/doses",
                                   headers=api.headers("nurse"), json=body)
        assert response.status_code == 409  # BCG 1 already seeded
        assert response.json()["error"]["code"] == "duplicate_dose"

    def test_illegal_transition_409(self, api):
        seed_full_student(api, screening_id="S-TRANS", rfid_token="CARD-TRANS")
        screen = api.client.post("/api/v1/students/S-TRANS/screen",
                                 headers=api.headers("nurse"), json={})
        referral_id = screen.json()["referral"]["referral_id"]
        patch = lambda status: api.client.patch(  # noqa: E731
            f"/api/v1/referrals/{referral_id}", headers=api.headers("nurse"),
            json={"status": status})
        assert patch("Closed").status_code == 200
        response = patch("Seen")
        assert response.status_code == 409
        assert response.json()["error"]["code"] == "illegal_transition"

    def test_bad_enum_value_422(self, api):
        seed_full_student(api, screening_id="S-ENUM", rfid_token="CARD-ENUM")
        response = api.client.post("/api/v1/students/S-ENUM/values",
                                   headers=api.headers("nurse"),
                                   json={"key": "vision", "value": "Perfect", "camp_year": 2024})
        assert response.status_code == 422
        assert response.json()["error"]["code"] == "unknown_enum_value"

    def test_missing_camp_year_422(self, api):
        seed_full_student(api, screening_id="S-CAMP", rfid_token="CARD-CAMP")
        response = api.client.post("/api/v1/students/S-CAMP/values",
                                   headers=api.headers("nurse"),
                                   json={"key": "height", "value": 120.0})
        assert response.status_code == 422
        assert response.json()["error"]["code"] == "type_mismatch"

    def test_unknown_vaccine_422(self, api):
        seed_full_student(api, screening_id="S-VAX", rfid_token="CARD-VAX")
        response = api.client.post("/api/v1/students/S-VAX/doses",
                                   headers=api.headers("nurse"),
                                   json={"vaccine_code": "HPV", "dose_number": 1,
                                         "given_on": "2020-01-01"})
        assert response.status_code == 422
        assert response.json()["error"]["code"] == "unknown_vaccine_code"

    def test_malformed_body_400(self, api):
        response = api.client.post("/api/v1/students", headers=api.headers("nurse"),
                                   json={"rfid_token": 5})
        assert response.status_code == 400
        assert response.json()["error"]["code"] == "validation"

    def test_bad_referral_status_string_400(self, api):
        response = api.client.patch("/api/v1/referrals/whatever",
                                    headers=api.headers("nurse"),
                                    json={"status": "Paused"})
        assert response.status_code == 400


class TestRecordShaping:
    def test_doctor_punch_includes_old_history(self, api):
        seed_full_student(api, screening_id="S-HIST", rfid_token="CARD-HIST")
        response = api.client.post("/api/v1/punch", headers=api.headers("doctor"),
                                   json={"rfid_token": "CARD-HIST"})
        record = response.json()["record"]
        assert "old_observations" in record
        assert record["recent_observations"]["height"]["value"] == 123.5
        assert [v["value"] for v in record["old_observations"]["height"]] == [118.0]
        assert record["immunization"]["overall"] == "Incomplete"

    def test_nurse_punch_recent_only(self, api):
        seed_full_student(api, screening_id="S-HIST2", rfid_token="CARD-HIST2")
        response = api.client.post("/api/v1/punch", headers=api.headers("nurse"),
                                   json={"rfid_token": "CARD-HIST2"})
        record = response.json()["record"]
        assert "old_observations" not in record
        assert record["recent_observations"]["height"]["value"] == 123.5

    def test_screen_persists_referral(self, api):
        seed_full_student(api, screening_id="S-SCRN", rfid_token="CARD-SCRN")
        response = api.client.post("/api/v1/students/S-SCRN/screen",
                                   headers=api.headers("nurse"), json={"as_of": "2024-06-01"})
        body = response.json()
        assert body["referral"] is not None
        failed = [f for f in body["findings"] if f["verdict"] == "Fail"]
        assert [f["rule_id"] for f in body["referral"]["failed_findings"]] == \
            [f["rule_id"] for f in failed]
        listing = api.client.get("/api/v1/students/S-SCRN/referrals",
                                 headers=api.headers("doctor"))
        assert [r["referral_id"] for r in listing.json()["referrals"]] == \
            [body["referral"]["referral_id"]]

    def test_student_minimal_view_allow_list(self, api):
        response = api.client.get("/api/v1/me/minimal", headers=api.headers("student"))
        view = response.json()["view"]
        assert set(view) == {"screening_id", "student_name", "present_class", "height_cm",
                             "weight_kg", "bmi", "immunization", "notices"}
        assert view["screening_id"] == "S-SELF"

    def test_print_is_selfcontained_html(self, api):
        seed_full_student(api, screening_id="S-PRN", rfid_token="CARD-PRN")
        response = api.client.get("/api/v1/students/S-PRN/print", headers=api.headers("nurse"))
        assert response.status_code == 200
        assert response.headers["content-type"].startswith("text/html")
        assert "<!DOCTYPE html>" in response.text
        assert "S-PRN" in response.text
        assert "Seeded Student" in response.text

    def test_get_routes_audit_view_only(self, api):
        seed_full_student(api, screening_id="S-AUD", rfid_token="CARD-AUD")
        before = api.store.audit_entries()[-1].seq
        api.client.get("/api/v1/students/S-AUD", headers=api.headers("doctor"))
        entries = api.store.audit_entries(after_seq=before)
        assert [e.action.value for e in entries] == ["View"]
        record = api.store.get_record("S-AUD")  # unchanged beyond the audit entry
        assert len(record.observations["height"]) == 2

    def test_cohort_export_csv(self, api):
        seed_full_student(api, screening_id="S-CSV", rfid_token="CARD-CSV")
        response = api.client.post("/api/v1/export/cohort", headers=api.headers("admin"),
                                   json={"age_min": 4, "age_max": 16,
                                         "features": ["height", "weight", "bmi"]})
        assert response.headers["content-type"].startswith("text/csv")
        lines = response.text.strip().splitlines()
        assert lines[0] == "screening_id,height,weight,bmi"
        row = next(l for l in lines if l.startswith("S-CSV"))
        assert row == "S-CSV,123.5,24,15.74"
