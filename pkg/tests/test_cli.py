"""Operator CLI: init, CSV ingestion, batch screening, exports, serve."""

import csv
import json
import socket
from pathlib import Path

import pytest
from click.testing import CliRunner

from hmms import RecordsStore, load_default_catalog
from hmms.cli import main


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def workdir(tmp_path):
    config = tmp_path / "service.json"
    config.write_text(json.dumps({"database_path": str(tmp_path / "camp.db")}) + "\n",
                      encoding="utf-8")
    return tmp_path


def invoke(runner, workdir, *args):
    return runner.invoke(main, ["--config", str(workdir / "service.json"), *args])


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


STUDENTS_HEADER = ["screening_id", "rfid_token", "student_name", "date_of_birth"]
VALUES_HEADER = ["screening_id", "parameter_key", "value", "camp_year", "recorded_at"]
DOSES_HEADER = ["screening_id", "vaccine_code", "dose_number", "given_on"]


def seed_students(runner, workdir, ids=("S-01", "S-02")):
    rows = [[sid, f"CARD-{sid}", f"Student {sid}", "2015-03-10"] for sid in ids]
    path = workdir / "students.csv"
    write_csv(path, STUDENTS_HEADER, rows)
    result = invoke(runner, workdir, "ingest", "students", str(path))
    assert result.exit_code == 0, result.output
    return result


class TestInit:
    def test_init_creates_database(self, runner, workdir):
        result = invoke(runner, workdir, "init")
        assert result.exit_code == 0
        assert "database ready" in result.output
        assert "45 parameters" in result.output
        assert (workdir / "camp.db").exists()

    def test_init_writes_starter_config(self, runner, tmp_path):
        config = tmp_path / "fresh" / "service.json"
        result = runner.invoke(main, ["--config", str(config), "init"])
        assert result.exit_code == 0
        assert "wrote starter config" in result.output
        parsed = json.loads(config.read_text(encoding="utf-8"))
        assert parsed == {"database_path": "hmms.db"}
        assert (config.parent / "hmms.db").exists()  # relative to the config file

    def test_init_seeds_admin(self, runner, workdir):
        result = invoke(runner, workdir, "init", "--admin-user", "boss",
                        "--admin-password", "pw-boss-1")
        assert result.exit_code == 0
        assert "admin account 'boss' created" in result.output
        store = RecordsStore(str(workdir / "camp.db"), load_default_catalog())
        principal = store.authenticate("boss", "pw-boss-1")
        assert principal is not None and principal.role.value == "admin"
        store.close()

    def test_admin_user_requires_password(self, runner, workdir):
        result = invoke(runner, workdir, "init", "--admin-user", "boss")
        assert result.exit_code == 1
        assert "--admin-password" in result.stderr


class TestIngest:
    def test_students_partial_rejection(self, runner, workdir):
        path = workdir / "students.csv"
        write_csv(path, STUDENTS_HEADER, [
            ["S-01", "CARD-01", "Alpha", "2015-03-10"],
            ["S-02", "CARD-02", "Beta", "2014-07-22"],
            ["S-01", "CARD-99", "Alpha Again", "2015-03-10"],  # duplicate id
            ["S-03", "CARD-03", "Gamma", "not-a-date"],
        ])
        report = workdir / "report.json"
        result = invoke(runner, workdir, "ingest", "students", str(path),
                        "--report", str(report))
        assert result.exit_code == 2
        assert "4 rows, 2 ok, 2 rejected" in result.output
        assert "row 4: duplicate_screening_id" in result.output

        parsed = json.loads(report.read_text(encoding="utf-8"))
        assert parsed["rows_ok"] + parsed["rows_rejected"] == parsed["rows_read"]
        assert [r["row"] for r in parsed["rejections"]] == [4, 5]
        store = RecordsStore(str(workdir / "camp.db"), load_default_catalog())
        assert store.list_screening_ids() == ["S-01", "S-02"]
        store.close()

    def test_header_mismatch_is_fatal(self, runner, workdir):
        path = workdir / "students.csv"
        write_csv(path, ["id", "card", "name", "dob"], [["S-01", "C", "A", "2015-01-01"]])
        result = invoke(runner, workdir, "ingest", "students", str(path))
        assert result.exit_code == 1
        assert "header_mismatch" in result.stderr
        store = RecordsStore(str(workdir / "camp.db"), load_default_catalog())
        assert store.list_screening_ids() == []
        store.close()

    def test_values_every_row_attempted(self, runner, workdir):
        seed_students(runner, workdir)
        path = workdir / "values.csv"
        write_csv(path, VALUES_HEADER, [
            ["S-01", "height", "121.5", "2024", "2024-06-01T09:00:00"],
            ["S-01", "weight", "23.0", "2024", "2024-06-01T09:00:00"],
            ["S-01", "hieght", "121.5", "2024", ""],            # unknown parameter
            ["S-99", "height", "121.5", "2024", ""],            # unknown student
            ["S-02", "height", "999", "2024", ""],              # out of range
            ["S-02", "birth_weight", "3.1", "", ""],            # one-time, ok
            ["S-02", "birth_weight", "3.4", "", ""],            # immutable now
            ["S-02", "weight", "21.0", "2024", "2024-06-01T09:00:00"],
        ])
        result = invoke(runner, workdir, "ingest", "values", str(path))
        assert result.exit_code == 2
        assert "8 rows, 4 ok, 4 rejected" in result.output
        for needle in ("unknown_parameter", "unknown_student", "out_of_range",
                       "immutable_parameter"):
            assert needle in result.output, needle

    def test_doses_rejections(self, runner, workdir):
        seed_students(runner, workdir, ids=("S-01",))
        path = workdir / "doses.csv"
        write_csv(path, DOSES_HEADER, [
            ["S-01", "BCG", "1", "2015-03-12"],
            ["S-01", "Pentavalent", "1", "2015-04-21"],
            ["S-01", "HPV", "1", "2020-01-01"],       # unknown vaccine
            ["S-01", "Pentavalent", "9", "2015-04-21"],  # dose number out of range
            ["S-01", "BCG", "1", "2015-03-12"],       # duplicate
            ["S-01", "OPV", "1", "garbage"],          # bad date
        ])
        result = invoke(runner, workdir, "ingest", "doses", str(path))
        assert result.exit_code == 2
        assert "6 rows, 2 ok, 4 rejected" in result.output
        for needle in ("unknown_vaccine_code", "invalid_dose_event", "duplicate_dose",
                       "validation"):
            assert needle in result.output, needle

    def test_clean_file_exits_zero(self, runner, workdir):
        result = seed_students(runner, workdir)
        assert "2 rows, 2 ok, 0 rejected" in result.output


class TestScreen:
    def complete_doses_rows(self, sid):
        return [
            [sid, "BCG", "1", "2015-03-10"],
            [sid, "Pentavalent", "1", "2015-04-21"],
            [sid, "Pentavalent", "2", "2015-05-19"],
            [sid, "Pentavalent", "3", "2015-06-16"],
            [sid, "PCV", "1", "2015-04-21"],
            [sid, "PCV", "2", "2015-05-19"],
            [sid, "PCV", "3", "2015-06-16"],
            [sid, "OPV", "1", "2015-04-21"],
            [sid, "OPV", "2", "2015-05-19"],
            [sid, "OPV", "3", "2015-06-16"],
            [sid, "IPV", "1", "2015-04-21"],
            [sid, "IPV", "2", "2015-06-16"],
            [sid, "MR-1", "1", "2015-12-10"],
            [sid, "MR-2", "1", "2016-06-10"],
        ]

    def test_batch_screen_counts_and_report(self, runner, workdir):
        seed_students(runner, workdir)  # S-01 incomplete, S-02 will be complete
        doses = workdir / "doses.csv"
        write_csv(doses, DOSES_HEADER, self.complete_doses_rows("S-02"))
        assert invoke(runner, workdir, "ingest", "doses", str(doses)).exit_code == 0

        report = workdir / "screen.json"
        result = invoke(runner, workdir, "screen", "--as-of", "2024-06-01",
                        "--report", str(report))
        assert result.exit_code == 0
        assert "screened 2 students, created 1 referrals" in result.output

        parsed = json.loads(report.read_text(encoding="utf-8"))
        assert parsed["screened"] == 2 and parsed["referrals_created"] == 1
        assert parsed["students"]["S-01"]["referral_id"] is not None
        assert parsed["students"]["S-02"]["referral_id"] is None
        assert parsed["students"]["S-01"]["failed"] >= 1

        store = RecordsStore(str(workdir / "camp.db"), load_default_catalog())
        record = store.get_record("S-01")
        assert len(record.referrals) == 1
        assert store.get_record("S-02").referrals == ()
        store.close()

    def test_bad_as_of(self, runner, workdir):
        invoke(runner, workdir, "init")
        result = invoke(runner, workdir, "screen", "--as-of", "June 1st")
        assert result.exit_code == 1
        assert "ISO date" in result.stderr


class TestExportCohort:
    def seed_measurements(self, runner, workdir):
        seed_students(runner, workdir)
        values = workdir / "values.csv"
        write_csv(values, VALUES_HEADER, [
            ["S-01", "height", "121.5", "2024", "2024-06-01T09:00:00"],
            ["S-01", "weight", "23.0", "2024", "2024-06-01T09:00:00"],
            ["S-02", "height", "130.0", "2024", "2024-06-01T09:00:00"],
        ])
        assert invoke(runner, workdir, "ingest", "values", str(values)).exit_code == 0

    def test_export_is_deterministic(self, runner, workdir):
        self.seed_measurements(runner, workdir)
        args = ["export-cohort", "--age-min", "4", "--age-max", "16",
                "--features", "height,weight,bmi", "--as-of", "2024-06-01"]
        first, second = workdir / "a.csv", workdir / "b.csv"
        assert invoke(runner, workdir, *args, "--out", str(first)).exit_code == 0
        assert invoke(runner, workdir, *args, "--out", str(second)).exit_code == 0
        assert first.read_bytes() == second.read_bytes()
        lines = first.read_text(encoding="utf-8").strip().splitlines()
        assert lines[0] == "screening_id,height,weight,bmi"
        assert lines[1] == "S-01,121.5,23,15.58"
        assert len(lines) == 2  # S-02 lacks weight and is dropped

    def test_include_incomplete_keeps_blanks(self, runner, workdir):
        self.seed_measurements(runner, workdir)
        out = workdir / "c.csv"
        result = invoke(runner, workdir, "export-cohort", "--age-min", "4",
                        "--age-max", "16", "--features", "height,weight",
                        "--as-of", "2024-06-01", "--include-incomplete",
                        "--out", str(out))
        assert result.exit_code == 0
        lines = out.read_text(encoding="utf-8").strip().splitlines()
        assert lines == ["screening_id,height,weight", "S-01,121.5,23", "S-02,130,"]

    def test_unknown_feature_is_fatal(self, runner, workdir):
        seed_students(runner, workdir)
        result = invoke(runner, workdir, "export-cohort", "--age-min", "4",
                        "--age-max", "16", "--features", "height,shoe_size",
                        "--out", str(workdir / "x.csv"))
        assert result.exit_code == 1
        assert "unresolved_feature_key" in result.stderr


class TestRuleset:
    def test_validate_packaged_default(self, runner, workdir):
        from hmms.screening import default_ruleset_path

        result = invoke(runner, workdir, "ruleset", "validate",
                        str(default_ruleset_path()))
        assert result.exit_code == 0
        assert "OK" in result.output

    def test_validate_reports_issues(self, runner, workdir):
        bad = workdir / "bad.json"
        bad.write_text(json.dumps({
            "ruleset_version": "bad-1",
            "rules": [
                {"rule_id": "r1", "parameter_key": "hieght",
                 "predicate": {"type": "numeric_range", "min": 1, "max": 2},
                 "severity_on_fail": "fail", "message": "m"},
            ],
        }), encoding="utf-8")
        result = invoke(runner, workdir, "ruleset", "validate", str(bad))
        assert result.exit_code == 1
        assert "unresolved_rule_key" in result.output

    def test_validate_not_json(self, runner, workdir):
        bad = workdir / "bad.json"
        bad.write_text("{not json", encoding="utf-8")
        result = invoke(runner, workdir, "ruleset", "validate", str(bad))
        assert result.exit_code == 1
        assert "malformed_ruleset" in result.stderr

    def test_install_copies_into_config_path(self, runner, tmp_path):
        from hmms.screening import default_ruleset_path

        installed = tmp_path / "active-rules.json"
        installed.write_text(Path(default_ruleset_path()).read_text(encoding="utf-8"),
                             encoding="utf-8")
        config = tmp_path / "service.json"
        config.write_text(json.dumps({
            "database_path": str(tmp_path / "camp.db"),
            "ruleset_path": str(installed),
        }), encoding="utf-8")

        candidate = tmp_path / "candidate.json"
        candidate.write_text(json.dumps({
            "ruleset_version": "muac-only-1",
            "rules": [
                {"rule_id": "muac-min", "parameter_key": "muac",
                 "predicate": {"type": "numeric_range", "min": 12.5},
                 "severity_on_fail": "fail", "message": "MUAC below cutoff"},
            ],
        }), encoding="utf-8")
        result = runner.invoke(main, ["--config", str(config), "ruleset", "install",
                                      str(candidate)])
        assert result.exit_code == 0, result.output
        assert "installed ruleset 'muac-only-1'" in result.output
        assert json.loads(installed.read_text(encoding="utf-8"))["ruleset_version"] == \
            "muac-only-1"

    def test_install_requires_configured_path(self, runner, workdir):
        from hmms.screening import default_ruleset_path

        result = invoke(runner, workdir, "ruleset", "install",
                        str(default_ruleset_path()))
        assert result.exit_code == 1
        assert "no ruleset_path" in result.stderr


class TestServe:
    def test_port_busy_diagnostic(self, runner, workdir):
        blocker = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        blocker.bind(("127.0.0.1", 0))
        blocker.listen(1)
        port = blocker.getsockname()[1]
        try:
            result = invoke(runner, workdir, "serve", "--port", str(port))
        finally:
            blocker.close()
        assert result.exit_code == 1
        assert f"cannot bind 127.0.0.1:{port}" in result.stderr


class TestConfigErrors:
    def test_unknown_config_key(self, runner, tmp_path):
        config = tmp_path / "service.json"
        config.write_text(json.dumps({"database_path": "x.db", "databse_path": "y"}),
                          encoding="utf-8")
        result = runner.invoke(main, ["--config", str(config), "init"])
        assert result.exit_code == 1
        assert "malformed_config" in result.stderr

    def test_missing_config_file(self, runner, tmp_path):
        result = runner.invoke(main, ["--config", str(tmp_path / "nope.json"), "screen"])
        assert result.exit_code == 1
