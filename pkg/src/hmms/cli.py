"""Operator command line: bootstrap, CSV ingestion, batch screening, exports.

Exit codes: 0 full success, 2 partial ingest rejection, 1 fatal error.
The store is opened per invocation; running the CLI against a database a
server is actively writing is unsupported (single-writer embedded store).
"""

from __future__ import annotations

import csv
import json
import shutil
import sys
from dataclasses import replace
from datetime import date, datetime, timezone
from pathlib import Path

import click

from .api import check_port_available, create_app
from .catalog import ParameterCatalog, default_catalog_path, load_catalog, validate_value
from .cohort import CohortQuery, build_cohort, write_cohort_csv
from .config import ServiceConfig, load_config
from .errors import (
    FileUnreadable,
    HeaderMismatch,
    HmmsError,
    InvalidDoseEvent,
    UnknownParameter,
    UnknownVaccineCode,
)
from .immunization import DoseEvent, ImmunizationSchedule, default_schedule_path, load_schedule
from .screening import (
    Ruleset,
    default_ruleset_path,
    load_ruleset,
    parse_ruleset,
    run_screening,
    screen_all,
    validate_ruleset,
)
from .store import AuditAction, RecordsStore

STUDENTS_HEADER = ["screening_id", "rfid_token", "student_name", "date_of_birth"]
VALUES_HEADER = ["screening_id", "parameter_key", "value", "camp_year", "recorded_at"]
DOSES_HEADER = ["screening_id", "vaccine_code", "dose_number", "given_on"]

CLI_OPERATOR = "cli"


class Runtime:
    """Everything a subcommand needs, loaded from one config."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.catalog: ParameterCatalog = load_catalog(config.catalog_path or default_catalog_path())
        self.schedule: ImmunizationSchedule = load_schedule(config.schedule_path or default_schedule_path())
        self.ruleset: Ruleset = load_ruleset(config.ruleset_path or default_ruleset_path())
        self.store = RecordsStore(config.database_path, self.catalog)


def _fatal(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


def _runtime(ctx: click.Context) -> Runtime:
    try:
        config = load_config(ctx.obj.get("config_path"))
        return Runtime(config)
    except HmmsError as exc:
        _fatal(f"{exc.code}: {exc}")
        raise AssertionError("unreachable")


@click.group()
@click.option(
    "--config", "config_path", envvar="HMMS_CONFIG", default=None,
    type=click.Path(dir_okay=False), help="Path to the service config JSON.",
)
@click.pass_context
def main(ctx: click.Context, config_path: str | None):
    """School health monitoring and management system."""
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path


@main.command()
@click.option("--admin-user", default=None, help="Seed an admin account with this username.")
@click.option("--admin-password", default=None, help="Password for the seeded admin account.")
@click.pass_context
def init(ctx: click.Context, admin_user: str | None, admin_password: str | None):
    """Create the database (and a starter config when --config names a new file)."""
    config_path = ctx.obj.get("config_path")
    if config_path and not Path(config_path).exists():
        Path(config_path).parent.mkdir(parents=True, exist_ok=True)
        Path(config_path).write_text(json.dumps({"database_path": "hmms.db"}, indent=2) + "\n",
                                     encoding="utf-8")
        click.echo(f"wrote starter config to {config_path}")
    runtime = _runtime(ctx)
    click.echo(f"database ready at {runtime.config.database_path}")
    click.echo(f"catalog: {len(runtime.catalog)} parameters; "
               f"schedule: {runtime.schedule.total_doses()} doses; "
               f"ruleset: {len(runtime.ruleset.rules)} rules")
    if admin_user:
        if not admin_password:
            _fatal("--admin-user requires --admin-password")
        from .access import Role

        try:
            runtime.store.create_principal(admin_user, admin_user, Role.ADMIN,
                                           admin_password, acting_principal=CLI_OPERATOR)
        except HmmsError as exc:
            _fatal(f"{exc.code}: {exc}")
        click.echo(f"admin account {admin_user!r} created")


def _read_csv(path: str, expected_header: list[str]) -> list[list[str]]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise FileUnreadable(f"cannot read {path}: {exc}") from exc
    if not rows or rows[0] != expected_header:
        raise HeaderMismatch(
            f"{path}: expected header {','.join(expected_header)}",
            expected=expected_header, got=rows[0] if rows else [],
        )
    return rows[1:]


def _parse_recorded_at(cell: str) -> datetime:
    if not cell.strip():
        return datetime.now(timezone.utc)
    parsed = datetime.fromisoformat(cell.strip())
    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=timezone.utc)
    return parsed


def _ingest_students(runtime: Runtime, rows: list[list[str]]) -> list[tuple[int, str, str]]:
    rejections = []
    for i, row in enumerate(rows, start=2):
        try:
            if len(row) != len(STUDENTS_HEADER):
                raise HeaderMismatch(f"expected {len(STUDENTS_HEADER)} columns, got {len(row)}")
            screening_id, rfid_token, student_name, dob = row
            now = datetime.now(timezone.utc)
            values = {
                key: validate_value(runtime.catalog[key], raw, recorded_at=now,
                                    recorded_by=CLI_OPERATOR)
                for key, raw in (
                    ("screening_id", screening_id),
                    ("student_name", student_name),
                    ("date_of_birth", dob),
                )
            }
            runtime.store.register_student(values, rfid_token, recorded_by=CLI_OPERATOR)
        except HmmsError as exc:
            rejections.append((i, exc.code, str(exc)))
    return rejections


def _ingest_values(runtime: Runtime, rows: list[list[str]]) -> list[tuple[int, str, str]]:
    rejections = []
    for i, row in enumerate(rows, start=2):
        try:
            if len(row) != len(VALUES_HEADER):
                raise HeaderMismatch(f"expected {len(VALUES_HEADER)} columns, got {len(row)}")
            screening_id, key, raw, camp_year_cell, recorded_at_cell = row
            definition = runtime.catalog.get(key)
            if definition is None:
                raise UnknownParameter(f"{key!r} is not in the catalog", key=key)
            camp_year = int(camp_year_cell) if camp_year_cell.strip() else None
            value = validate_value(
                definition, raw,
                recorded_at=_parse_recorded_at(recorded_at_cell),
                camp_year=camp_year,
                recorded_by=CLI_OPERATOR,
            )
            runtime.store.record_value(screening_id, value)
        except HmmsError as exc:
            rejections.append((i, exc.code, str(exc)))
        except ValueError as exc:
            rejections.append((i, "validation", str(exc)))
    return rejections


def _ingest_doses(runtime: Runtime, rows: list[list[str]]) -> list[tuple[int, str, str]]:
    rejections = []
    for i, row in enumerate(rows, start=2):
        try:
            if len(row) != len(DOSES_HEADER):
                raise HeaderMismatch(f"expected {len(DOSES_HEADER)} columns, got {len(row)}")
            screening_id, code, number_cell, given_cell = row
            spec = runtime.schedule.by_code(code)
            if spec is None:
                raise UnknownVaccineCode(f"{code!r} is not in the schedule", vaccine_code=code)
            number = int(number_cell)
            if not 1 <= number <= spec.dose_count:
                raise InvalidDoseEvent(f"{code} has doses 1..{spec.dose_count}, got {number}",
                                       vaccine_code=code, dose_number=number)
            dose = DoseEvent(vaccine_code=code, dose_number=number,
                             given_on=date.fromisoformat(given_cell.strip()))
            runtime.store.record_dose(screening_id, dose, recorded_by=CLI_OPERATOR)
        except HmmsError as exc:
            rejections.append((i, exc.code, str(exc)))
        except ValueError as exc:
            rejections.append((i, "validation", str(exc)))
    return rejections


@main.command()
@click.argument("kind", type=click.Choice(["students", "values", "doses"]))
@click.argument("path", type=click.Path(dir_okay=False))
@click.option("--report", "report_path", default=None, type=click.Path(dir_okay=False),
              help="Write a machine-readable ingest report to this path.")
@click.pass_context
def ingest(ctx: click.Context, kind: str, path: str, report_path: str | None):
    """Batch-load a camp CSV file; every row is attempted."""
    runtime = _runtime(ctx)
    header = {"students": STUDENTS_HEADER, "values": VALUES_HEADER, "doses": DOSES_HEADER}[kind]
    try:
        rows = _read_csv(path, header)
    except HmmsError as exc:
        _fatal(f"{exc.code}: {exc}")
        return
    worker = {"students": _ingest_students, "values": _ingest_values, "doses": _ingest_doses}[kind]
    rejections = worker(runtime, rows)

    rows_read = len(rows)
    rows_ok = rows_read - len(rejections)
    click.echo(f"ingest {kind} from {path}: {rows_read} rows, {rows_ok} ok, {len(rejections)} rejected")
    for line, code, message in rejections:
        click.echo(f"  row {line}: {code}: {message}")

    if report_path:
        report = {
            "kind": kind,
            "path": path,
            "rows_read": rows_read,
            "rows_ok": rows_ok,
            "rows_rejected": len(rejections),
            "rejections": [
                {"row": line, "code": code, "message": message}
                for line, code, message in rejections
            ],
        }
        Path(report_path).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    if rejections:
        sys.exit(2)


@main.command()
@click.option("--as-of", "as_of_cell", default=None, help="Screening date (ISO), default today.")
@click.option("--report", "report_path", default=None, type=click.Path(dir_okay=False),
              help="Write a machine-readable batch report to this path.")
@click.pass_context
def screen(ctx: click.Context, as_of_cell: str | None, report_path: str | None):
    """Run the installed ruleset over every student; persist new referrals."""
    runtime = _runtime(ctx)
    try:
        as_of = date.fromisoformat(as_of_cell) if as_of_cell else date.today()
    except ValueError:
        _fatal("--as-of must be an ISO date")
        return

    records = (runtime.store.get_record(sid) for sid in runtime.store.list_screening_ids())
    results = screen_all(records, runtime.ruleset, runtime.catalog, runtime.schedule, as_of)

    referrals_created = 0
    per_student: dict[str, dict] = {}
    for screening_id, (findings, referral) in results.items():
        if referral is not None:
            runtime.store.persist_referral(referral, principal=CLI_OPERATOR)
            referrals_created += 1
        runtime.store.append_audit(
            CLI_OPERATOR, AuditAction.SCREEN, f"student:{screening_id}",
            f"batch screening: {len(findings)} findings",
        )
        per_student[screening_id] = {
            "findings": len(findings),
            "failed": sum(1 for f in findings if f.verdict.value == "Fail"),
            "referral_id": referral.referral_id if referral else None,
        }
    screened = len(results)

    click.echo(f"screened {screened} students, created {referrals_created} referrals")
    if report_path:
        report = {
            "as_of": as_of.isoformat(),
            "screened": screened,
            "referrals_created": referrals_created,
            "students": per_student,
        }
        Path(report_path).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")


@main.command("export-cohort")
@click.option("--age-min", required=True, type=int)
@click.option("--age-max", required=True, type=int)
@click.option("--features", required=True,
              help="Comma-separated catalog keys or derived keys (bmi, immunization_status).")
@click.option("--as-of", "as_of_cell", default=None, help="Evaluation date (ISO), default today.")
@click.option("--include-incomplete", is_flag=True, default=False,
              help="Keep rows with missing features, emitting blanks.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.pass_context
def export_cohort(ctx: click.Context, age_min: int, age_max: int, features: str,
                  as_of_cell: str | None, include_incomplete: bool, out_path: str):
    """Export a feature matrix CSV for students in an age range."""
    runtime = _runtime(ctx)
    try:
        as_of = date.fromisoformat(as_of_cell) if as_of_cell else date.today()
    except ValueError:
        _fatal("--as-of must be an ISO date")
        return
    try:
        query = CohortQuery(
            age_min=age_min,
            age_max=age_max,
            features=tuple(f.strip() for f in features.split(",") if f.strip()),
            as_of=as_of,
            include_incomplete=include_incomplete,
        )
        header, rows = build_cohort(runtime.store, runtime.catalog, runtime.schedule, query)
        write_cohort_csv(out_path, header, rows)
    except HmmsError as exc:
        _fatal(f"{exc.code}: {exc}")
        return
    click.echo(f"wrote {len(rows)} rows ({len(header)} columns) to {out_path}")


@main.group()
def ruleset():
    """Validate or install clinical rulesets."""


@ruleset.command("validate")
@click.argument("path", type=click.Path(dir_okay=False))
@click.pass_context
def ruleset_validate(ctx: click.Context, path: str):
    """Check a candidate ruleset against the catalog; exit nonzero on issues."""
    runtime = _runtime(ctx)
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        _fatal(f"file_unreadable: {exc}")
        return
    except json.JSONDecodeError as exc:
        _fatal(f"malformed_ruleset: {path} is not valid JSON: {exc}")
        return
    try:
        candidate = parse_ruleset(raw)
    except HmmsError as exc:
        _fatal(f"{exc.code}: {exc}")
        return
    issues = validate_ruleset(candidate, runtime.catalog)
    if issues:
        click.echo(f"ruleset {candidate.version!r}: {len(issues)} issue(s)")
        for issue in issues:
            click.echo(f"  {issue.rule_id}: {issue.code}: {issue.message}")
        sys.exit(1)
    click.echo(f"ruleset {candidate.version!r} OK ({len(candidate.rules)} rules)")


@ruleset.command("install")
@click.argument("path", type=click.Path(dir_okay=False))
@click.pass_context
def ruleset_install(ctx: click.Context, path: str):
    """Validate a ruleset and copy it to the configured ruleset path."""
    runtime = _runtime(ctx)
    if runtime.config.ruleset_path is None:
        _fatal("config has no ruleset_path; set one before installing")
        return
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        candidate = parse_ruleset(raw)
    except OSError as exc:
        _fatal(f"file_unreadable: {exc}")
        return
    except json.JSONDecodeError as exc:
        _fatal(f"malformed_ruleset: {path} is not valid JSON: {exc}")
        return
    except HmmsError as exc:
        _fatal(f"{exc.code}: {exc}")
        return
    issues = validate_ruleset(candidate, runtime.catalog)
    if issues:
        for issue in issues:
            click.echo(f"  {issue.rule_id}: {issue.code}: {issue.message}", err=True)
        _fatal(f"ruleset {candidate.version!r} has {len(issues)} issue(s); not installed")
        return
    shutil.copyfile(path, runtime.config.ruleset_path)
    click.echo(f"installed ruleset {candidate.version!r} to {runtime.config.ruleset_path}")


@main.command()
@click.option("--port", default=None, type=int, help="Override the configured port.")
@click.pass_context
def serve(ctx: click.Context, port: int | None):
    """Run the HTTP API until interrupted."""
    try:
        config = load_config(ctx.obj.get("config_path"))
    except HmmsError as exc:
        _fatal(f"{exc.code}: {exc}")
        return
    if port is not None:
        config = replace(config, port=port)
    try:
        check_port_available(config.host, config.port)
    except OSError as exc:
        _fatal(f"cannot bind {config.host}:{config.port}: {exc}")
        return
    try:
        app = create_app(config)
    except HmmsError as exc:
        _fatal(f"{exc.code}: {exc}")
        return

    import uvicorn

    click.echo(f"serving on http://{config.host}:{config.port}")
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")


if __name__ == "__main__":
    main()
