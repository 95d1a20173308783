"""HTTP API: the sole network boundary of the service.

Every route follows the same shape: authenticate the bearer token,
authorize the mapped action, delegate to a module operation, audit.
Handlers hold no business logic beyond wire parsing; domain errors raised
below are translated to HTTP statuses by one total mapping.
"""

from __future__ import annotations

import html
import io
import csv
import secrets
import socket
import threading
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from typing import Any

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import HTMLResponse, JSONResponse, PlainTextResponse
from pydantic import BaseModel

from .access import Action, Principal, Role, authorize, minimal_view
from .catalog import (
    ParameterCatalog,
    ParameterDefinition,
    ParameterValue,
    default_catalog_path,
    load_catalog,
    validate_value,
)
from .cohort import CohortQuery, build_cohort
from .config import ServiceConfig
from .errors import (
    DuplicateDose,
    DuplicateKey,
    DuplicateRfidToken,
    DuplicateScreeningId,
    DuplicateUsername,
    HmmsError,
    IllegalTransition,
    ImmutableParameter,
    InvalidDoseEvent,
    NothingToEdit,
    UnknownCard,
    UnknownParameter,
    UnknownPrincipal,
    UnknownReferral,
    UnknownStudent,
    UnknownVaccineCode,
)
from .immunization import (
    DoseEvent,
    ImmunizationSchedule,
    default_schedule_path,
    evaluate_immunization,
    load_schedule,
)
from .screening import (
    ReferralStatus,
    default_ruleset_path,
    finding_to_dict,
    load_ruleset,
    parse_ruleset,
    referral_to_dict,
    run_screening,
    validate_ruleset,
)
from .store import AuditAction, RecordsStore, StudentRecord

API_VERSION = "1"
PREFIX = "/api/v1"

_NOT_FOUND = (UnknownStudent, UnknownCard, UnknownReferral, UnknownPrincipal)
_CONFLICT = (
    DuplicateScreeningId,
    DuplicateRfidToken,
    DuplicateUsername,
    DuplicateDose,
    DuplicateKey,
    ImmutableParameter,
    IllegalTransition,
    NothingToEdit,
)


def status_for_error(exc: HmmsError) -> int:
    """Total module-error to HTTP-status mapping."""
    if isinstance(exc, _NOT_FOUND):
        return 404
    if isinstance(exc, _CONFLICT):
        return 409
    return 422


class ApiError(Exception):
    """Protocol-level failure (authn, authz, malformed wire input)."""

    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


@dataclass(frozen=True)
class Session:
    token: str
    principal_id: str
    issued_at: datetime
    expires_at: datetime


class SessionTable:
    """In-memory bearer sessions; tokens carry 256 bits of entropy."""

    def __init__(self, ttl: timedelta):
        self.ttl = ttl
        self._lock = threading.Lock()
        self._by_token: dict[str, Session] = {}

    def issue(self, principal_id: str) -> Session:
        now = datetime.now(timezone.utc)
        session = Session(
            token=secrets.token_urlsafe(32),
            principal_id=principal_id,
            issued_at=now,
            expires_at=now + self.ttl,
        )
        with self._lock:
            self._by_token[session.token] = session
        return session

    def resolve(self, token: str) -> str | None:
        now = datetime.now(timezone.utc)
        with self._lock:
            session = self._by_token.get(token)
            if session is None:
                return None
            if session.expires_at <= now:
                del self._by_token[token]
                return None
            return session.principal_id

    def revoke(self, token: str) -> None:
        with self._lock:
            self._by_token.pop(token, None)


def check_port_available(host: str, port: int) -> None:
    """Raise OSError when the (host, port) pair cannot be bound."""
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((host, port))
    finally:
        probe.close()


# -- wire serialization -------------------------------------------------------


def _wire_scalar(value: Any) -> Any:
    if isinstance(value, date) and not isinstance(value, datetime):
        return value.isoformat()
    return value


def value_to_wire(value: ParameterValue) -> dict[str, Any]:
    return {
        "value": _wire_scalar(value.value),
        "detail": value.detail,
        "camp_year": value.camp_year,
        "recorded_at": value.recorded_at.isoformat(),
        "recorded_by": value.recorded_by,
    }


def definition_to_wire(definition: ParameterDefinition) -> dict[str, Any]:
    return {
        "key": definition.key,
        "display_name": definition.display_name,
        "area": definition.area.value,
        "cardinality": definition.cardinality.value,
        "kind": {
            "type": definition.kind.type.value,
            "unit": definition.kind.unit,
            "allowed": list(definition.kind.allowed),
            "allow_detail": definition.kind.allow_detail,
        },
        "constraints": {
            "min": definition.constraints.min,
            "max": definition.constraints.max,
            "pattern": definition.constraints.pattern,
        },
    }


def record_to_wire(
    record: StudentRecord,
    schedule: ImmunizationSchedule,
    include_old: bool,
    as_of: date | None = None,
) -> dict[str, Any]:
    as_of = as_of or date.today()
    recent: dict[str, Any] = {}
    old: dict[str, list] = {}
    for key, history in sorted(record.observations.items()):
        recent[key] = value_to_wire(history[-1])
        if len(history) > 1:
            old[key] = [value_to_wire(v) for v in history[:-1]]

    immunization = None
    dob = record.one_time_values.get("date_of_birth")
    if dob is not None and isinstance(dob.value, date):
        status = evaluate_immunization(dob.value, list(record.doses), schedule, as_of)
        immunization = {
            "overall": status.overall.value,
            "counts": status.counts(),
            "per_dose": [
                {
                    "vaccine_code": d.vaccine_code,
                    "dose_number": d.dose_number,
                    "state": d.state.value,
                    "due_on": d.due_on.isoformat(),
                }
                for d in status.per_dose
            ],
        }

    wire: dict[str, Any] = {
        "screening_id": record.screening_id,
        "rfid_token": record.rfid_token,
        "one_time_values": {k: value_to_wire(v) for k, v in sorted(record.one_time_values.items())},
        "recent_observations": recent,
        "doses": [
            {"vaccine_code": d.vaccine_code, "dose_number": d.dose_number, "given_on": d.given_on.isoformat()}
            for d in record.doses
        ],
        "immunization": immunization,
        "referrals": [referral_to_dict(r) for r in record.referrals],
    }
    if include_old:
        wire["old_observations"] = old
    return wire


def principal_to_wire(principal: Principal) -> dict[str, Any]:
    return {
        "principal_id": principal.principal_id,
        "username": principal.username,
        "display_name": principal.display_name,
        "role": principal.role.value,
        "screening_id": principal.screening_id,
    }


# -- request bodies -----------------------------------------------------------


class LoginBody(BaseModel):
    username: str
    password: str


class RegisterBody(BaseModel):
    rfid_token: str
    values: dict[str, Any]


class ValueBody(BaseModel):
    key: str
    value: Any = None
    camp_year: int | None = None
    detail: str | None = None


class DoseBody(BaseModel):
    vaccine_code: str
    dose_number: int
    given_on: str


class PunchBody(BaseModel):
    rfid_token: str


class ScreenBody(BaseModel):
    as_of: str | None = None


class ReferralPatchBody(BaseModel):
    status: str
    doctor_notes: str | None = None


class StaffBody(BaseModel):
    username: str
    display_name: str = ""
    role: str
    password: str
    screening_id: str | None = None


class StaffPatchBody(BaseModel):
    display_name: str | None = None
    password: str | None = None


class CohortBody(BaseModel):
    age_min: int
    age_max: int
    features: list[str]
    as_of: str | None = None
    include_incomplete: bool = False


def _parse_date(raw: str | None, field: str, default: date | None = None) -> date:
    if raw is None:
        if default is None:
            raise ApiError(400, "validation", f"{field} is required")
        return default
    try:
        return date.fromisoformat(raw)
    except ValueError:
        raise ApiError(400, "validation", f"{field} must be an ISO date") from None


# -- application factory --------------------------------------------------------


def create_app(config: ServiceConfig | None = None, store: RecordsStore | None = None) -> FastAPI:
    """Build the service. Raises on malformed catalog/schedule/ruleset files."""
    config = config or ServiceConfig()
    catalog = load_catalog(config.catalog_path or default_catalog_path())
    schedule = load_schedule(config.schedule_path or default_schedule_path())
    ruleset = load_ruleset(config.ruleset_path or default_ruleset_path())
    if store is None:
        store = RecordsStore(config.database_path, catalog)
    sessions = SessionTable(timedelta(minutes=config.session_ttl_minutes))

    app = FastAPI(title="hmms", version=API_VERSION, docs_url=None, redoc_url=None, openapi_url=None)
    app.state.store = store
    app.state.catalog = catalog
    app.state.schedule = schedule
    app.state.ruleset = ruleset
    app.state.sessions = sessions
    app.router.on_shutdown.append(store.close)

    @app.exception_handler(HmmsError)
    async def on_domain_error(request: Request, exc: HmmsError):
        return JSONResponse(
            status_code=status_for_error(exc),
            content={"api_version": API_VERSION, "error": exc.to_dict()},
        )

    @app.exception_handler(ApiError)
    async def on_api_error(request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status,
            content={"api_version": API_VERSION,
                     "error": {"code": exc.code, "message": exc.message, "details": {}}},
        )

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={"api_version": API_VERSION,
                     "error": {"code": "validation", "message": "request body failed validation",
                               "details": {"errors": [str(e.get("msg", e)) for e in exc.errors()]}}},
        )

    # -- helpers bound to this app's state -----------------------------------

    def principal_from(request: Request) -> Principal:
        header = request.headers.get("authorization", "")
        if not header.lower().startswith("bearer "):
            raise ApiError(401, "unauthenticated", "missing bearer token")
        principal_id = sessions.resolve(header[7:].strip())
        if principal_id is None:
            raise ApiError(401, "unauthenticated", "invalid or expired session")
        try:
            return store.get_principal(principal_id)
        except UnknownPrincipal:
            raise ApiError(401, "unauthenticated", "session principal no longer exists") from None

    def require(principal: Principal, action: Action, target: str | None = None) -> None:
        decision = authorize(principal, action, target)
        if not decision.allowed:
            raise ApiError(403, "forbidden", decision.reason)

    def include_old_for(principal: Principal) -> bool:
        return authorize(principal, Action.VIEW_OLD_HEALTH_DATA).allowed

    def ok(payload: dict[str, Any], status_code: int = 200) -> JSONResponse:
        return JSONResponse(status_code=status_code, content={"api_version": API_VERSION, **payload})

    # -- session and liveness --------------------------------------------------

    @app.post(PREFIX + "/login")
    def login(body: LoginBody):
        principal = store.authenticate(body.username, body.password)
        if principal is None:
            raise ApiError(401, "unauthenticated", "invalid credentials")
        session = sessions.issue(principal.principal_id)
        return ok({
            "token": session.token,
            "role": principal.role.value,
            "display_name": principal.display_name,
            "screening_id": principal.screening_id,
            "expires_at": session.expires_at.isoformat(),
        })

    @app.post(PREFIX + "/logout")
    def logout(request: Request):
        header = request.headers.get("authorization", "")
        if header.lower().startswith("bearer "):
            sessions.revoke(header[7:].strip())
        return ok({"ok": True})

    @app.get(PREFIX + "/healthz")
    def healthz():
        checks = {
            "database": "ok",
            "catalog": f"ok ({len(catalog)} parameters)",
            "schedule": f"ok ({len(schedule.vaccines)} vaccines, {schedule.total_doses()} doses)",
            "ruleset": f"ok ({len(ruleset.rules)} rules)",
        }
        try:
            store.list_screening_ids()
        except Exception as exc:  # pragma: no cover - depends on external faults
            checks["database"] = f"error: {exc}"
        status = "ok" if all(v.startswith("ok") for v in checks.values()) else "degraded"
        return ok({"status": status, "checks": checks})

    @app.get(PREFIX + "/catalog")
    def get_catalog(request: Request):
        principal_from(request)  # authenticated, but visible to every role
        return ok({
            "catalog_version": catalog.version,
            "parameters": [definition_to_wire(d) for d in catalog],
        })

    # -- students ---------------------------------------------------------------

    @app.post(PREFIX + "/students")
    def register_student(body: RegisterBody, request: Request):
        principal = principal_from(request)
        require(principal, Action.INPUT_HEALTH_DATA)
        now = datetime.now(timezone.utc)
        values: dict[str, ParameterValue] = {}
        for key, raw in body.values.items():
            definition = catalog.get(key)
            if definition is None:
                raise UnknownParameter(f"{key!r} is not in the catalog", key=key)
            values[key] = validate_value(
                definition, raw, recorded_at=now, camp_year=None, recorded_by=principal.username
            )
        record = store.register_student(values, body.rfid_token, recorded_by=principal.username)
        return ok({"record": record_to_wire(record, schedule, include_old_for(principal))}, 201)

    @app.get(PREFIX + "/students")
    def search_students(request: Request, q: str = ""):
        principal = principal_from(request)
        require(principal, Action.SEARCH_STUDENT)
        results = [
            {"screening_id": sid, "student_name": name}
            for sid, name in store.search_students(q)
        ]
        return ok({"results": results})

    @app.get(PREFIX + "/students/{screening_id}")
    def get_student(screening_id: str, request: Request):
        principal = principal_from(request)
        require(principal, Action.VIEW_HEALTH_DATA, screening_id)
        record = store.get_record(screening_id)
        store.append_audit(principal.username, AuditAction.VIEW,
                           f"student:{screening_id}", "record viewed")
        return ok({"record": record_to_wire(record, schedule, include_old_for(principal))})

    @app.get(PREFIX + "/students/{screening_id}/basic")
    def get_student_basic(screening_id: str, request: Request):
        principal = principal_from(request)
        require(principal, Action.VIEW_BASIC_INFO, screening_id)
        record = store.get_record(screening_id)
        general = {
            d.key: value_to_wire(record.one_time_values[d.key])
            for d in catalog.one_time()
            if d.area.value == "General Information" and d.key in record.one_time_values
        }
        store.append_audit(principal.username, AuditAction.VIEW,
                           f"student:{screening_id}", "basic info viewed")
        return ok({"basic": {"screening_id": screening_id, "values": general}})

    @app.delete(PREFIX + "/students/{screening_id}/health-data")
    def delete_health_data(screening_id: str, request: Request):
        principal = principal_from(request)
        require(principal, Action.DELETE_HEALTH_DATA, screening_id)
        store.delete_health_data(screening_id, principal=principal.username)
        return ok({"ok": True})

    @app.delete(PREFIX + "/students/{screening_id}")
    def purge_student(screening_id: str, request: Request):
        principal = principal_from(request)
        require(principal, Action.DELETE_HEALTH_DATA, screening_id)
        store.purge_student(screening_id, principal=principal.username)
        return ok({"ok": True})

    # -- values and doses ----------------------------------------------------------

    @app.post(PREFIX + "/students/{screening_id}/values")
    def post_value(screening_id: str, body: ValueBody, request: Request):
        principal = principal_from(request)
        require(principal, Action.INPUT_HEALTH_DATA, screening_id)
        definition = catalog.get(body.key)
        if definition is None:
            raise UnknownParameter(f"{body.key!r} is not in the catalog", key=body.key)
        raw: Any = body.value
        if body.detail is not None:
            raw = {"value": body.value, "detail": body.detail}
        value = validate_value(
            definition, raw,
            recorded_at=datetime.now(timezone.utc),
            camp_year=body.camp_year,
            recorded_by=principal.username,
        )
        record = store.record_value(screening_id, value)
        return ok({"record": record_to_wire(record, schedule, include_old_for(principal))}, 201)

    @app.put(PREFIX + "/students/{screening_id}/values")
    def put_value(screening_id: str, body: ValueBody, request: Request):
        principal = principal_from(request)
        require(principal, Action.EDIT_HEALTH_DATA, screening_id)
        definition = catalog.get(body.key)
        if definition is None:
            raise UnknownParameter(f"{body.key!r} is not in the catalog", key=body.key)
        raw: Any = body.value
        if body.detail is not None:
            raw = {"value": body.value, "detail": body.detail}
        value = validate_value(
            definition, raw,
            recorded_at=datetime.now(timezone.utc),
            camp_year=body.camp_year,
            recorded_by=principal.username,
        )
        record = store.correct_value(screening_id, value)
        return ok({"record": record_to_wire(record, schedule, include_old_for(principal))})

    @app.post(PREFIX + "/students/{screening_id}/doses")
    def post_dose(screening_id: str, body: DoseBody, request: Request):
        principal = principal_from(request)
        require(principal, Action.INPUT_HEALTH_DATA, screening_id)
        spec = schedule.by_code(body.vaccine_code)
        if spec is None:
            raise UnknownVaccineCode(f"{body.vaccine_code!r} is not in the schedule",
                                     vaccine_code=body.vaccine_code)
        if not 1 <= body.dose_number <= spec.dose_count:
            raise InvalidDoseEvent(
                f"{body.vaccine_code} has doses 1..{spec.dose_count}, got {body.dose_number}",
                vaccine_code=body.vaccine_code, dose_number=body.dose_number,
            )
        given_on = _parse_date(body.given_on, "given_on")
        dose = DoseEvent(vaccine_code=body.vaccine_code, dose_number=body.dose_number, given_on=given_on)
        record = store.record_dose(screening_id, dose, recorded_by=principal.username)
        return ok({"record": record_to_wire(record, schedule, include_old_for(principal))}, 201)

    # -- punch, screening, referrals --------------------------------------------------

    @app.post(PREFIX + "/punch")
    def punch(body: PunchBody, request: Request):
        principal = principal_from(request)
        require(principal, Action.PUNCH_CARD)
        record = store.lookup_by_card(body.rfid_token, principal=principal.username)
        return ok({"record": record_to_wire(record, schedule, include_old_for(principal))})

    @app.post(PREFIX + "/students/{screening_id}/screen")
    def screen(screening_id: str, body: ScreenBody, request: Request):
        principal = principal_from(request)
        require(principal, Action.RUN_SCREENING, screening_id)
        as_of = _parse_date(body.as_of, "as_of", default=date.today())
        record = store.get_record(screening_id)
        findings, referral = run_screening(record, ruleset, catalog, schedule, as_of)
        if referral is not None:
            store.persist_referral(referral, principal=principal.username)
        store.append_audit(
            principal.username, AuditAction.SCREEN, f"student:{screening_id}",
            f"{len(findings)} findings, referral {'created' if referral else 'not needed'}",
        )
        return ok({
            "findings": [finding_to_dict(f) for f in findings],
            "referral": referral_to_dict(referral) if referral else None,
        })

    @app.get(PREFIX + "/students/{screening_id}/referrals")
    def list_referrals(screening_id: str, request: Request):
        principal = principal_from(request)
        require(principal, Action.VIEW_HEALTH_DATA, screening_id)
        record = store.get_record(screening_id)
        store.append_audit(principal.username, AuditAction.VIEW,
                           f"student:{screening_id}", "referrals viewed")
        return ok({"referrals": [referral_to_dict(r) for r in record.referrals]})

    @app.patch(PREFIX + "/referrals/{referral_id}")
    def patch_referral(referral_id: str, body: ReferralPatchBody, request: Request):
        principal = principal_from(request)
        require(principal, Action.EDIT_HEALTH_DATA)
        try:
            new_status = ReferralStatus(body.status)
        except ValueError:
            raise ApiError(400, "validation",
                           f"status must be one of {[s.value for s in ReferralStatus]}") from None
        referral = store.update_referral_status(
            referral_id, new_status, notes=body.doctor_notes, principal=principal.username
        )
        return ok({"referral": referral_to_dict(referral)})

    # -- printable summary ---------------------------------------------------------

    @app.get(PREFIX + "/students/{screening_id}/print")
    def print_record(screening_id: str, request: Request):
        principal = principal_from(request)
        require(principal, Action.PRINT_HEALTH_DATA, screening_id)
        record = store.get_record(screening_id)
        document = render_print_document(record, catalog, schedule, include_old_for(principal))
        store.append_audit(principal.username, AuditAction.PRINT,
                           f"student:{screening_id}", "summary printed")
        return HTMLResponse(content=document)

    # -- student self-service ---------------------------------------------------------

    @app.get(PREFIX + "/me/minimal")
    def me_minimal(request: Request):
        principal = principal_from(request)
        require(principal, Action.VIEW_MINIMAL_SELF, principal.screening_id)
        record = store.get_record(principal.screening_id)
        view = minimal_view(record, schedule)
        store.append_audit(principal.username, AuditAction.VIEW,
                           f"student:{principal.screening_id}", "minimal view")
        return ok({"view": view.to_dict()})

    # -- staff management ----------------------------------------------------------

    @app.get(PREFIX + "/staff")
    def list_staff(request: Request):
        principal = principal_from(request)
        require(principal, Action.MANAGE_STAFF)
        return ok({"staff": [principal_to_wire(p) for p in store.list_principals()]})

    @app.post(PREFIX + "/staff")
    def create_staff(body: StaffBody, request: Request):
        principal = principal_from(request)
        require(principal, Action.MANAGE_STAFF)
        try:
            role = Role(body.role)
        except ValueError:
            raise ApiError(400, "validation",
                           f"role must be one of {[r.value for r in Role]}") from None
        created = store.create_principal(
            body.username, body.display_name or body.username, role, body.password,
            screening_id=body.screening_id, acting_principal=principal.username,
        )
        return ok({"principal": principal_to_wire(created)}, 201)

    @app.patch(PREFIX + "/staff/{principal_id}")
    def update_staff(principal_id: str, body: StaffPatchBody, request: Request):
        principal = principal_from(request)
        require(principal, Action.MANAGE_STAFF)
        updated = store.update_principal(
            principal_id, display_name=body.display_name, password=body.password,
            acting_principal=principal.username,
        )
        return ok({"principal": principal_to_wire(updated)})

    @app.delete(PREFIX + "/staff/{principal_id}")
    def delete_staff(principal_id: str, request: Request):
        principal = principal_from(request)
        require(principal, Action.MANAGE_STAFF)
        store.delete_principal(principal_id, acting_principal=principal.username)
        return ok({"ok": True})

    # -- rulesets and cohort export ---------------------------------------------------

    @app.post(PREFIX + "/rulesets/validate")
    async def ruleset_validate(request: Request):
        principal = principal_from(request)
        require(principal, Action.MANAGE_RULESETS)
        try:
            raw = await request.json()
        except Exception:
            raise ApiError(400, "validation", "body must be a JSON ruleset document") from None
        candidate = parse_ruleset(raw)
        issues = validate_ruleset(candidate, catalog)
        return ok({
            "ok": not issues,
            "ruleset_version": candidate.version,
            "issues": [
                {"rule_id": i.rule_id, "code": i.code, "message": i.message} for i in issues
            ],
        })

    @app.post(PREFIX + "/export/cohort")
    def export_cohort(body: CohortBody, request: Request):
        principal = principal_from(request)
        require(principal, Action.EXPORT_COHORT)
        query = CohortQuery(
            age_min=body.age_min,
            age_max=body.age_max,
            features=tuple(body.features),
            as_of=_parse_date(body.as_of, "as_of", default=date.today()),
            include_incomplete=body.include_incomplete,
        )
        header, rows = build_cohort(store, catalog, schedule, query)
        buffer = io.StringIO()
        writer = csv.writer(buffer)
        writer.writerow(header)
        writer.writerows(rows)
        return PlainTextResponse(content=buffer.getvalue(), media_type="text/csv")

    return app


# -- printable document -------------------------------------------------------------


def render_print_document(
    record: StudentRecord,
    catalog: ParameterCatalog,
    schedule: ImmunizationSchedule,
    include_old: bool,
) -> str:
    """Self-contained HTML summary of one student record."""

    def esc(value: Any) -> str:
        return html.escape(str(value))

    def display(key: str) -> str:
        definition = catalog.get(key)
        return definition.display_name if definition else key

    rows: list[str] = []
    for definition in catalog.one_time():
        held = record.one_time_values.get(definition.key)
        if held is None:
            continue
        shown = esc(_wire_scalar(held.value))
        if held.detail:
            shown += f" ({esc(held.detail)})"
        rows.append(f"<tr><td>{esc(definition.display_name)}</td><td>{shown}</td></tr>")
    identity_table = "\n".join(rows)

    obs_rows: list[str] = []
    for key in sorted(record.observations):
        history = record.observations[key]
        shown = history if include_old else history[-1:]
        for entry in shown:
            value = esc(_wire_scalar(entry.value))
            if entry.detail:
                value += f" ({esc(entry.detail)})"
            obs_rows.append(
                f"<tr><td>{esc(display(key))}</td><td>{value}</td>"
                f"<td>{entry.camp_year}</td><td>{esc(entry.recorded_at.date().isoformat())}</td></tr>"
            )
    obs_table = "\n".join(obs_rows)

    dose_rows = "\n".join(
        f"<tr><td>{esc(d.vaccine_code)}</td><td>{d.dose_number}</td><td>{d.given_on.isoformat()}</td></tr>"
        for d in record.doses
    )
    referral_rows = "\n".join(
        f"<tr><td>{esc(r.referral_id)}</td><td>{esc(r.status.value)}</td>"
        f"<td>{len(r.failed_findings)}</td><td>{esc(r.doctor_notes or '')}</td></tr>"
        for r in record.referrals
    )

    name = record.one_time_values.get("student_name")
    title = esc(name.value) if name else record.screening_id
    return f"""<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8">
<title>Health summary: {title}</title>
<style>
body {{ font-family: Georgia, serif; margin: 2em; color: #222; }}
h1 {{ font-size: 1.4em; border-bottom: 2px solid #444; padding-bottom: 0.2em; }}
h2 {{ font-size: 1.1em; margin-top: 1.4em; }}
table {{ border-collapse: collapse; width: 100%; margin-top: 0.5em; }}
td, th {{ border: 1px solid #999; padding: 4px 8px; text-align: left; font-size: 0.9em; }}
@media print {{ body {{ margin: 0.5em; }} }}
</style>
</head>
<body>
<h1>Student health summary</h1>
<p>Screening ID: <strong>{esc(record.screening_id)}</strong></p>
<h2>Admission information</h2>
<table>{identity_table}</table>
<h2>{"Measurements (full history)" if include_old else "Measurements (most recent)"}</h2>
<table><tr><th>Parameter</th><th>Value</th><th>Camp year</th><th>Recorded</th></tr>
{obs_table}</table>
<h2>Immunization doses</h2>
<table><tr><th>Vaccine</th><th>Dose</th><th>Given on</th></tr>
{dose_rows}</table>
<h2>Referrals</h2>
<table><tr><th>Referral</th><th>Status</th><th>Findings</th><th>Doctor notes</th></tr>
{referral_rows}</table>
</body>
</html>
"""
