"""Durable records store: students, values, doses, referrals, audit log.

Backed by an embedded sqlite database (":memory:" works for tests). The
public methods of RecordsStore form the storage boundary; swapping the
backend means reimplementing this class, nothing above it changes.

All writes run inside one store-wide lock and a sqlite transaction, which
subsumes the required per-record serialization. Every mutating method
appends exactly one audit entry; audit sequence numbers are allocated
explicitly inside the transaction so rollbacks can never leave gaps.
"""

from __future__ import annotations

import csv
import json
import sqlite3
import threading
import uuid
from dataclasses import dataclass
from datetime import date, datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Iterator

from .access import Principal, Role, hash_password
from .catalog import Cardinality, ParameterCatalog, ParameterValue
from .errors import (
    DuplicateDose,
    DuplicateRfidToken,
    DuplicateScreeningId,
    DuplicateUsername,
    HmmsError,
    IllegalTransition,
    ImmutableParameter,
    InvalidDoseEvent,
    InvalidPrincipal,
    InvalidRfidToken,
    MissingRequiredField,
    NothingToEdit,
    UnknownCard,
    UnknownParameter,
    UnknownPrincipal,
    UnknownReferral,
    UnknownStudent,
)
from .immunization import DoseEvent
from .screening import Referral, ReferralStatus, is_legal_transition, referral_from_dict, referral_to_dict

REQUIRED_IDENTITY_KEYS = ("student_name", "screening_id", "date_of_birth")

RFID_MIN_LEN = 4
RFID_MAX_LEN = 64


class AuditAction(str, Enum):
    CREATE = "Create"
    UPDATE = "Update"
    DELETE = "Delete"
    VIEW = "View"
    PRINT = "Print"
    PUNCH = "Punch"
    SCREEN = "Screen"


@dataclass(frozen=True)
class AuditEntry:
    seq: int
    at: datetime
    principal: str
    action: AuditAction
    target: str
    detail: str


@dataclass(frozen=True)
class StudentRecord:
    screening_id: str
    rfid_token: str
    one_time_values: dict[str, ParameterValue]
    observations: dict[str, tuple[ParameterValue, ...]]
    doses: tuple[DoseEvent, ...]
    referrals: tuple[Referral, ...]


_SCHEMA = """
CREATE TABLE IF NOT EXISTS students (
    screening_id TEXT PRIMARY KEY,
    rfid_token   TEXT NOT NULL UNIQUE
);
CREATE TABLE IF NOT EXISTS one_time_values (
    screening_id TEXT NOT NULL REFERENCES students(screening_id) ON DELETE CASCADE,
    key          TEXT NOT NULL,
    payload      TEXT NOT NULL,
    PRIMARY KEY (screening_id, key)
);
CREATE TABLE IF NOT EXISTS observations (
    id           INTEGER PRIMARY KEY,
    screening_id TEXT NOT NULL REFERENCES students(screening_id) ON DELETE CASCADE,
    key          TEXT NOT NULL,
    camp_year    INTEGER NOT NULL,
    recorded_at  TEXT NOT NULL,
    payload      TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS idx_observations ON observations (screening_id, key, camp_year, recorded_at);
CREATE TABLE IF NOT EXISTS doses (
    screening_id TEXT NOT NULL REFERENCES students(screening_id) ON DELETE CASCADE,
    vaccine_code TEXT NOT NULL,
    dose_number  INTEGER NOT NULL,
    given_on     TEXT NOT NULL,
    PRIMARY KEY (screening_id, vaccine_code, dose_number)
);
CREATE TABLE IF NOT EXISTS referrals (
    referral_id  TEXT PRIMARY KEY,
    screening_id TEXT NOT NULL REFERENCES students(screening_id) ON DELETE CASCADE,
    created_at   TEXT NOT NULL,
    status       TEXT NOT NULL,
    doctor_notes TEXT,
    findings     TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS audit_log (
    seq       INTEGER PRIMARY KEY,
    at        TEXT NOT NULL,
    principal TEXT NOT NULL,
    action    TEXT NOT NULL,
    target    TEXT NOT NULL,
    detail    TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS principals (
    principal_id  TEXT PRIMARY KEY,
    username      TEXT NOT NULL UNIQUE,
    display_name  TEXT NOT NULL,
    role          TEXT NOT NULL,
    password_salt TEXT NOT NULL,
    password_hash TEXT NOT NULL,
    screening_id  TEXT
);
"""


def _encode_payload(value: ParameterValue) -> str:
    v: Any = value.value
    tagged: dict[str, Any]
    if isinstance(v, date) and not isinstance(v, datetime):
        tagged = {"type": "date", "value": v.isoformat()}
    else:
        tagged = {"type": "plain", "value": v}
    tagged["detail"] = value.detail
    tagged["recorded_at"] = value.recorded_at.isoformat()
    tagged["recorded_by"] = value.recorded_by
    return json.dumps(tagged, ensure_ascii=False)


def _decode_payload(key: str, raw: str, camp_year: int | None) -> ParameterValue:
    data = json.loads(raw)
    value = data["value"]
    if data["type"] == "date":
        value = date.fromisoformat(value)
    return ParameterValue(
        key=key,
        value=value,
        recorded_at=datetime.fromisoformat(data["recorded_at"]),
        camp_year=camp_year,
        recorded_by=data.get("recorded_by", ""),
        detail=data.get("detail"),
    )


class RecordsStore:
    """Sqlite-backed store for all durable state."""

    def __init__(self, path: str | Path, catalog: ParameterCatalog):
        self.path = str(path)
        self.catalog = catalog
        self._lock = threading.RLock()
        self._conn = sqlite3.connect(self.path, check_same_thread=False)
        self._conn.isolation_level = None
        self._conn.execute("PRAGMA foreign_keys = ON")
        with self._lock:
            self._conn.executescript(_SCHEMA)

    def close(self) -> None:
        with self._lock:
            self._conn.close()

    def __enter__(self) -> "RecordsStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- internals -----------------------------------------------------------

    def _write(self) -> "_Txn":
        return _Txn(self._conn, self._lock)

    def _append_audit(self, cur: sqlite3.Cursor, principal: str, action: AuditAction,
                      target: str, detail: str) -> int:
        seq = cur.execute("SELECT COALESCE(MAX(seq), 0) + 1 FROM audit_log").fetchone()[0]
        cur.execute(
            "INSERT INTO audit_log (seq, at, principal, action, target, detail) VALUES (?, ?, ?, ?, ?, ?)",
            (seq, datetime.now(timezone.utc).isoformat(), principal, action.value, target, detail),
        )
        return seq

    def _require_student(self, cur: sqlite3.Cursor, screening_id: str) -> str:
        row = cur.execute(
            "SELECT rfid_token FROM students WHERE screening_id = ?", (screening_id,)
        ).fetchone()
        if row is None:
            raise UnknownStudent(f"no student with screening id {screening_id!r}", screening_id=screening_id)
        return row[0]

    # -- students --------------------------------------------------------------

    def register_student(
        self,
        values: dict[str, ParameterValue] | list[ParameterValue],
        rfid_token: str,
        recorded_by: str = "",
    ) -> StudentRecord:
        """Create a student from identity one-time values and an unused card token."""
        if isinstance(values, list):
            values = {v.key: v for v in values}
        if not isinstance(rfid_token, str) or not RFID_MIN_LEN <= len(rfid_token) <= RFID_MAX_LEN:
            raise InvalidRfidToken(
                f"rfid token must be {RFID_MIN_LEN}-{RFID_MAX_LEN} characters", token_length=len(str(rfid_token))
            )
        for key in REQUIRED_IDENTITY_KEYS:
            if key not in values:
                raise MissingRequiredField(f"registration requires {key!r}", key=key)
        for key, value in values.items():
            definition = self.catalog.get(key)
            if definition is None or definition.cardinality is not Cardinality.ONE_TIME:
                raise UnknownParameter(f"{key!r} is not a one-time catalog parameter", key=key)
            if value.key != key:
                raise UnknownParameter(f"value under {key!r} is keyed {value.key!r}", key=key)

        screening_id = values["screening_id"].value
        with self._write() as cur:
            if cur.execute("SELECT 1 FROM students WHERE screening_id = ?", (screening_id,)).fetchone():
                raise DuplicateScreeningId(f"screening id {screening_id!r} already registered",
                                           screening_id=screening_id)
            if cur.execute("SELECT 1 FROM students WHERE rfid_token = ?", (rfid_token,)).fetchone():
                raise DuplicateRfidToken("rfid token already issued")
            cur.execute("INSERT INTO students (screening_id, rfid_token) VALUES (?, ?)",
                        (screening_id, rfid_token))
            for key, value in values.items():
                cur.execute(
                    "INSERT INTO one_time_values (screening_id, key, payload) VALUES (?, ?, ?)",
                    (screening_id, key, _encode_payload(value)),
                )
            self._append_audit(cur, recorded_by, AuditAction.CREATE,
                               f"student:{screening_id}", "student registered")
        return self.get_record(screening_id)

    def record_value(self, screening_id: str, value: ParameterValue) -> StudentRecord:
        """Store a validated value: one-time keys write once, histories append."""
        definition = self.catalog.get(value.key)
        if definition is None:
            raise UnknownParameter(f"{value.key!r} is not in the catalog", key=value.key)
        with self._write() as cur:
            self._require_student(cur, screening_id)
            if definition.cardinality is Cardinality.ONE_TIME:
                exists = cur.execute(
                    "SELECT 1 FROM one_time_values WHERE screening_id = ? AND key = ?",
                    (screening_id, value.key),
                ).fetchone()
                if exists:
                    raise ImmutableParameter(
                        f"one-time parameter {value.key!r} is already set for {screening_id!r}",
                        key=value.key, screening_id=screening_id,
                    )
                cur.execute(
                    "INSERT INTO one_time_values (screening_id, key, payload) VALUES (?, ?, ?)",
                    (screening_id, value.key, _encode_payload(value)),
                )
            else:
                cur.execute(
                    "INSERT INTO observations (screening_id, key, camp_year, recorded_at, payload)"
                    " VALUES (?, ?, ?, ?, ?)",
                    (screening_id, value.key, value.camp_year,
                     value.recorded_at.isoformat(), _encode_payload(value)),
                )
            self._append_audit(cur, value.recorded_by, AuditAction.UPDATE,
                               f"student:{screening_id}", f"value recorded: {value.key}")
        return self.get_record(screening_id)

    def correct_value(self, screening_id: str, value: ParameterValue) -> StudentRecord:
        """Append a correction for an already-measured (key, camp_year) pair.

        Histories stay append-only; the correction wins because evaluation
        reads the most recent entry.
        """
        definition = self.catalog.get(value.key)
        if definition is None:
            raise UnknownParameter(f"{value.key!r} is not in the catalog", key=value.key)
        if definition.cardinality is Cardinality.ONE_TIME:
            raise ImmutableParameter(f"one-time parameter {value.key!r} cannot be edited", key=value.key)
        with self._write() as cur:
            self._require_student(cur, screening_id)
            exists = cur.execute(
                "SELECT 1 FROM observations WHERE screening_id = ? AND key = ? AND camp_year = ?",
                (screening_id, value.key, value.camp_year),
            ).fetchone()
            if not exists:
                raise NothingToEdit(
                    f"no {value.key!r} measurement recorded for camp year {value.camp_year}",
                    key=value.key, camp_year=value.camp_year,
                )
            cur.execute(
                "INSERT INTO observations (screening_id, key, camp_year, recorded_at, payload)"
                " VALUES (?, ?, ?, ?, ?)",
                (screening_id, value.key, value.camp_year,
                 value.recorded_at.isoformat(), _encode_payload(value)),
            )
            self._append_audit(cur, value.recorded_by, AuditAction.UPDATE,
                               f"student:{screening_id}", f"value corrected: {value.key}")
        return self.get_record(screening_id)

    def record_dose(self, screening_id: str, dose: DoseEvent, recorded_by: str = "") -> StudentRecord:
        dob_value = None
        with self._write() as cur:
            self._require_student(cur, screening_id)
            row = cur.execute(
                "SELECT payload FROM one_time_values WHERE screening_id = ? AND key = 'date_of_birth'",
                (screening_id,),
            ).fetchone()
            if row:
                dob_value = _decode_payload("date_of_birth", row[0], None).value
            if dob_value is not None and dose.given_on < dob_value:
                raise InvalidDoseEvent(
                    f"{dose.vaccine_code} dose {dose.dose_number} given before date of birth",
                    vaccine_code=dose.vaccine_code, dose_number=dose.dose_number,
                )
            exists = cur.execute(
                "SELECT 1 FROM doses WHERE screening_id = ? AND vaccine_code = ? AND dose_number = ?",
                (screening_id, dose.vaccine_code, dose.dose_number),
            ).fetchone()
            if exists:
                raise DuplicateDose(
                    f"{dose.vaccine_code} dose {dose.dose_number} already recorded",
                    vaccine_code=dose.vaccine_code, dose_number=dose.dose_number,
                )
            cur.execute(
                "INSERT INTO doses (screening_id, vaccine_code, dose_number, given_on) VALUES (?, ?, ?, ?)",
                (screening_id, dose.vaccine_code, dose.dose_number, dose.given_on.isoformat()),
            )
            self._append_audit(cur, recorded_by, AuditAction.UPDATE, f"student:{screening_id}",
                               f"dose recorded: {dose.vaccine_code} #{dose.dose_number}")
        return self.get_record(screening_id)

    def get_record(self, screening_id: str) -> StudentRecord:
        with self._lock:
            cur = self._conn.cursor()
            rfid_token = self._require_student(cur, screening_id)
            return self._load_record(cur, screening_id, rfid_token)

    def lookup_by_card(self, rfid_token: str, principal: str = "") -> StudentRecord:
        """Resolve a punched card to the full record; audited as a Punch."""
        with self._write() as cur:
            row = cur.execute(
                "SELECT screening_id FROM students WHERE rfid_token = ?", (rfid_token,)
            ).fetchone()
            if row is None:
                raise UnknownCard("no student holds this card")
            screening_id = row[0]
            self._append_audit(cur, principal, AuditAction.PUNCH,
                               f"student:{screening_id}", "card punched")
        return self.get_record(screening_id)

    def _load_record(self, cur: sqlite3.Cursor, screening_id: str, rfid_token: str) -> StudentRecord:
        one_time: dict[str, ParameterValue] = {}
        for key, payload in cur.execute(
            "SELECT key, payload FROM one_time_values WHERE screening_id = ?", (screening_id,)
        ):
            one_time[key] = _decode_payload(key, payload, None)

        observations: dict[str, list[ParameterValue]] = {}
        for key, camp_year, payload in cur.execute(
            "SELECT key, camp_year, payload FROM observations WHERE screening_id = ?"
            " ORDER BY camp_year, recorded_at, id",
            (screening_id,),
        ):
            observations.setdefault(key, []).append(_decode_payload(key, payload, camp_year))

        doses = tuple(
            DoseEvent(vaccine_code=code, dose_number=number, given_on=date.fromisoformat(given))
            for code, number, given in cur.execute(
                "SELECT vaccine_code, dose_number, given_on FROM doses WHERE screening_id = ?"
                " ORDER BY vaccine_code, dose_number",
                (screening_id,),
            )
        )
        referrals = tuple(
            self._row_to_referral(row)
            for row in cur.execute(
                "SELECT referral_id, screening_id, created_at, status, doctor_notes, findings"
                " FROM referrals WHERE screening_id = ? ORDER BY created_at, referral_id",
                (screening_id,),
            )
        )
        return StudentRecord(
            screening_id=screening_id,
            rfid_token=rfid_token,
            one_time_values=one_time,
            observations={k: tuple(v) for k, v in observations.items()},
            doses=doses,
            referrals=referrals,
        )

    def search_students(self, query: str) -> list[tuple[str, str]]:
        """(screening_id, student name) pairs whose id or name contains ``query``."""
        with self._lock:
            rows = self._conn.execute("SELECT screening_id FROM students ORDER BY screening_id").fetchall()
            out = []
            for (screening_id,) in rows:
                name_row = self._conn.execute(
                    "SELECT payload FROM one_time_values WHERE screening_id = ? AND key = 'student_name'",
                    (screening_id,),
                ).fetchone()
                name = _decode_payload("student_name", name_row[0], None).value if name_row else ""
                if query.lower() in screening_id.lower() or query.lower() in name.lower():
                    out.append((screening_id, name))
            return out

    def list_screening_ids(self) -> list[str]:
        with self._lock:
            return [r[0] for r in self._conn.execute(
                "SELECT screening_id FROM students ORDER BY screening_id"
            )]

    def delete_health_data(self, screening_id: str, principal: str = "") -> StudentRecord:
        """Clear observations, doses and referrals; admission one-time values stay."""
        with self._write() as cur:
            self._require_student(cur, screening_id)
            cur.execute("DELETE FROM observations WHERE screening_id = ?", (screening_id,))
            cur.execute("DELETE FROM doses WHERE screening_id = ?", (screening_id,))
            cur.execute("DELETE FROM referrals WHERE screening_id = ?", (screening_id,))
            self._append_audit(cur, principal, AuditAction.DELETE,
                               f"student:{screening_id}", "health data deleted")
        return self.get_record(screening_id)

    def purge_student(self, screening_id: str, principal: str = "") -> None:
        """Remove the student entirely, identity included."""
        with self._write() as cur:
            self._require_student(cur, screening_id)
            cur.execute("DELETE FROM students WHERE screening_id = ?", (screening_id,))
            self._append_audit(cur, principal, AuditAction.DELETE,
                               f"student:{screening_id}", "student record purged")

    # -- referrals ---------------------------------------------------------------

    def persist_referral(self, referral: Referral, principal: str = "") -> Referral:
        with self._write() as cur:
            self._require_student(cur, referral.screening_id)
            cur.execute(
                "INSERT INTO referrals (referral_id, screening_id, created_at, status, doctor_notes, findings)"
                " VALUES (?, ?, ?, ?, ?, ?)",
                (
                    referral.referral_id,
                    referral.screening_id,
                    referral.created_at.isoformat(),
                    referral.status.value,
                    referral.doctor_notes,
                    json.dumps(referral_to_dict(referral)["failed_findings"], ensure_ascii=False),
                ),
            )
            self._append_audit(cur, principal, AuditAction.CREATE,
                               f"referral:{referral.referral_id}", "referral created")
        return referral

    def get_referral(self, referral_id: str) -> Referral:
        with self._lock:
            row = self._conn.execute(
                "SELECT referral_id, screening_id, created_at, status, doctor_notes, findings"
                " FROM referrals WHERE referral_id = ?",
                (referral_id,),
            ).fetchone()
        if row is None:
            raise UnknownReferral(f"no referral {referral_id!r}", referral_id=referral_id)
        return self._row_to_referral(row)

    def update_referral_status(
        self, referral_id: str, new_status: ReferralStatus, notes: str | None = None, principal: str = ""
    ) -> Referral:
        with self._write() as cur:
            row = cur.execute(
                "SELECT status, doctor_notes FROM referrals WHERE referral_id = ?", (referral_id,)
            ).fetchone()
            if row is None:
                raise UnknownReferral(f"no referral {referral_id!r}", referral_id=referral_id)
            current = ReferralStatus(row[0])
            if not is_legal_transition(current, new_status):
                raise IllegalTransition(
                    f"referral status cannot move {current.value} -> {new_status.value}",
                    current=current.value, requested=new_status.value,
                )
            cur.execute(
                "UPDATE referrals SET status = ?, doctor_notes = COALESCE(?, doctor_notes)"
                " WHERE referral_id = ?",
                (new_status.value, notes, referral_id),
            )
            self._append_audit(cur, principal, AuditAction.UPDATE, f"referral:{referral_id}",
                               f"status {current.value} -> {new_status.value}")
        return self.get_referral(referral_id)

    @staticmethod
    def _row_to_referral(row) -> Referral:
        referral_id, screening_id, created_at, status, doctor_notes, findings = row
        return referral_from_dict({
            "referral_id": referral_id,
            "screening_id": screening_id,
            "created_at": created_at,
            "status": status,
            "doctor_notes": doctor_notes,
            "failed_findings": json.loads(findings),
        })

    # -- audit ---------------------------------------------------------------------

    def append_audit(self, principal: str, action: AuditAction, target: str, detail: str = "") -> int:
        """Record a non-mutating audited act (View, Print, Screen)."""
        with self._write() as cur:
            return self._append_audit(cur, principal, action, target, detail)

    def audit_entries(self, after_seq: int = 0) -> list[AuditEntry]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT seq, at, principal, action, target, detail FROM audit_log"
                " WHERE seq > ? ORDER BY seq",
                (after_seq,),
            ).fetchall()
        return [
            AuditEntry(seq=seq, at=datetime.fromisoformat(at), principal=principal,
                       action=AuditAction(action), target=target, detail=detail)
            for seq, at, principal, action, target, detail in rows
        ]

    # -- principals -------------------------------------------------------------------

    def create_principal(
        self,
        username: str,
        display_name: str,
        role: Role,
        password: str,
        screening_id: str | None = None,
        acting_principal: str = "",
    ) -> Principal:
        if role is Role.STUDENT:
            if not screening_id:
                raise InvalidPrincipal("student principals must link to a screening id")
        elif screening_id:
            raise InvalidPrincipal(f"{role.value} principals do not link to a student")
        if not username or not password:
            raise InvalidPrincipal("username and password are required")
        salt, digest = hash_password(password)
        principal_id = uuid.uuid4().hex
        with self._write() as cur:
            if screening_id:
                self._require_student(cur, screening_id)
            if cur.execute("SELECT 1 FROM principals WHERE username = ?", (username,)).fetchone():
                raise DuplicateUsername(f"username {username!r} is taken", username=username)
            cur.execute(
                "INSERT INTO principals (principal_id, username, display_name, role,"
                " password_salt, password_hash, screening_id) VALUES (?, ?, ?, ?, ?, ?, ?)",
                (principal_id, username, display_name, role.value, salt, digest, screening_id),
            )
            self._append_audit(cur, acting_principal, AuditAction.CREATE,
                               f"principal:{principal_id}", f"{role.value} account created")
        return Principal(principal_id=principal_id, username=username, display_name=display_name,
                         role=role, screening_id=screening_id)

    def get_principal(self, principal_id: str) -> Principal:
        with self._lock:
            row = self._conn.execute(
                "SELECT principal_id, username, display_name, role, screening_id"
                " FROM principals WHERE principal_id = ?",
                (principal_id,),
            ).fetchone()
        if row is None:
            raise UnknownPrincipal(f"no principal {principal_id!r}")
        return self._row_to_principal(row)

    def authenticate(self, username: str, password: str) -> Principal | None:
        """Principal for valid credentials, None otherwise (no user enumeration)."""
        from .access import verify_password

        with self._lock:
            row = self._conn.execute(
                "SELECT principal_id, username, display_name, role, screening_id,"
                " password_salt, password_hash FROM principals WHERE username = ?",
                (username,),
            ).fetchone()
        if row is None or not verify_password(password, row[5], row[6]):
            return None
        return self._row_to_principal(row[:5])

    def list_principals(self) -> list[Principal]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT principal_id, username, display_name, role, screening_id"
                " FROM principals ORDER BY username",
            ).fetchall()
        return [self._row_to_principal(r) for r in rows]

    def update_principal(
        self,
        principal_id: str,
        display_name: str | None = None,
        password: str | None = None,
        acting_principal: str = "",
    ) -> Principal:
        with self._write() as cur:
            row = cur.execute(
                "SELECT 1 FROM principals WHERE principal_id = ?", (principal_id,)
            ).fetchone()
            if row is None:
                raise UnknownPrincipal(f"no principal {principal_id!r}")
            if display_name is not None:
                cur.execute("UPDATE principals SET display_name = ? WHERE principal_id = ?",
                            (display_name, principal_id))
            if password is not None:
                salt, digest = hash_password(password)
                cur.execute(
                    "UPDATE principals SET password_salt = ?, password_hash = ? WHERE principal_id = ?",
                    (salt, digest, principal_id),
                )
            self._append_audit(cur, acting_principal, AuditAction.UPDATE,
                               f"principal:{principal_id}", "account updated")
        return self.get_principal(principal_id)

    def delete_principal(self, principal_id: str, acting_principal: str = "") -> None:
        with self._write() as cur:
            row = cur.execute("SELECT 1 FROM principals WHERE principal_id = ?", (principal_id,)).fetchone()
            if row is None:
                raise UnknownPrincipal(f"no principal {principal_id!r}")
            cur.execute("DELETE FROM principals WHERE principal_id = ?", (principal_id,))
            self._append_audit(cur, acting_principal, AuditAction.DELETE,
                               f"principal:{principal_id}", "account deleted")

    @staticmethod
    def _row_to_principal(row) -> Principal:
        principal_id, username, display_name, role, screening_id = row
        return Principal(principal_id=principal_id, username=username, display_name=display_name,
                         role=Role(role), screening_id=screening_id)

    # -- backup ---------------------------------------------------------------------

    BACKUP_HEADER = ["screening_id", "kind", "key", "value", "detail", "camp_year", "recorded_at", "recorded_by"]

    def export_backup(self, path: str | Path) -> int:
        """Dump students, values and doses to CSV; returns the row count."""
        rows = 0
        with self._lock, open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.BACKUP_HEADER)
            for screening_id in self.list_screening_ids():
                record = self.get_record(screening_id)
                writer.writerow([screening_id, "student", "rfid_token", record.rfid_token, "", "", "", ""])
                rows += 1
                for value in record.one_time_values.values():
                    writer.writerow(self._value_row(screening_id, "one_time", value))
                    rows += 1
                for history in record.observations.values():
                    for value in history:
                        writer.writerow(self._value_row(screening_id, "observation", value))
                        rows += 1
                for dose in record.doses:
                    writer.writerow([
                        screening_id, "dose", dose.vaccine_code, dose.dose_number, "",
                        "", dose.given_on.isoformat(), "",
                    ])
                    rows += 1
        return rows

    @staticmethod
    def _value_row(screening_id: str, kind: str, value: ParameterValue) -> list:
        if isinstance(value.value, date) and not isinstance(value.value, datetime):
            encoded = json.dumps({"date": value.value.isoformat()})
        else:
            encoded = json.dumps(value.value, ensure_ascii=False)
        return [
            screening_id, kind, value.key, encoded, value.detail or "",
            value.camp_year if value.camp_year is not None else "",
            value.recorded_at.isoformat(), value.recorded_by,
        ]

    def import_backup(self, path: str | Path, recorded_by: str = "") -> int:
        """Restore a backup produced by export_backup; returns rows applied."""
        applied = 0
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != self.BACKUP_HEADER:
                raise HmmsError(f"not a backup file: unexpected header {header}")
            for row in reader:
                screening_id, kind, key, raw_value, detail, camp_year, recorded_at, row_by = row
                if kind == "student":
                    self._import_student(screening_id, raw_value, recorded_by)
                elif kind in ("one_time", "observation"):
                    decoded = json.loads(raw_value)
                    if isinstance(decoded, dict) and set(decoded) == {"date"}:
                        decoded = date.fromisoformat(decoded["date"])
                    value = ParameterValue(
                        key=key,
                        value=decoded,
                        recorded_at=datetime.fromisoformat(recorded_at),
                        camp_year=int(camp_year) if camp_year else None,
                        recorded_by=row_by,
                        detail=detail or None,
                    )
                    self.record_value(screening_id, value)
                elif kind == "dose":
                    self.record_dose(
                        screening_id,
                        DoseEvent(vaccine_code=key, dose_number=int(raw_value),
                                  given_on=date.fromisoformat(recorded_at)),
                        recorded_by=recorded_by,
                    )
                else:
                    raise HmmsError(f"unknown backup row kind {kind!r}")
                applied += 1
        return applied

    def _import_student(self, screening_id: str, rfid_token: str, recorded_by: str) -> None:
        with self._write() as cur:
            if cur.execute("SELECT 1 FROM students WHERE screening_id = ?", (screening_id,)).fetchone():
                raise DuplicateScreeningId(f"screening id {screening_id!r} already registered",
                                           screening_id=screening_id)
            if cur.execute("SELECT 1 FROM students WHERE rfid_token = ?", (rfid_token,)).fetchone():
                raise DuplicateRfidToken("rfid token already issued")
            cur.execute("INSERT INTO students (screening_id, rfid_token) VALUES (?, ?)",
                        (screening_id, rfid_token))
            self._append_audit(cur, recorded_by, AuditAction.CREATE,
                               f"student:{screening_id}", "student restored from backup")


class _Txn:
    """Write transaction: store lock + BEGIN IMMEDIATE, commit/rollback on exit."""

    def __init__(self, conn: sqlite3.Connection, lock: threading.RLock):
        self._conn = conn
        self._lock = lock

    def __enter__(self) -> sqlite3.Cursor:
        self._lock.acquire()
        self._cur = self._conn.cursor()
        self._cur.execute("BEGIN IMMEDIATE")
        return self._cur

    def __exit__(self, exc_type, exc, tb) -> bool:
        try:
            if exc_type is None:
                self._conn.commit()
            else:
                self._conn.rollback()
        finally:
            self._cur.close()
            self._lock.release()
        return False
