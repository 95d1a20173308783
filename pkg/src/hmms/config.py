"""Service configuration loading.

Configuration is a single JSON object. Every key is optional; omitted path
keys fall back to the packaged defaults and the database defaults to a file
next to the config. Relative paths are resolved against the config file's
directory so a config directory can be moved as a unit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import FileUnreadable, MalformedConfig

DEFAULT_PORT = 8000
DEFAULT_HOST = "127.0.0.1"
DEFAULT_SESSION_TTL_MINUTES = 60

_KNOWN_KEYS = {
    "database_path",
    "catalog_path",
    "schedule_path",
    "ruleset_path",
    "host",
    "port",
    "session_ttl_minutes",
}


@dataclass(frozen=True)
class ServiceConfig:
    database_path: str = "hmms.db"
    catalog_path: str | None = None
    schedule_path: str | None = None
    ruleset_path: str | None = None
    host: str = DEFAULT_HOST
    port: int = DEFAULT_PORT
    session_ttl_minutes: int = DEFAULT_SESSION_TTL_MINUTES
    source_path: str | None = field(default=None, compare=False)


def load_config(path: str | Path | None) -> ServiceConfig:
    """Read a config file, or return all defaults when ``path`` is None."""
    if path is None:
        return ServiceConfig()
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise FileUnreadable(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedConfig(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise MalformedConfig(f"config {path} must be a JSON object")
    unknown = set(raw) - _KNOWN_KEYS
    if unknown:
        raise MalformedConfig(f"config {path} has unknown keys: {sorted(unknown)}")

    base = path.resolve().parent

    def resolve(key: str) -> str | None:
        value = raw.get(key)
        if value is None:
            return None
        if not isinstance(value, str) or not value:
            raise MalformedConfig(f"config key {key!r} must be a non-empty string")
        candidate = Path(value)
        if not candidate.is_absolute():
            candidate = base / candidate
        return str(candidate)

    port = raw.get("port", DEFAULT_PORT)
    if not isinstance(port, int) or isinstance(port, bool) or not 1 <= port <= 65535:
        raise MalformedConfig("config key 'port' must be an integer in 1..65535")
    ttl = raw.get("session_ttl_minutes", DEFAULT_SESSION_TTL_MINUTES)
    if not isinstance(ttl, int) or isinstance(ttl, bool) or ttl < 1:
        raise MalformedConfig("config key 'session_ttl_minutes' must be a positive integer")
    host = raw.get("host", DEFAULT_HOST)
    if not isinstance(host, str) or not host:
        raise MalformedConfig("config key 'host' must be a non-empty string")

    return ServiceConfig(
        database_path=resolve("database_path") or str(base / "hmms.db"),
        catalog_path=resolve("catalog_path"),
        schedule_path=resolve("schedule_path"),
        ruleset_path=resolve("ruleset_path"),
        host=host,
        port=port,
        session_ttl_minutes=ttl,
        source_path=str(path),
    )
