"""Fixture file loading and serialization.

A fixture is the normalized offline form of one feed:

    {"source": "NVD" | "EPSS" | "KEV", "fetched_at": <RFC 3339>, "records": [...]}

NVD records carry {cve_id, cvss_score, cvss_version, published_date, summary};
EPSS records {cve_id, epss}; KEV records {cve_id, date_added}. The same schema
is used for all three sources so the whole pipeline runs without network.
"""

from __future__ import annotations

import json
from datetime import datetime
from pathlib import Path

from ..errors import ParseError
from .models import (
    CVE_ID_RE,
    CvssVersion,
    FeedSnapshot,
    FeedSource,
    parse_rfc3339_date,
    parse_rfc3339_datetime,
)

_REQUIRED_FIELDS = {
    FeedSource.NVD: ("cve_id", "cvss_score", "cvss_version", "published_date", "summary"),
    FeedSource.EPSS: ("cve_id", "epss"),
    FeedSource.KEV: ("cve_id", "date_added"),
}


def validate_record(record: dict, kind: FeedSource, index: int) -> None:
    """Validate one source-native record against its feed schema."""
    where = f"records[{index}]"
    if not isinstance(record, dict):
        raise ParseError(f"{where}: expected object, got {type(record).__name__}")
    for field_name in _REQUIRED_FIELDS[kind]:
        if field_name not in record:
            raise ParseError(f"{where}: missing field {field_name!r}")
    cve_id = record["cve_id"]
    if not isinstance(cve_id, str) or not CVE_ID_RE.match(cve_id):
        raise ParseError(f"{where}.cve_id: invalid CVE id {cve_id!r}")
    if kind is FeedSource.NVD:
        score = record["cvss_score"]
        if not isinstance(score, (int, float)) or not 0.0 <= float(score) <= 10.0:
            raise ParseError(f"{where}.cvss_score: {score!r} outside [0, 10]")
        version = record["cvss_version"]
        try:
            CvssVersion(version)
        except ValueError:
            raise ParseError(f"{where}.cvss_version: {version!r} is not one of V3, V4") from None
        parse_rfc3339_date(record["published_date"], where=f"{where}.published_date")
    elif kind is FeedSource.EPSS:
        epss = record["epss"]
        if not isinstance(epss, (int, float)) or not 0.0 <= float(epss) <= 1.0:
            raise ParseError(f"{where}.epss: {epss!r} outside [0, 1]")
    elif kind is FeedSource.KEV:
        parse_rfc3339_date(record["date_added"], where=f"{where}.date_added")


def validate_records(records: list[dict], kind: FeedSource) -> None:
    seen: set[str] = set()
    for index, record in enumerate(records):
        validate_record(record, kind, index)
        cve_id = record["cve_id"]
        if cve_id in seen:
            raise ParseError(f"records[{index}]: duplicate cve_id {cve_id}")
        seen.add(cve_id)


def load_fixture(path: str | Path, *, now: datetime | None = None) -> FeedSnapshot:
    """Load a fixture file into a FeedSnapshot with source=FIXTURE."""
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"{path}: cannot read fixture: {exc}") from exc
    try:
        document = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    if not isinstance(document, dict):
        raise ParseError(f"{path}: fixture root must be an object")
    for field_name in ("source", "fetched_at", "records"):
        if field_name not in document:
            raise ParseError(f"{path}: missing field {field_name!r}")
    try:
        kind = FeedSource(document["source"])
    except ValueError:
        raise ParseError(f"{path}: source {document['source']!r} is not one of NVD, EPSS, KEV") from None
    if kind is FeedSource.FIXTURE:
        raise ParseError(f"{path}: fixture files must declare the native source, not FIXTURE")
    fetched_at = parse_rfc3339_datetime(document["fetched_at"], where=f"{path}: fetched_at")
    records = document["records"]
    if not isinstance(records, list):
        raise ParseError(f"{path}: records must be a list")
    try:
        validate_records(records, kind)
    except ParseError as exc:
        raise ParseError(f"{path}: {exc.message}") from exc
    return FeedSnapshot.create(
        FeedSource.FIXTURE, records, kind=kind, fetched_at=fetched_at, now=now
    )


def serialize_fixture(snapshot: FeedSnapshot) -> str:
    """Render a snapshot back to fixture-file JSON (round-trips by content hash)."""
    document = {
        "source": snapshot.kind.value,
        "fetched_at": snapshot.fetched_at.isoformat(),
        "records": list(snapshot.records),
    }
    return json.dumps(document, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
