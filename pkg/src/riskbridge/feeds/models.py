"""Feed snapshot and merged vulnerability record models."""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from enum import Enum

from ..errors import ParseError

CVE_ID_RE = re.compile(r"^CVE-\d{4}-\d{4,}$")


class FeedSource(str, Enum):
    NVD = "NVD"
    EPSS = "EPSS"
    KEV = "KEV"
    FIXTURE = "FIXTURE"


class CvssVersion(str, Enum):
    V3 = "V3"
    V4 = "V4"


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


def parse_rfc3339_date(value: str, *, where: str = "date") -> date:
    """Parse an RFC 3339 date or datetime string down to a UTC date."""
    if not isinstance(value, str):
        raise ParseError(f"{where}: expected RFC 3339 string, got {type(value).__name__}")
    text = value.replace("Z", "+00:00")
    try:
        if "T" in text:
            return datetime.fromisoformat(text).date()
        return date.fromisoformat(text)
    except ValueError as exc:
        raise ParseError(f"{where}: invalid RFC 3339 date {value!r}: {exc}") from exc


def parse_rfc3339_datetime(value: str, *, where: str = "timestamp") -> datetime:
    if not isinstance(value, str):
        raise ParseError(f"{where}: expected RFC 3339 string, got {type(value).__name__}")
    text = value.replace("Z", "+00:00")
    try:
        parsed = datetime.fromisoformat(text)
    except ValueError as exc:
        raise ParseError(f"{where}: invalid RFC 3339 timestamp {value!r}: {exc}") from exc
    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=timezone.utc)
    return parsed.astimezone(timezone.utc)


def content_hash(records: list[dict]) -> str:
    """Order-insensitive sha256 over record content.

    Each record is rendered as canonical JSON (sorted keys); the rendered
    lines are sorted before hashing so permuting the input list cannot
    change the hash.
    """
    lines = sorted(
        json.dumps(record, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        for record in records
    )
    digest = hashlib.sha256()
    for line in lines:
        digest.update(line.encode("utf-8"))
        digest.update(b"\n")
    return digest.hexdigest()


@dataclass(frozen=True)
class FeedSnapshot:
    """One fetched (or fixture-loaded) copy of a feed.

    ``source`` records provenance (live source, or FIXTURE when loaded from
    a file); ``kind`` records which feed's record schema the records follow,
    so fixture snapshots stay mergeable and re-serializable.
    """

    source: FeedSource
    kind: FeedSource
    fetched_at: datetime
    content_hash: str
    records: tuple[dict, ...]
    served_stale: bool = False

    @classmethod
    def create(
        cls,
        source: FeedSource,
        records: list[dict],
        *,
        kind: FeedSource | None = None,
        fetched_at: datetime | None = None,
        now: datetime | None = None,
        served_stale: bool = False,
    ) -> "FeedSnapshot":
        now = now or utc_now()
        fetched_at = fetched_at or now
        if fetched_at > now:
            raise ParseError(f"fetched_at {fetched_at.isoformat()} is in the future")
        return cls(
            source=source,
            kind=kind or source,
            fetched_at=fetched_at,
            content_hash=content_hash(records),
            records=tuple(records),
            served_stale=served_stale,
        )


@dataclass(frozen=True)
class VulnRecord:
    """One CVE's merged intelligence across NVD, EPSS, and KEV."""

    cve_id: str
    cvss_score: float
    cvss_version: CvssVersion
    epss_probability: float
    epss_missing: bool
    kev_listed: bool
    published_date: date
    summary: str = ""
    tags: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not CVE_ID_RE.match(self.cve_id):
            raise ParseError(f"invalid cve_id {self.cve_id!r}")
        if not 0.0 <= self.cvss_score <= 10.0:
            raise ParseError(f"{self.cve_id}: cvss_score {self.cvss_score} outside [0, 10]")
        if not 0.0 <= self.epss_probability <= 1.0:
            raise ParseError(
                f"{self.cve_id}: epss_probability {self.epss_probability} outside [0, 1]"
            )
        if self.epss_missing and self.epss_probability != 0.0:
            raise ParseError(f"{self.cve_id}: epss_missing requires epss_probability = 0")

    def to_dict(self) -> dict:
        return {
            "cve_id": self.cve_id,
            "cvss_score": self.cvss_score,
            "cvss_version": self.cvss_version.value,
            "epss_probability": self.epss_probability,
            "epss_missing": self.epss_missing,
            "kev_listed": self.kev_listed,
            "published_date": self.published_date.isoformat(),
            "summary": self.summary,
            "tags": list(self.tags),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "VulnRecord":
        return cls(
            cve_id=data["cve_id"],
            cvss_score=float(data["cvss_score"]),
            cvss_version=CvssVersion(data["cvss_version"]),
            epss_probability=float(data["epss_probability"]),
            epss_missing=bool(data["epss_missing"]),
            kev_listed=bool(data["kev_listed"]),
            published_date=parse_rfc3339_date(data["published_date"], where="published_date"),
            summary=data.get("summary", ""),
            tags=tuple(data.get("tags", ())),
        )
