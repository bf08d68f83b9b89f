"""Feed store: fetch/cache orchestration and the three-way merge."""

from __future__ import annotations

import logging
import time
from datetime import date, datetime
from pathlib import Path

from ..errors import OfflineNoFixture, ParseError, UnreachableSource
from .cache import FeedCache, query_hash
from .clients import (
    DEFAULT_ENDPOINTS,
    PAYLOAD_PARSERS,
    RateLimiter,
    Transport,
    build_request,
    fetch_with_backoff,
    requests_transport,
)
from .fixtures import load_fixture, validate_records
from .models import CvssVersion, FeedSnapshot, FeedSource, VulnRecord, parse_rfc3339_date, utc_now

logger = logging.getLogger(__name__)


def filter_records(kind: FeedSource, records: tuple[dict, ...], query: list[str] | date | None) -> list[dict]:
    """Narrow a full feed to a query: CVE id list, since-date, or all."""
    if query is None:
        return list(records)
    if isinstance(query, date):
        date_field = {FeedSource.NVD: "published_date", FeedSource.KEV: "date_added"}.get(kind)
        if date_field is None:
            return list(records)  # EPSS carries no date; a since-query keeps everything
        return [
            r for r in records if parse_rfc3339_date(r[date_field], where=date_field) >= query
        ]
    wanted = set(query)
    return [r for r in records if r["cve_id"] in wanted]


class FeedStore:
    """Fetches and caches feed snapshots; fully offline with fixtures.

    In OFFLINE mode every fetch resolves against registered fixture files.
    In LIVE mode fetches hit the configured endpoints through a rate-limited
    transport, write through to the cache, and fall back to a stale cache
    entry (marked served_stale) when the source is unreachable.
    """

    def __init__(
        self,
        *,
        offline: bool = True,
        cache: FeedCache | None = None,
        endpoints: dict | None = None,
        api_keys: dict | None = None,
        page_size: int = 2000,
        rate_limit_per_minute: int = 30,
        stale_on_error: bool = True,
        transport: Transport | None = None,
        max_attempts: int = 3,
        retry_sleep=None,
        clock=utc_now,
    ):
        self.offline = offline
        self.cache = cache
        self.endpoints = {**DEFAULT_ENDPOINTS, **(endpoints or {})}
        self.api_keys = api_keys or {}
        self.page_size = page_size
        self.stale_on_error = stale_on_error
        self.transport = transport or (None if offline else requests_transport())
        self.limiter = RateLimiter(rate_limit_per_minute)
        self.max_attempts = max_attempts
        self.retry_sleep = retry_sleep if retry_sleep is not None else time.sleep
        self.clock = clock
        self._fixtures: dict[FeedSource, Path] = {}

    def register_fixture(self, source: FeedSource, path: str | Path) -> None:
        self._fixtures[source] = Path(path)

    def register_fixture_dir(self, directory: str | Path) -> None:
        """Register <dir>/{nvd,epss,kev}.json for whichever files exist."""
        directory = Path(directory)
        for source in (FeedSource.NVD, FeedSource.EPSS, FeedSource.KEV):
            candidate = directory / f"{source.value.lower()}.json"
            if candidate.exists():
                self.register_fixture(source, candidate)

    def has_fixture(self, source: FeedSource) -> bool:
        return source in self._fixtures

    def fetch_feed(self, source: FeedSource, query: list[str] | date | None = None) -> FeedSnapshot:
        """Fetch one feed, preferring fixtures offline and the cache live."""
        now = self.clock()
        if self.offline:
            return self._fetch_fixture(source, query, now)
        return self._fetch_live(source, query, now)

    def _fetch_fixture(self, source: FeedSource, query, now: datetime) -> FeedSnapshot:
        path = self._fixtures.get(source)
        if path is None:
            raise OfflineNoFixture(
                f"offline mode and no fixture registered for {source.value}"
            )
        snapshot = load_fixture(path, now=now)
        records = filter_records(snapshot.kind, snapshot.records, query)
        return FeedSnapshot.create(
            FeedSource.FIXTURE, records, kind=snapshot.kind, fetched_at=snapshot.fetched_at, now=now
        )

    def _fetch_live(self, source: FeedSource, query, now: datetime) -> FeedSnapshot:
        qhash = query_hash(query)
        if self.cache is not None:
            cached = self.cache.get(source, qhash, now=now)
            if cached is not None:
                return cached
        url, params, headers = build_request(
            source,
            query,
            endpoint=self.endpoints[source],
            api_key=self.api_keys.get(source),
            page_size=self.page_size,
        )
        try:
            payload = fetch_with_backoff(
                self.transport,
                url,
                params,
                headers,
                limiter=self.limiter,
                max_attempts=self.max_attempts,
                sleep=self.retry_sleep,
            )
        except UnreachableSource:
            if self.stale_on_error and self.cache is not None:
                stale = self.cache.get(source, qhash, now=now, allow_stale=True)
                if stale is not None:
                    logger.warning("%s unreachable, serving stale cache entry", source.value)
                    return stale
            raise
        records = filter_records(source, tuple(PAYLOAD_PARSERS[source](payload)), query)
        snapshot = FeedSnapshot.create(source, records, fetched_at=now, now=now)
        if self.cache is not None:
            self.cache.put(source, qhash, snapshot)
        return snapshot


def merge_feeds(nvd: FeedSnapshot, epss: FeedSnapshot, kev: FeedSnapshot) -> list[VulnRecord]:
    """Join the three feeds into merged records, NVD as the CVE universe.

    EPSS probabilities join by cve_id (missing -> 0 with epss_missing=True);
    kev_listed is KEV membership. EPSS/KEV ids absent from NVD are logged and
    dropped. Output is deterministic: ascending cve_id.
    """
    for snapshot, expected in ((nvd, FeedSource.NVD), (epss, FeedSource.EPSS), (kev, FeedSource.KEV)):
        if snapshot.kind is not expected:
            raise ParseError(
                f"merge_feeds: expected a {expected.value} snapshot, got {snapshot.kind.value}"
            )
        validate_records(list(snapshot.records), expected)

    epss_by_id = {r["cve_id"]: float(r["epss"]) for r in epss.records}
    kev_ids = {r["cve_id"] for r in kev.records}

    merged: list[VulnRecord] = []
    universe: set[str] = set()
    for record in sorted(nvd.records, key=lambda r: r["cve_id"]):
        cve_id = record["cve_id"]
        universe.add(cve_id)
        probability = epss_by_id.get(cve_id)
        merged.append(
            VulnRecord(
                cve_id=cve_id,
                cvss_score=float(record["cvss_score"]),
                cvss_version=CvssVersion(record["cvss_version"]),
                epss_probability=probability if probability is not None else 0.0,
                epss_missing=probability is None,
                kev_listed=cve_id in kev_ids,
                published_date=parse_rfc3339_date(record["published_date"], where="published_date"),
                summary=record.get("summary", ""),
                tags=tuple(record.get("tags", ())),
            )
        )

    for label, ids in (("EPSS", epss_by_id.keys()), ("KEV", kev_ids)):
        orphans = sorted(set(ids) - universe)
        if orphans:
            logger.warning("%s ids absent from NVD universe, dropped: %s", label, ", ".join(orphans))
    return merged


def snapshots_from_records(records: list[VulnRecord], *, now: datetime | None = None) -> tuple[FeedSnapshot, FeedSnapshot, FeedSnapshot]:
    """Re-wrap merged records as (nvd, epss, kev) snapshots (merge is idempotent over these)."""
    now = now or utc_now()
    nvd_records = [
        {
            "cve_id": r.cve_id,
            "cvss_score": r.cvss_score,
            "cvss_version": r.cvss_version.value,
            "published_date": r.published_date.isoformat(),
            "summary": r.summary,
            "tags": list(r.tags),
        }
        for r in records
    ]
    epss_records = [
        {"cve_id": r.cve_id, "epss": r.epss_probability} for r in records if not r.epss_missing
    ]
    kev_records = [
        {"cve_id": r.cve_id, "date_added": r.published_date.isoformat()}
        for r in records
        if r.kev_listed
    ]
    make = lambda kind, recs: FeedSnapshot.create(kind, recs, fetched_at=now, now=now)
    return (
        make(FeedSource.NVD, nvd_records),
        make(FeedSource.EPSS, epss_records),
        make(FeedSource.KEV, kev_records),
    )
