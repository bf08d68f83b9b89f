"""Live feed clients: HTTP fetch, rate limiting, and payload normalization.

Each upstream payload is normalized into the same record shapes the fixture
files use, so everything downstream of fetch_feed is source-agnostic. The
transport is injectable for tests; the default uses requests.
"""

from __future__ import annotations

import logging
import time
from datetime import date
from typing import Callable

from ..errors import MalformedPayload, UnreachableSource
from .models import FeedSource

logger = logging.getLogger(__name__)

# transport(url, params, headers) -> parsed JSON body
Transport = Callable[[str, dict, dict], object]

DEFAULT_ENDPOINTS = {
    FeedSource.NVD: "https://services.nvd.nist.gov/rest/json/cves/2.0",
    FeedSource.EPSS: "https://api.first.org/data/v1/epss",
    FeedSource.KEV: "https://www.cisa.gov/sites/default/files/feeds/known_exploited_vulnerabilities.json",
}


def requests_transport(timeout_seconds: float = 30.0) -> Transport:
    import requests

    def transport(url: str, params: dict, headers: dict) -> object:
        try:
            response = requests.get(url, params=params, headers=headers, timeout=timeout_seconds)
            response.raise_for_status()
            return response.json()
        except requests.RequestException as exc:
            raise UnreachableSource(f"GET {url}: {exc}") from exc
        except ValueError as exc:
            raise MalformedPayload(f"GET {url}: response is not JSON: {exc}") from exc

    return transport


class RateLimiter:
    """Simple requests-per-minute limiter with monotonic bookkeeping."""

    def __init__(self, requests_per_minute: int, sleep=time.sleep, clock=time.monotonic):
        if requests_per_minute <= 0:
            raise ValueError("requests_per_minute must be positive")
        self.interval = 60.0 / requests_per_minute
        self._sleep = sleep
        self._clock = clock
        self._last_request: float | None = None

    def wait(self) -> None:
        now = self._clock()
        if self._last_request is not None:
            remaining = self.interval - (now - self._last_request)
            if remaining > 0:
                self._sleep(remaining)
                now = self._clock()
        self._last_request = now


def fetch_with_backoff(
    transport: Transport,
    url: str,
    params: dict,
    headers: dict,
    *,
    limiter: RateLimiter | None = None,
    max_attempts: int = 3,
    backoff_base_seconds: float = 1.0,
    sleep=time.sleep,
) -> object:
    """GET with rate limiting and exponential backoff on transport failure."""
    last_error: UnreachableSource | None = None
    for attempt in range(max_attempts):
        if limiter is not None:
            limiter.wait()
        try:
            return transport(url, params, headers)
        except UnreachableSource as exc:
            last_error = exc
            if attempt + 1 < max_attempts:
                delay = backoff_base_seconds * (2**attempt)
                logger.warning("fetch failed (%s), retrying in %.1fs", exc, delay)
                sleep(delay)
    assert last_error is not None
    raise last_error


def _require(payload: dict, key: str, source: str):
    if key not in payload:
        raise MalformedPayload(f"{source} payload missing {key!r}")
    return payload[key]


def parse_nvd_payload(payload: object) -> list[dict]:
    """Normalize an NVD CVE API 2.0 payload into NVD fixture records.

    Prefers the v4.0 base score when both v4 and v3.x metrics exist,
    recording the version actually used.
    """
    if not isinstance(payload, dict):
        raise MalformedPayload("NVD payload is not an object")
    vulnerabilities = _require(payload, "vulnerabilities", "NVD")
    if not isinstance(vulnerabilities, list):
        raise MalformedPayload("NVD vulnerabilities is not a list")
    records = []
    for item in vulnerabilities:
        try:
            cve = item["cve"]
            cve_id = cve["id"]
            published = cve["published"]
            descriptions = cve.get("descriptions", [])
            summary = next(
                (d["value"] for d in descriptions if d.get("lang") == "en"),
                descriptions[0]["value"] if descriptions else "",
            )
            metrics = cve.get("metrics", {})
            score, version = _pick_cvss(metrics)
        except (KeyError, TypeError, IndexError) as exc:
            raise MalformedPayload(f"NVD record malformed: {exc}") from exc
        if score is None:
            logger.warning("NVD record %s has no CVSS metrics, skipped", cve_id)
            continue
        records.append(
            {
                "cve_id": cve_id,
                "cvss_score": score,
                "cvss_version": version,
                "published_date": published,
                "summary": summary,
            }
        )
    return records


def _pick_cvss(metrics: dict) -> tuple[float | None, str | None]:
    for key, version in (
        ("cvssMetricV40", "V4"),
        ("cvssMetricV31", "V3"),
        ("cvssMetricV30", "V3"),
    ):
        entries = metrics.get(key)
        if entries:
            return float(entries[0]["cvssData"]["baseScore"]), version
    return None, None


def parse_epss_payload(payload: object) -> list[dict]:
    """Normalize a FIRST.org EPSS API payload into EPSS fixture records."""
    if not isinstance(payload, dict):
        raise MalformedPayload("EPSS payload is not an object")
    data = _require(payload, "data", "EPSS")
    if not isinstance(data, list):
        raise MalformedPayload("EPSS data is not a list")
    records = []
    for item in data:
        try:
            records.append({"cve_id": item["cve"], "epss": float(item["epss"])})
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedPayload(f"EPSS record malformed: {exc}") from exc
    return records


def parse_kev_payload(payload: object) -> list[dict]:
    """Normalize the CISA KEV catalog JSON into KEV fixture records."""
    if not isinstance(payload, dict):
        raise MalformedPayload("KEV payload is not an object")
    vulnerabilities = _require(payload, "vulnerabilities", "KEV")
    if not isinstance(vulnerabilities, list):
        raise MalformedPayload("KEV vulnerabilities is not a list")
    records = []
    for item in vulnerabilities:
        try:
            records.append({"cve_id": item["cveID"], "date_added": item["dateAdded"]})
        except (KeyError, TypeError) as exc:
            raise MalformedPayload(f"KEV record malformed: {exc}") from exc
    return records


PAYLOAD_PARSERS = {
    FeedSource.NVD: parse_nvd_payload,
    FeedSource.EPSS: parse_epss_payload,
    FeedSource.KEV: parse_kev_payload,
}


def build_request(
    source: FeedSource,
    query: list[str] | date | None,
    *,
    endpoint: str,
    api_key: str | None = None,
    page_size: int = 2000,
) -> tuple[str, dict, dict]:
    """Build (url, params, headers) for one feed request."""
    params: dict = {}
    headers: dict = {}
    if source is FeedSource.NVD:
        params["resultsPerPage"] = page_size
        if isinstance(query, date):
            params["pubStartDate"] = f"{query.isoformat()}T00:00:00.000"
        elif isinstance(query, list) and len(query) == 1:
            params["cveId"] = query[0]
        if api_key:
            headers["apiKey"] = api_key
    elif source is FeedSource.EPSS:
        if isinstance(query, list):
            params["cve"] = ",".join(sorted(query))
    # KEV is a whole-catalog download; queries filter client-side
    return endpoint, params, headers
