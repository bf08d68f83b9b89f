"""Local snapshot cache keyed by (source, canonical query hash).

Entries live as JSON files under a cache directory so the CLI and the
service share results. Writes replace whole files (single writer per key);
reads never mutate, so concurrent readers are safe.
"""

from __future__ import annotations

import hashlib
import json
from datetime import date, datetime, timedelta
from pathlib import Path

from .models import FeedSnapshot, FeedSource, parse_rfc3339_datetime, utc_now

DEFAULT_TTL_SECONDS = 24 * 60 * 60


def query_hash(query: list[str] | date | None) -> str:
    """Canonical hash of a feed query (CVE id list, since-date, or all)."""
    if query is None:
        canon = "all"
    elif isinstance(query, date):
        canon = f"since:{query.isoformat()}"
    else:
        canon = "ids:" + ",".join(sorted(query))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


class FeedCache:
    def __init__(self, cache_dir: str | Path, ttl_seconds: int = DEFAULT_TTL_SECONDS):
        if ttl_seconds <= 0:
            raise ValueError(f"ttl_seconds must be positive, got {ttl_seconds}")
        self.cache_dir = Path(cache_dir)
        self.ttl_seconds = ttl_seconds

    def _path(self, source: FeedSource, qhash: str) -> Path:
        return self.cache_dir / f"{source.value.lower()}-{qhash}.json"

    def get(
        self,
        source: FeedSource,
        qhash: str,
        *,
        now: datetime | None = None,
        allow_stale: bool = False,
    ) -> FeedSnapshot | None:
        """Return the cached snapshot if fresh (now < fetched_at + ttl).

        With ``allow_stale`` an expired entry is still returned, marked
        ``served_stale`` — the stale-on-error fallback path.
        """
        now = now or utc_now()
        path = self._path(source, qhash)
        if not path.exists():
            return None
        try:
            entry = json.loads(path.read_text(encoding="utf-8"))
            fetched_at = parse_rfc3339_datetime(entry["fetched_at"])
            ttl = int(entry["ttl_seconds"])
            records = entry["records"]
            kind = FeedSource(entry["kind"])
        except Exception:
            return None  # corrupt entries are treated as misses
        fresh = now < fetched_at + timedelta(seconds=ttl)
        if not fresh and not allow_stale:
            return None
        return FeedSnapshot.create(
            source,
            records,
            kind=kind,
            fetched_at=fetched_at,
            now=max(now, fetched_at),
            served_stale=not fresh,
        )

    def put(self, source: FeedSource, qhash: str, snapshot: FeedSnapshot) -> None:
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        entry = {
            "kind": snapshot.kind.value,
            "fetched_at": snapshot.fetched_at.isoformat(),
            "ttl_seconds": self.ttl_seconds,
            "records": list(snapshot.records),
        }
        path = self._path(source, qhash)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(entry, ensure_ascii=False), encoding="utf-8")
        tmp.replace(path)
