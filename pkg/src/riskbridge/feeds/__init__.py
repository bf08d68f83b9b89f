from .models import CvssVersion, FeedSnapshot, FeedSource, VulnRecord, content_hash
from .fixtures import load_fixture, serialize_fixture
from .cache import DEFAULT_TTL_SECONDS, FeedCache, query_hash
from .store import FeedStore, merge_feeds, snapshots_from_records

__all__ = [
    "CvssVersion",
    "FeedSnapshot",
    "FeedSource",
    "VulnRecord",
    "content_hash",
    "load_fixture",
    "serialize_fixture",
    "DEFAULT_TTL_SECONDS",
    "FeedCache",
    "query_hash",
    "FeedStore",
    "merge_feeds",
    "snapshots_from_records",
]
