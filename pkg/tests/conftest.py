from __future__ import annotations

import json
from datetime import date
from pathlib import Path

import pytest

from riskbridge.feeds.models import CvssVersion, VulnRecord
from riskbridge.policy import load_builtin_profile
from riskbridge.scoring import AssetContext, Environment

FIXTURE_DIR = Path(__file__).parent / "fixtures"

# The five zero-day CVEs used across the golden suites: (cve_id, cvss, expected zdes)
TABLE5 = (
    ("CVE-2025-62406", 8.1, 0.593),
    ("CVE-2025-64324", 8.5, 0.605),
    ("CVE-2025-64325", 8.4, 0.602),
    ("CVE-2025-65015", 9.2, 0.626),
    ("CVE-2025-65013", 6.2, 0.536),
)

AS_OF = date(2025, 6, 1)


def make_record(
    cve_id="CVE-2025-0001",
    cvss=5.0,
    epss=0.0,
    epss_missing=False,
    kev=False,
    published=AS_OF,
    version=CvssVersion.V4,
) -> VulnRecord:
    return VulnRecord(
        cve_id=cve_id,
        cvss_score=cvss,
        cvss_version=version,
        epss_probability=epss,
        epss_missing=epss_missing,
        kev_listed=kev,
        published_date=published,
        summary="synthetic record",
    )


@pytest.fixture
def pci_policy():
    return load_builtin_profile("pci-dss")


@pytest.fixture
def internet_asset():
    return AssetContext(
        asset_id="edge-01", criticality=0.8, environment=Environment.INTERNET_FACING
    )


@pytest.fixture
def internal_asset():
    return AssetContext(asset_id="core-db", criticality=0.5, environment=Environment.INTERNAL)


@pytest.fixture
def table5_fixture_dir():
    return FIXTURE_DIR / "table5"


@pytest.fixture
def mixed_fixture_dir():
    return FIXTURE_DIR / "mixed"


def write_fixture_dir(directory: Path, nvd=(), epss=(), kev=(), fetched="2025-06-01T00:00:00Z"):
    """Write a {nvd,epss,kev}.json fixture set into a directory."""
    directory.mkdir(parents=True, exist_ok=True)
    for name, records in (("nvd", nvd), ("epss", epss), ("kev", kev)):
        document = {"source": name.upper(), "fetched_at": fetched, "records": list(records)}
        (directory / f"{name}.json").write_text(json.dumps(document, indent=2), encoding="utf-8")
    return directory
