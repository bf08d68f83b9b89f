"""Acceptance gate: one test per shipping criterion, each printing a
PASS/FAIL line (run with `pytest -s tests/test_acceptance.py` to see them).

Everything here runs offline against the checked-in fixtures; no network,
and no secondary component required.
"""

from __future__ import annotations

import itertools
import json
import random
import time
from datetime import timedelta

import pytest

from conftest import AS_OF, TABLE5, make_record, write_fixture_dir
from riskbridge.cli import main as cli_main
from riskbridge.feeds import FeedCache, FeedSource, FeedStore, load_fixture, query_hash, serialize_fixture
from riskbridge.feeds.models import FeedSnapshot
from riskbridge.feeds.store import merge_feeds
from riskbridge.optimizer import Patch, RiskAssessment, plan_exact, plan_greedy
from riskbridge.pipeline import EngineConfig, run_pipeline
from riskbridge.policy import assign_sla, load_builtin_profile, replay_due_basis, validate_policy
from riskbridge.reporting import (
    compliance_gain,
    f1_score,
    optimization_efficiency,
    precision_at_k,
    replay_trace,
)
from riskbridge.optimizer import RemediationPlan
from riskbridge.scoring import (
    AssetContext,
    Environment,
    UrgencyLevel,
    classify_urgency,
    compute_zdes,
)


def report(line: str) -> None:
    print(f"\nACCEPTANCE PASS: {line}")


def test_table5_golden_suite(table5_fixture_dir, tmp_path, capsys):
    """simulate-zeroday reproduces the five published zero-day scores."""
    config_path = tmp_path / "config.json"
    config_path.write_text(
        json.dumps(
            {"network_mode": "OFFLINE", "fixtures_dir": str(table5_fixture_dir),
             "as_of": "2025-06-01"}
        )
    )
    started = time.perf_counter()
    code = cli_main(["--config", str(config_path), "simulate-zeroday"])
    elapsed = time.perf_counter() - started
    out = capsys.readouterr().out
    assert code == 0
    scores = json.loads(out)
    for cve_id, _cvss, expected in TABLE5:
        assert scores[cve_id] == pytest.approx(expected, abs=0.0005), cve_id
    assert elapsed < 1.0, f"runtime {elapsed:.2f}s exceeds 1s"
    report(f"table5 golden suite: 5/5 scores within ±0.0005 in {elapsed:.3f}s")


def test_zdes_property_suite():
    """1,000 randomized records: range, term sum, monotonicity, kev delta."""
    rng = random.Random(20250601)
    started = time.perf_counter()
    for index in range(1000):
        cvss = rng.uniform(0, 10)
        epss = rng.uniform(0, 1)
        kev = rng.random() < 0.3
        age = rng.randint(0, 700)
        published = AS_OF - timedelta(days=age)
        record = make_record(cve_id=f"CVE-2025-{10000 + index}", cvss=cvss, epss=epss,
                             kev=kev, published=published)
        score = compute_zdes(record, AS_OF)

        assert 0.0 <= score.value <= 1.0
        total = score.epss_term + score.cvss_term + score.kev_term + score.recency_term
        assert abs(score.value - total) <= 1e-9

        bump_epss = make_record(cvss=cvss, epss=min(1.0, epss + 0.05), kev=kev, published=published)
        bump_cvss = make_record(cvss=min(10.0, cvss + 0.5), epss=epss, kev=kev, published=published)
        fresher = make_record(cvss=cvss, epss=epss, kev=kev,
                              published=min(AS_OF, published + timedelta(days=30)))
        assert compute_zdes(bump_epss, AS_OF).value >= score.value
        assert compute_zdes(bump_cvss, AS_OF).value >= score.value
        assert compute_zdes(fresher, AS_OF).value >= score.value

        listed = make_record(cvss=cvss, epss=epss, kev=True, published=published)
        unlisted = make_record(cvss=cvss, epss=epss, kev=False, published=published)
        delta = compute_zdes(unlisted, AS_OF).value - compute_zdes(listed, AS_OF).value
        assert delta == pytest.approx(0.2, abs=1e-12)
    elapsed = time.perf_counter() - started
    assert elapsed < 5.0, f"runtime {elapsed:.2f}s exceeds 5s"
    report(f"zdes property suite: 1000 records, all invariants held in {elapsed:.3f}s")


def test_urgency_suite():
    """Exhaustive boundary grid plus kev=>URGENT over 1,000 random records."""
    expectations = 0
    for cvss, epss, kev in itertools.product(
        (8.9, 9.0), (0.29, 0.3, 0.31, 0.49, 0.5), (True, False)
    ):
        urgency = classify_urgency(make_record(cvss=cvss, epss=epss, kev=kev))
        if cvss >= 9 or epss >= 0.5 or kev:
            expected = UrgencyLevel.URGENT
        elif epss > 0.3:
            expected = UrgencyLevel.HIGH
        else:
            expected = UrgencyLevel.STANDARD
        assert urgency.level is expected, (cvss, epss, kev)
        expectations += 1

    rng = random.Random(77)
    for index in range(1000):
        record = make_record(
            cve_id=f"CVE-2025-{20000 + index}",
            cvss=rng.uniform(0, 10), epss=rng.uniform(0, 1), kev=True,
        )
        assert classify_urgency(record).level is UrgencyLevel.URGENT
    report(f"urgency suite: {expectations}-cell boundary grid + 1000 kev records correct")


def test_sla_suite():
    """Worked PCI example, the 18-day tightening headline, and replay."""
    pci = load_builtin_profile("pci-dss")
    edge = AssetContext(asset_id="edge", criticality=0.9, environment=Environment.INTERNET_FACING)

    record = make_record(cvss=9.6, kev=True)
    sla = assign_sla(record, classify_urgency(record), edge, pci, AS_OF)
    assert sla.adjusted_days == 12  # 30 * 0.5 * 0.75 = 11.25 -> ceil

    fixture = []
    for index in range(10):
        kev_record = make_record(cve_id=f"CVE-2025-{30000 + index}", cvss=9.1 + index * 0.05, kev=True)
        fixture.append(assign_sla(kev_record, classify_urgency(kev_record), edge, pci, AS_OF))
    gain = compliance_gain(fixture)
    assert gain == pytest.approx(18.0, abs=1e-9)

    rng = random.Random(4242)
    for index in range(500):
        policy = validate_policy(
            {
                "framework_id": "RANDOM",
                "version": "1",
                "base_sla_days": {
                    "urgent": rng.randint(3, 45),
                    "high": rng.randint(20, 90),
                    "standard": rng.randint(45, 200),
                },
                "threat_multipliers": [
                    {"when": "kev_listed", "factor": round(rng.uniform(0.1, 1.1), 2)},
                    {"when": f"epss >= {round(rng.uniform(0.2, 0.8), 2)}",
                     "factor": round(rng.uniform(0.3, 1.4), 2)},
                ],
                "env_multipliers": {
                    "internet_facing": round(rng.uniform(0.4, 1.1), 2),
                    "internal": 1.0,
                    "isolated": round(rng.uniform(1.0, 2.0), 2),
                },
            }
        )
        record = make_record(
            cve_id=f"CVE-2025-{40000 + index}", cvss=round(rng.uniform(0, 10), 1),
            epss=round(rng.random(), 3), kev=rng.random() < 0.3,
        )
        asset = AssetContext(
            asset_id="r", criticality=rng.random(), environment=rng.choice(list(Environment))
        )
        sla = assign_sla(record, classify_urgency(record), asset, policy, AS_OF)
        assert replay_due_basis(sla.due_basis, policy) == sla.adjusted_days
    report("sla suite: 30x0.5x0.75 -> 12 days, CG = 18.0 days, 500 replay triples exact")


def test_optimizer_oracle_suite():
    """50 random budgeted instances against the exact oracle."""
    rng = random.Random(31337)
    started = time.perf_counter()
    for instance in range(50):
        n_cves = rng.randint(5, 30)
        n_patches = rng.randint(3, 12)
        cves = [f"CVE-2025-{50000 + instance * 100 + i}" for i in range(n_cves)]
        risks = [
            RiskAssessment(cve_id=c, risk_units=round(rng.uniform(0.05, 9.5), 3), zdes=0, bii=0)
            for c in cves
        ]
        patches = [
            Patch(
                patch_id=f"P{i:02d}",
                covered_cves=frozenset(rng.sample(cves, rng.randint(1, max(1, n_cves // 2)))),
                effort_hours=round(rng.uniform(0.5, 10.0), 2),
            )
            for i in range(n_patches)
        ]
        budget = round(rng.uniform(1.0, 25.0), 1)

        greedy = plan_greedy(patches, risks, budget)
        exact = plan_exact(patches, risks, budget)
        assert greedy.risk_reduced >= 0.31 * exact.risk_reduced - 1e-9, instance

        unbudgeted_greedy = plan_greedy(patches, risks)
        unbudgeted_exact = plan_exact(patches, risks)
        assert unbudgeted_greedy.covered == unbudgeted_exact.covered, instance

        shuffled_p, shuffled_r = patches[:], risks[:]
        rng.shuffle(shuffled_p)
        rng.shuffle(shuffled_r)
        assert plan_greedy(shuffled_p, shuffled_r, budget) == greedy, instance
    elapsed = time.perf_counter() - started
    assert elapsed < 30.0, f"runtime {elapsed:.2f}s exceeds 30s"
    report(f"optimizer oracle suite: 50 instances within bound in {elapsed:.2f}s")


def test_metrics_suite():
    """Hand-computed metric oracles plus bounds over 200 random label sets."""
    assert precision_at_k(["A", "B", "C", "D"], {"A", "C", "D"}, 3) == pytest.approx(2 / 3)
    assert precision_at_k(["A", "B", "C"], {"A", "B", "C"}, 3) == 1.0
    assert f1_score({"A", "B"}, {"B", "C"}, {"A", "B", "C"}) == pytest.approx(0.5)
    fifteen_by_ten = RemediationPlan(
        tuple(f"P{i}" for i in range(10)),
        frozenset(f"CVE-2025-{60000 + i}" for i in range(15)),
        1.0, 1.0, 1.0, None, (),
    )
    assert optimization_efficiency(fifteen_by_ten) == pytest.approx(1.5)

    rng = random.Random(606)
    universe = [f"CVE-2025-{61000 + i}" for i in range(30)]
    for _ in range(200):
        ranked = rng.sample(universe, rng.randint(1, 30))
        truth = set(rng.sample(universe, rng.randint(0, 30)))
        k = rng.randint(1, len(ranked))
        assert 0.0 <= precision_at_k(ranked, truth, k) <= 1.0
        predicted = set(rng.sample(universe, rng.randint(0, 30)))
        assert 0.0 <= f1_score(predicted, truth, set(universe)) <= 1.0
    report("metrics suite: hand oracles (incl. OE=1.5) and 200 random label sets bounded")


def test_offline_determinism_and_replay(mixed_fixture_dir):
    """Byte-identical OFFLINE reports; every trace replays exactly."""
    config = EngineConfig(
        network_mode="OFFLINE",
        fixtures_dir=str(mixed_fixture_dir),
        as_of=AS_OF,
        asset_map_path=str(mixed_fixture_dir / "assets.json"),
        patches_path=str(mixed_fixture_dir / "patches.json"),
        profiles=("pci-dss", "nist-800-53"),
    )
    first = run_pipeline(config)
    second = run_pipeline(config)
    assert first.report_json == second.report_json

    for trace in first.traces:
        replayed = replay_trace(trace, first.policies, config.scoring)
        assert replayed["zdes"] == trace.zdes, trace.cve_id
        assert replayed["bii"] == trace.bii, trace.cve_id
        assert replayed["urgency"] == trace.urgency, trace.cve_id
        assert replayed["sla"] == trace.sla, trace.cve_id
    report(
        f"determinism: {len(first.report_json)}-byte reports identical; "
        f"{len(first.traces)} traces replay exactly"
    )


def test_feedstore_suite(tmp_path):
    """Round-trip hashes, missing-EPSS defaults, TTL expiry — no network."""
    directory = write_fixture_dir(
        tmp_path / "fx",
        nvd=[
            {"cve_id": "CVE-2025-0101", "cvss_score": 7.7, "cvss_version": "V4",
             "published_date": "2025-05-30", "summary": "demo"},
            {"cve_id": "CVE-2025-0102", "cvss_score": 5.1, "cvss_version": "V3",
             "published_date": "2025-05-01", "summary": "demo"},
        ],
        epss=[{"cve_id": "CVE-2025-0101", "epss": 0.61}],
        kev=[{"cve_id": "CVE-2025-0102", "date_added": "2025-05-02"}],
    )
    snapshot = load_fixture(directory / "nvd.json")
    copied = tmp_path / "copy.json"
    copied.write_text(serialize_fixture(snapshot), encoding="utf-8")
    assert load_fixture(copied).content_hash == snapshot.content_hash

    store = FeedStore(offline=True)
    store.register_fixture_dir(directory)
    merged = merge_feeds(
        store.fetch_feed(FeedSource.NVD),
        store.fetch_feed(FeedSource.EPSS),
        store.fetch_feed(FeedSource.KEV),
    )
    by_id = {r.cve_id: r for r in merged}
    assert by_id["CVE-2025-0102"].epss_probability == 0.0
    assert by_id["CVE-2025-0102"].epss_missing is True
    assert by_id["CVE-2025-0102"].kev_listed is True
    assert by_id["CVE-2025-0101"].epss_probability == 0.61

    from datetime import datetime, timezone

    t0 = datetime(2025, 6, 1, tzinfo=timezone.utc)
    cache = FeedCache(tmp_path / "cache", ttl_seconds=60)
    cache.put(FeedSource.EPSS, query_hash(None),
              FeedSnapshot.create(FeedSource.EPSS, [], fetched_at=t0, now=t0))
    assert cache.get(FeedSource.EPSS, query_hash(None), now=t0 + timedelta(seconds=59)) is not None
    assert cache.get(FeedSource.EPSS, query_hash(None), now=t0 + timedelta(seconds=60)) is None
    stale = cache.get(FeedSource.EPSS, query_hash(None), now=t0 + timedelta(seconds=61),
                      allow_stale=True)
    assert stale is not None and stale.served_stale
    report("feedstore suite: round-trip hash, missing-EPSS default, TTL expiry all offline")
