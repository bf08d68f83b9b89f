from __future__ import annotations

import csv
import dataclasses
import io
import json
import random

import pytest

from conftest import AS_OF, make_record
from riskbridge.errors import (
    DuplicateInRanking,
    EmptyInput,
    IncompletePipeline,
    KExceedsRanking,
    SetOutsideUniverse,
    UnsupportedFormat,
)
from riskbridge.optimizer import RemediationPlan
from riskbridge.policy import assign_sla, load_builtin_profile
from riskbridge.reporting import (
    MetricsReport,
    build_trace,
    compliance_gain,
    f1_score,
    most_restrictive,
    optimization_efficiency,
    precision_at_k,
    render_report,
    replay_trace,
)
from riskbridge.scoring import (
    AssetContext,
    Environment,
    classify_urgency,
    compute_bii,
    compute_zdes,
)

EMPTY_PLAN = RemediationPlan((), frozenset(), 0.0, 0.0, 0.0, None, ())


def full_trace(record=None, asset=None, patch_id="P1", policy=None, effort=8.0):
    record = record or make_record(cve_id="CVE-2025-1234", cvss=9.5, kev=True)
    asset = asset or AssetContext(
        asset_id="edge-01", criticality=0.8, environment=Environment.INTERNET_FACING
    )
    policy = policy or load_builtin_profile("pci-dss")
    zdes = compute_zdes(record, AS_OF)
    bii = compute_bii(record, asset, effort)
    urgency = classify_urgency(record)
    sla = assign_sla(record, urgency, asset, policy, AS_OF)
    return build_trace(
        record=record,
        asset=asset,
        effort_hours=effort,
        zdes=zdes,
        bii=bii,
        urgency=urgency,
        sla=sla,
        risk_units=10.0 * zdes.value * bii.value,
        patch_id=patch_id,
        provenance={"nvd": "h1", "epss": "h2", "kev": "h3"},
    )


class TestBuildTrace:
    def test_full_trace_all_sections(self):
        trace = full_trace()
        data = trace.to_dict()
        assert data["inputs"]["cve_id"] == "CVE-2025-1234"
        assert data["zdes"]["value"] > 0
        assert data["bii"]["value"] > 0
        assert data["urgency"]["fired_rule"] == "cvss_ge_9"
        assert data["sla"]["due_basis"]["framework_id"] == "PCI-DSS"
        assert data["plan"]["patch_id"] == "P1"
        assert data["provenance"] == {"nvd": "h1", "epss": "h2", "kev": "h3"}

    def test_missing_stage_named(self):
        record = make_record()
        with pytest.raises(IncompletePipeline, match="scoring"):
            build_trace(
                record=record,
                asset=AssetContext(asset_id="a", criticality=0.5, environment=Environment.INTERNAL),
                effort_hours=1.0,
                zdes=None,
                bii=None,
                urgency=None,
                sla=None,
                risk_units=None,
            )

    def test_skipped_by_optimizer_still_valid(self):
        trace = full_trace(patch_id=None)
        assert trace.to_dict()["plan"]["patch_id"] is None

    def test_replay_reproduces_outputs(self):
        policy = load_builtin_profile("pci-dss")
        trace = full_trace(policy=policy)
        replayed = replay_trace(trace, [policy])
        assert replayed["zdes"] == trace.zdes
        assert replayed["bii"] == trace.bii
        assert replayed["urgency"] == trace.urgency
        assert replayed["sla"] == trace.sla


class TestPrecisionAtK:
    def test_all_hits(self):
        assert precision_at_k(["A", "B", "C"], {"A", "B", "C"}, 3) == 1.0

    def test_no_hits(self):
        assert precision_at_k(["A", "B", "C"], set(), 3) == 0.0

    def test_two_of_three(self):
        assert precision_at_k(["A", "B", "C", "D"], {"A", "C", "D"}, 3) == pytest.approx(2 / 3)

    def test_k_exceeds_ranking(self):
        with pytest.raises(KExceedsRanking):
            precision_at_k(["A"], {"A"}, 2)

    def test_duplicate_rejected(self):
        with pytest.raises(DuplicateInRanking):
            precision_at_k(["A", "A"], {"A"}, 2)


class TestF1:
    def test_perfect(self):
        assert f1_score({"A", "B"}, {"A", "B"}, {"A", "B", "C"}) == 1.0

    def test_disjoint(self):
        assert f1_score({"A"}, {"B"}, {"A", "B"}) == 0.0

    def test_half(self):
        assert f1_score({"A", "B"}, {"B", "C"}, {"A", "B", "C"}) == pytest.approx(0.5)

    def test_both_empty(self):
        assert f1_score(set(), set(), {"A"}) == 0.0

    def test_outside_universe(self):
        with pytest.raises(SetOutsideUniverse, match="Z"):
            f1_score({"Z"}, set(), {"A"})


class TestComplianceGain:
    def make_sla(self, base, adjusted):
        policy = load_builtin_profile("pci-dss")
        record = make_record(cvss=9.5, kev=True)
        sla = assign_sla(
            record,
            classify_urgency(record),
            AssetContext(asset_id="a", criticality=1.0, environment=Environment.INTERNET_FACING),
            policy,
            AS_OF,
        )
        return dataclasses.replace(sla, base_days=base, adjusted_days=adjusted)

    def test_matches_headline_tightening(self):
        assignments = [self.make_sla(30, 12), self.make_sla(30, 12)]
        assert compliance_gain(assignments) == pytest.approx(18.0)

    def test_identity_factors_zero_gain(self):
        assignments = [self.make_sla(90, 90)]
        assert compliance_gain(assignments) == 0.0

    def test_mean_of_mixed(self):
        assignments = [self.make_sla(30, 12), self.make_sla(90, 90)]
        assert compliance_gain(assignments) == pytest.approx(9.0)

    def test_negative_gain_legal(self):
        assignments = [self.make_sla(30, 40)]
        assert compliance_gain(assignments) == -10.0

    def test_empty_rejected(self):
        with pytest.raises(EmptyInput):
            compliance_gain([])


class TestOptimizationEfficiency:
    def test_fifteen_cves_ten_patches(self):
        plan = RemediationPlan(
            tuple(f"P{i}" for i in range(10)),
            frozenset(f"CVE-2025-{10000 + i}" for i in range(15)),
            1.0, 1.0, 1.0, None, (),
        )
        assert optimization_efficiency(plan) == pytest.approx(1.5)

    def test_empty_plan_zero(self):
        assert optimization_efficiency(EMPTY_PLAN) == 0.0

    def test_six_over_two(self):
        plan = RemediationPlan(
            ("P1", "P2"), frozenset(f"CVE-2025-{10000 + i}" for i in range(6)),
            1.0, 1.0, 1.0, None, (),
        )
        assert optimization_efficiency(plan) == 3.0


class TestMetricBounds:
    def test_random_label_sets(self):
        rng = random.Random(8)
        universe = [f"CVE-2025-{50000 + i}" for i in range(40)]
        for _ in range(200):
            ranked = rng.sample(universe, rng.randint(1, len(universe)))
            exploited = set(rng.sample(universe, rng.randint(0, len(universe))))
            k = rng.randint(1, len(ranked))
            p = precision_at_k(ranked, exploited, k)
            assert 0.0 <= p <= 1.0
            predicted = set(rng.sample(universe, rng.randint(0, 20)))
            f1 = f1_score(predicted, exploited, set(universe))
            assert 0.0 <= f1 <= 1.0


class TestMostRestrictive:
    def test_minimum_due_date_wins(self):
        record = make_record(cvss=9.5, kev=True)
        asset = AssetContext(asset_id="a", criticality=1.0, environment=Environment.INTERNET_FACING)
        urgency = classify_urgency(record)
        pci = assign_sla(record, urgency, asset, load_builtin_profile("pci-dss"), AS_OF)
        nist = assign_sla(record, urgency, asset, load_builtin_profile("nist-800-53"), AS_OF)
        winner = most_restrictive([pci, nist])
        assert winner.due_date == min(pci.due_date, nist.due_date)
        assert winner.due_basis.framework_id == "NIST-800-53"


class TestRenderReport:
    def metrics(self):
        return MetricsReport(
            precision_at_k=1.0, f1=0.8, cg_days=18.0, oe=1.5, roi=2.1, k=3, n=3
        )

    def traces(self, count=3):
        return [
            full_trace(record=make_record(cve_id=f"CVE-2025-{60000 + i}", cvss=7.0 + i))
            for i in range(count)
        ]

    def test_empty_run_valid_json(self):
        payload = render_report([], EMPTY_PLAN, self.metrics(), "json")
        document = json.loads(payload)
        assert document["traces"] == []
        assert document["summary"]["cve_count"] == 0
        assert document["schema_version"] == 1

    def test_byte_identical_across_calls(self):
        traces = self.traces()
        for fmt in ("json", "csv", "md"):
            first = render_report(traces, EMPTY_PLAN, self.metrics(), fmt)
            second = render_report(traces, EMPTY_PLAN, self.metrics(), fmt)
            assert first == second

    def test_csv_row_count(self):
        payload = render_report(self.traces(3), EMPTY_PLAN, self.metrics(), "csv")
        rows = list(csv.reader(io.StringIO(payload.decode("utf-8"))))
        assert len(rows) == 4  # header + 3 data rows
        assert rows[0][0] == "cve_id"

    def test_unsupported_format(self):
        with pytest.raises(UnsupportedFormat):
            render_report([], EMPTY_PLAN, self.metrics(), "xml")

    def test_markdown_contains_rows(self):
        text = render_report(self.traces(2), EMPTY_PLAN, self.metrics(), "md").decode("utf-8")
        assert text.count("| CVE-2025-") == 2
