"""Audit traces, evaluation metrics, and report rendering.

The audit trace is the explainability contract: every number the engine
produced for a CVE, alongside the exact inputs and rules that produced it,
so that scoring and SLA assignment replay bit-for-bit from the trace alone.
Reports are deterministic byte-for-byte for identical inputs; the JSON form
is the canonical machine format (schema in docs/report_schema.md).
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from datetime import date, timedelta
from enum import Enum
from typing import Mapping, Sequence

from .errors import (
    DuplicateInRanking,
    EmptyInput,
    IncompletePipeline,
    KExceedsRanking,
    SetOutsideUniverse,
    UnsupportedFormat,
    ValidationError,
)
from .feeds.models import VulnRecord
from .optimizer import RemediationPlan
from .policy import PolicyDocument, SlaAssignment, assign_sla
from .scoring import (
    AssetContext,
    BiiScore,
    Environment,
    ScoringConfig,
    UrgencyClass,
    UrgencyLevel,
    ZdesScore,
    classify_urgency,
    compute_bii,
    compute_zdes,
)

REPORT_SCHEMA_VERSION = 1

CSV_COLUMNS = (
    "cve_id",
    "urgency",
    "fired_rule",
    "zdes",
    "bii",
    "risk_units",
    "framework_id",
    "base_days",
    "adjusted_days",
    "due_date",
    "patch_id",
)


class ReportFormat(str, Enum):
    JSON = "json"
    CSV = "csv"
    MARKDOWN = "md"


@dataclass(frozen=True)
class UrgencyOverrideNote:
    original_level: str
    override_level: str
    justification: str

    def to_dict(self) -> dict:
        return {
            "original_level": self.original_level,
            "override_level": self.override_level,
            "justification": self.justification,
        }


@dataclass(frozen=True)
class SlaExceptionNote:
    due_date: date
    justification: str

    def to_dict(self) -> dict:
        return {"due_date": self.due_date.isoformat(), "justification": self.justification}


@dataclass(frozen=True)
class CriticalityOverrideNote:
    original_value: float
    override_value: float
    justification: str

    def to_dict(self) -> dict:
        return {
            "original_value": self.original_value,
            "override_value": self.override_value,
            "justification": self.justification,
        }


@dataclass(frozen=True)
class AuditTrace:
    """Per-CVE chain of inputs, rules fired, and score components."""

    cve_id: str
    inputs: dict  # record fields + asset context + effort hours, as consumed
    zdes: ZdesScore
    bii: BiiScore
    urgency: UrgencyClass
    urgency_override: UrgencyOverrideNote | None
    sla: SlaAssignment
    sla_exception: SlaExceptionNote | None
    risk_units: float
    patch_id: str | None
    provenance: dict  # feed name -> snapshot content hash
    criticality_override: CriticalityOverrideNote | None = None

    def to_dict(self) -> dict:
        return {
            "cve_id": self.cve_id,
            "inputs": {
                **self.inputs,
                "criticality_override": (
                    self.criticality_override.to_dict() if self.criticality_override else None
                ),
            },
            "zdes": self.zdes.to_dict(),
            "bii": self.bii.to_dict(),
            "urgency": {
                **self.urgency.to_dict(),
                "override": self.urgency_override.to_dict() if self.urgency_override else None,
            },
            "sla": {
                **self.sla.to_dict(),
                "exception": self.sla_exception.to_dict() if self.sla_exception else None,
            },
            "plan": {"patch_id": self.patch_id, "risk_units": self.risk_units},
            "provenance": self.provenance,
        }


def build_trace(
    *,
    record: VulnRecord | None,
    asset: AssetContext | None,
    effort_hours: float | None,
    zdes: ZdesScore | None,
    bii: BiiScore | None,
    urgency: UrgencyClass | None,
    sla: SlaAssignment | None,
    risk_units: float | None,
    urgency_override: UrgencyOverrideNote | None = None,
    sla_exception: SlaExceptionNote | None = None,
    criticality_override: CriticalityOverrideNote | None = None,
    patch_id: str | None = None,
    provenance: Mapping[str, str] | None = None,
) -> AuditTrace:
    """Assemble the per-CVE trace; raises if any pipeline stage is missing.

    ``patch_id=None`` is a valid outcome (the optimizer may skip a CVE);
    every other stage must have run.
    """
    if record is None or asset is None or effort_hours is None:
        raise IncompletePipeline("missing stage: ingest")
    if zdes is None or bii is None:
        raise IncompletePipeline(f"missing stage: scoring for {record.cve_id}")
    if urgency is None:
        raise IncompletePipeline(f"missing stage: classification for {record.cve_id}")
    if sla is None:
        raise IncompletePipeline(f"missing stage: sla for {record.cve_id}")
    if risk_units is None:
        raise IncompletePipeline(f"missing stage: risk assessment for {record.cve_id}")
    inputs = {
        **record.to_dict(),
        "asset_id": asset.asset_id,
        "criticality": asset.criticality,
        "environment": asset.environment.value,
        "effort_hours": effort_hours,
    }
    return AuditTrace(
        cve_id=record.cve_id,
        inputs=inputs,
        zdes=zdes,
        bii=bii,
        urgency=urgency,
        urgency_override=urgency_override,
        sla=sla,
        sla_exception=sla_exception,
        risk_units=risk_units,
        patch_id=patch_id,
        provenance=dict(provenance or {}),
        criticality_override=criticality_override,
    )


def replay_trace(
    trace: AuditTrace,
    policies: Sequence[PolicyDocument],
    config: ScoringConfig = ScoringConfig(),
) -> dict:
    """Recompute scoring, classification, and SLA from a trace's recorded
    inputs; returns the recomputed values for comparison with the trace."""
    record = VulnRecord.from_dict(trace.inputs)
    asset = AssetContext(
        asset_id=trace.inputs["asset_id"],
        criticality=trace.inputs["criticality"],
        environment=Environment(trace.inputs["environment"]),
    )
    zdes = compute_zdes(record, trace.zdes.as_of, config)
    bii = compute_bii(record, asset, trace.inputs["effort_hours"], config)
    urgency = classify_urgency(record)
    if trace.urgency_override is not None:
        urgency = UrgencyClass(
            UrgencyLevel(trace.urgency_override.override_level), trace.urgency.fired_rule
        )
    as_of = trace.sla.due_date - timedelta(days=trace.sla.adjusted_days)
    candidates = [assign_sla(record, urgency, asset, policy, as_of) for policy in policies]
    sla = most_restrictive(candidates)
    return {"zdes": zdes, "bii": bii, "urgency": urgency, "sla": sla}


def most_restrictive(assignments: Sequence[SlaAssignment]) -> SlaAssignment:
    """Earliest due date wins across profiles; framework id breaks ties."""
    if not assignments:
        raise EmptyInput("no SLA assignments to compare")
    return min(assignments, key=lambda a: (a.due_date, a.due_basis.framework_id))


def precision_at_k(ranked: Sequence[str], exploited: set[str], k: int) -> float:
    """Fraction of the top-k ranked CVEs that are in the exploited set."""
    if k <= 0:
        raise ValidationError(f"k must be positive, got {k}")
    if k > len(ranked):
        raise KExceedsRanking(f"k={k} exceeds ranking of {len(ranked)}")
    if len(set(ranked)) != len(ranked):
        seen: set[str] = set()
        for cve in ranked:
            if cve in seen:
                raise DuplicateInRanking(f"duplicate {cve} in ranking")
            seen.add(cve)
    hits = sum(1 for cve in ranked[:k] if cve in exploited)
    return hits / k


def f1_score(predicted_positive: set[str], actual_positive: set[str], universe: set[str]) -> float:
    """Harmonic mean of precision and recall; 0 whenever undefined."""
    if not predicted_positive <= universe:
        extra = sorted(predicted_positive - universe)
        raise SetOutsideUniverse(f"predicted ids outside universe: {', '.join(extra)}")
    if not actual_positive <= universe:
        extra = sorted(actual_positive - universe)
        raise SetOutsideUniverse(f"actual ids outside universe: {', '.join(extra)}")
    true_positive = len(predicted_positive & actual_positive)
    precision = true_positive / len(predicted_positive) if predicted_positive else 0.0
    recall = true_positive / len(actual_positive) if actual_positive else 0.0
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def compliance_gain(assignments: Sequence[SlaAssignment]) -> float:
    """Mean SLA tightening in days: base_days minus adjusted_days.

    Negative values are legal (factors above 1 relax deadlines)."""
    if not assignments:
        raise EmptyInput("compliance_gain over an empty assignment list")
    return sum(a.base_days - a.adjusted_days for a in assignments) / len(assignments)


def optimization_efficiency(plan: RemediationPlan) -> float:
    """CVEs mitigated per selected patch (0 for the empty plan)."""
    if not plan.selected:
        return 0.0
    return len(plan.covered) / len(plan.selected)


@dataclass(frozen=True)
class MetricsReport:
    precision_at_k: float
    f1: float
    cg_days: float
    oe: float
    roi: float
    k: int
    n: int

    def to_dict(self) -> dict:
        return {
            "precision_at_k": self.precision_at_k,
            "f1": self.f1,
            "cg_days": self.cg_days,
            "oe": self.oe,
            "roi": self.roi,
            "k": self.k,
            "n": self.n,
        }


def compute_metrics(
    records: Sequence[VulnRecord],
    zdes: Mapping[str, ZdesScore],
    urgencies: Mapping[str, UrgencyClass],
    assignments: Sequence[SlaAssignment],
    plan: RemediationPlan,
    k: int = 3,
) -> MetricsReport:
    """Run-level metrics: KEV membership is the exploit ground truth, the
    URGENT class is the predicted-positive set, and ranking is by ZDES."""
    universe = {r.cve_id for r in records}
    exploited = {r.cve_id for r in records if r.kev_listed}
    predicted = {cve for cve, u in urgencies.items() if u.level is UrgencyLevel.URGENT}
    ranked = sorted(universe, key=lambda cve: (-zdes[cve].value, cve))
    effective_k = min(k, len(ranked)) if ranked else k
    return MetricsReport(
        precision_at_k=precision_at_k(ranked, exploited, effective_k) if ranked else 0.0,
        f1=f1_score(predicted, exploited, universe) if universe else 0.0,
        cg_days=compliance_gain(assignments) if assignments else 0.0,
        oe=optimization_efficiency(plan),
        roi=plan.roi,
        k=effective_k,
        n=len(records),
    )


def render_report(
    traces: Sequence[AuditTrace],
    plan: RemediationPlan,
    metrics: MetricsReport,
    fmt: ReportFormat | str,
    *,
    inventory: Sequence = (),
) -> bytes:
    """Render the run report; byte-identical output for identical inputs.

    The JSON form carries the considered patch inventory so the console's
    bundle builder can offer every patch, not just the selected ones.
    """
    try:
        fmt = ReportFormat(fmt) if not isinstance(fmt, ReportFormat) else fmt
    except ValueError:
        raise UnsupportedFormat(f"unsupported report format {fmt!r}") from None
    ordered = sorted(traces, key=lambda t: t.cve_id)
    if fmt is ReportFormat.JSON:
        document = {
            "schema_version": REPORT_SCHEMA_VERSION,
            "summary": {
                "cve_count": len(ordered),
                "urgent_count": sum(
                    1 for t in ordered if t.urgency.level is UrgencyLevel.URGENT
                ),
                "planned_patch_count": len(plan.selected),
            },
            "metrics": metrics.to_dict(),
            "plan": plan.to_dict(),
            "inventory": [p.to_dict() for p in sorted(inventory, key=lambda p: p.patch_id)],
            "traces": [t.to_dict() for t in ordered],
        }
        return (json.dumps(document, indent=2, sort_keys=True, ensure_ascii=False) + "\n").encode(
            "utf-8"
        )
    if fmt is ReportFormat.CSV:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for trace in ordered:
            writer.writerow(
                [
                    trace.cve_id,
                    trace.urgency.level.value,
                    trace.urgency.fired_rule,
                    repr(trace.zdes.value),
                    repr(trace.bii.value),
                    repr(trace.risk_units),
                    trace.sla.due_basis.framework_id,
                    trace.sla.base_days,
                    trace.sla.adjusted_days,
                    trace.sla.due_date.isoformat(),
                    trace.patch_id or "",
                ]
            )
        return buffer.getvalue().encode("utf-8")
    lines = [
        "# Remediation report",
        "",
        f"- CVEs assessed: {len(ordered)}",
        f"- Patches selected: {len(plan.selected)} covering {len(plan.covered)} CVEs",
        f"- Risk reduced: {plan.risk_reduced:.3f} units over {plan.total_hours:.1f}h "
        f"(ROI {plan.roi:.3f}/hr)",
        f"- Metrics: P@{metrics.k}={metrics.precision_at_k:.3f} F1={metrics.f1:.3f} "
        f"CG={metrics.cg_days:.1f}d OE={metrics.oe:.3f}",
        "",
        "| CVE | Urgency | ZDES | BII | Due | Patch |",
        "| --- | --- | --- | --- | --- | --- |",
    ]
    for trace in ordered:
        lines.append(
            f"| {trace.cve_id} | {trace.urgency.level.value} | {trace.zdes.value:.3f} "
            f"| {trace.bii.value:.3f} | {trace.sla.due_date.isoformat()} "
            f"| {trace.patch_id or '-'} |"
        )
    return ("\n".join(lines) + "\n").encode("utf-8")
