"""Patch-bundle selection: cost-benefit greedy weighted set cover with an
exact enumeration oracle and ROI accounting.

Each CVE carries risk_units = scale * zdes * bii (default scale 10, so a
maximal CVE is worth 10 risk units). The greedy planner repeatedly picks
the feasible patch with the best marginal risk per effort hour ("patch
once, fix many"); under a budget the result is compared against the best
single feasible patch, which is what gives the (1 - 1/e)/2 budgeted
max-coverage guarantee.

All computations are pure and order-canonical: permuting the input patch
list yields an identical plan.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from .errors import (
    InstanceTooLarge,
    MissingScore,
    NonpositiveBudget,
    ValidationError,
)
from .feeds.models import VulnRecord
from .scoring import BiiScore, ZdesScore

DEFAULT_RISK_UNIT_SCALE = 10.0
EXACT_PATCH_LIMIT = 20


@dataclass(frozen=True)
class Patch:
    patch_id: str
    covered_cves: frozenset[str]
    effort_hours: float

    def __post_init__(self):
        if self.effort_hours <= 0:
            raise ValidationError(f"patch {self.patch_id}: effort_hours must be > 0")
        if not self.covered_cves:
            raise ValidationError(f"patch {self.patch_id}: covered_cves is empty")

    def to_dict(self) -> dict:
        return {
            "patch_id": self.patch_id,
            "covered_cves": sorted(self.covered_cves),
            "effort_hours": self.effort_hours,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Patch":
        return cls(
            patch_id=data["patch_id"],
            covered_cves=frozenset(data["covered_cves"]),
            effort_hours=float(data["effort_hours"]),
        )


@dataclass(frozen=True)
class RiskAssessment:
    cve_id: str
    risk_units: float
    zdes: float
    bii: float

    def to_dict(self) -> dict:
        return {
            "cve_id": self.cve_id,
            "risk_units": self.risk_units,
            "zdes": self.zdes,
            "bii": self.bii,
        }


@dataclass(frozen=True)
class PlanStep:
    patch_id: str
    marginal_risk: float
    marginal_roi: float

    def to_dict(self) -> dict:
        return {
            "patch_id": self.patch_id,
            "marginal_risk": self.marginal_risk,
            "marginal_roi": self.marginal_roi,
        }


@dataclass(frozen=True)
class RemediationPlan:
    selected: tuple[str, ...]
    covered: frozenset[str]
    risk_reduced: float
    total_hours: float
    roi: float
    budget_hours: float | None
    per_step: tuple[PlanStep, ...]

    def to_dict(self) -> dict:
        return {
            "selected": list(self.selected),
            "covered": sorted(self.covered),
            "risk_reduced": self.risk_reduced,
            "total_hours": self.total_hours,
            "roi": self.roi,
            "budget_hours": self.budget_hours,
            "per_step": [step.to_dict() for step in self.per_step],
        }


EMPTY_PLAN = RemediationPlan((), frozenset(), 0.0, 0.0, 0.0, None, ())


def assess_risk(
    records: Iterable[VulnRecord],
    zdes: Mapping[str, ZdesScore],
    bii: Mapping[str, BiiScore],
    *,
    scale: float = DEFAULT_RISK_UNIT_SCALE,
) -> list[RiskAssessment]:
    """One risk assessment per record: risk_units = scale * zdes * bii."""
    assessments = []
    for record in records:
        if record.cve_id not in zdes:
            raise MissingScore(f"no zdes score for {record.cve_id}")
        if record.cve_id not in bii:
            raise MissingScore(f"no bii score for {record.cve_id}")
        z = zdes[record.cve_id].value
        b = bii[record.cve_id].value
        assessments.append(
            RiskAssessment(cve_id=record.cve_id, risk_units=scale * z * b, zdes=z, bii=b)
        )
    return assessments


def _risk_index(risks: Iterable[RiskAssessment]) -> dict[str, float]:
    index: dict[str, float] = {}
    for risk in risks:
        if risk.cve_id in index:
            raise ValidationError(f"duplicate risk assessment for {risk.cve_id}")
        if risk.risk_units < 0:
            raise ValidationError(f"{risk.cve_id}: negative risk_units")
        index[risk.cve_id] = risk.risk_units
    return index


def _canonical_patches(patches: Iterable[Patch]) -> list[Patch]:
    ordered = sorted(patches, key=lambda p: p.patch_id)
    for first, second in zip(ordered, ordered[1:]):
        if first.patch_id == second.patch_id:
            raise ValidationError(f"duplicate patch_id {first.patch_id}")
    return ordered


def _set_risk(cves: Iterable[str], risk_of: Mapping[str, float]) -> float:
    # canonical (sorted) summation order keeps float results permutation-proof
    return sum(risk_of[cve] for cve in sorted(cves))


def _finish_plan(
    selected: list[str],
    covered: set[str],
    hours: float,
    budget: float | None,
    risk_of: Mapping[str, float],
    steps: list[PlanStep],
) -> RemediationPlan:
    risk = _set_risk(covered, risk_of)
    return RemediationPlan(
        selected=tuple(selected),
        covered=frozenset(covered),
        risk_reduced=risk,
        total_hours=hours,
        roi=risk / hours if hours > 0 else 0.0,
        budget_hours=budget,
        per_step=tuple(steps),
    )


def plan_greedy(
    patches: Iterable[Patch],
    risks: Iterable[RiskAssessment],
    budget_hours: float | None = None,
) -> RemediationPlan:
    """Greedy max risk-per-hour selection, budget-aware.

    Each round picks the feasible patch maximizing marginal_risk/effort over
    not-yet-covered assessed CVEs; ties go to the larger marginal risk, then
    the lexicographically smaller patch_id. Stops when nothing feasible adds
    positive marginal risk. Under a budget the better of the greedy sequence
    and the single best feasible patch (by risk_reduced) is returned.
    """
    if budget_hours is not None and budget_hours <= 0:
        raise NonpositiveBudget(f"budget_hours must be > 0, got {budget_hours}")
    ordered = _canonical_patches(patches)
    risk_of = _risk_index(risks)

    selected: list[str] = []
    covered: set[str] = set()
    hours = 0.0
    steps: list[PlanStep] = []
    remaining = {p.patch_id: p for p in ordered}

    while remaining:
        # iterating in ascending patch_id and keeping the first strict winner
        # makes the (ratio, marginal risk, smaller id) tie-break total
        best: tuple[float, float, str] | None = None
        for patch in ordered:
            if patch.patch_id not in remaining:
                continue
            if budget_hours is not None and hours + patch.effort_hours > budget_hours:
                continue
            gain_cves = (patch.covered_cves & risk_of.keys()) - covered
            marginal = _set_risk(gain_cves, risk_of)
            ratio = marginal / patch.effort_hours
            if best is None or (ratio, marginal) > (best[0], best[1]):
                best = (ratio, marginal, patch.patch_id)
        if best is None or best[1] <= 0:
            break
        _, marginal, patch_id = best
        patch = remaining.pop(patch_id)
        selected.append(patch_id)
        covered |= patch.covered_cves & risk_of.keys()
        hours += patch.effort_hours
        steps.append(PlanStep(patch_id, marginal, marginal / patch.effort_hours))

    greedy_plan = _finish_plan(selected, covered, hours, budget_hours, risk_of, steps)
    if budget_hours is None:
        return greedy_plan

    single = _best_single(ordered, risk_of, budget_hours)
    if single is not None and single.risk_reduced > greedy_plan.risk_reduced:
        return single
    return greedy_plan


def _best_single(
    ordered: list[Patch], risk_of: Mapping[str, float], budget_hours: float
) -> RemediationPlan | None:
    best: RemediationPlan | None = None
    best_key = None
    for patch in ordered:
        if patch.effort_hours > budget_hours:
            continue
        covered = patch.covered_cves & risk_of.keys()
        risk = _set_risk(covered, risk_of)
        key = (-risk, patch.effort_hours, patch.patch_id)
        if best_key is None or key < best_key:
            best_key = key
            best = _finish_plan(
                [patch.patch_id],
                set(covered),
                patch.effort_hours,
                budget_hours,
                risk_of,
                [PlanStep(patch.patch_id, risk, risk / patch.effort_hours)],
            )
    return best


def plan_exact(
    patches: Iterable[Patch],
    risks: Iterable[RiskAssessment],
    budget_hours: float | None = None,
) -> RemediationPlan:
    """Exhaustive subset enumeration (test oracle; exponential).

    Maximizes risk_reduced over all feasible subsets, breaking ties by fewer
    total hours and then the lexicographically smallest patch-id sequence.
    """
    if budget_hours is not None and budget_hours <= 0:
        raise NonpositiveBudget(f"budget_hours must be > 0, got {budget_hours}")
    ordered = _canonical_patches(patches)
    if len(ordered) > EXACT_PATCH_LIMIT:
        raise InstanceTooLarge(
            f"{len(ordered)} patches exceeds the exact-oracle limit of {EXACT_PATCH_LIMIT}"
        )
    risk_of = _risk_index(risks)

    best_key: tuple[float, float, tuple[str, ...]] | None = None
    best_subset: tuple[Patch, ...] = ()

    def visit(index: int, chosen: list[Patch], hours: float) -> None:
        nonlocal best_key, best_subset
        if index == len(ordered):
            covered: set[str] = set()
            for patch in chosen:
                covered |= patch.covered_cves & risk_of.keys()
            risk = _set_risk(covered, risk_of)
            key = (-risk, hours, tuple(p.patch_id for p in chosen))
            if best_key is None or key < best_key:
                best_key = key
                best_subset = tuple(chosen)
            return
        patch = ordered[index]
        if budget_hours is None or hours + patch.effort_hours <= budget_hours:
            chosen.append(patch)
            visit(index + 1, chosen, hours + patch.effort_hours)
            chosen.pop()
        visit(index + 1, chosen, hours)

    visit(0, [], 0.0)

    covered: set[str] = set()
    steps: list[PlanStep] = []
    hours = 0.0
    for patch in best_subset:
        gain = (patch.covered_cves & risk_of.keys()) - covered
        marginal = _set_risk(gain, risk_of)
        steps.append(PlanStep(patch.patch_id, marginal, marginal / patch.effort_hours))
        covered |= patch.covered_cves & risk_of.keys()
        hours += patch.effort_hours
    return _finish_plan(
        [p.patch_id for p in best_subset], covered, hours, budget_hours, risk_of, steps
    )


def plan_for_selection(
    patches: Iterable[Patch],
    risks: Iterable[RiskAssessment],
    selected_ids: Iterable[str],
    budget_hours: float | None = None,
) -> RemediationPlan:
    """Plan stats for an explicitly forced selection (what-if support)."""
    if budget_hours is not None and budget_hours <= 0:
        raise NonpositiveBudget(f"budget_hours must be > 0, got {budget_hours}")
    by_id = {p.patch_id: p for p in _canonical_patches(patches)}
    risk_of = _risk_index(risks)
    selected: list[str] = []
    covered: set[str] = set()
    hours = 0.0
    steps: list[PlanStep] = []
    for patch_id in selected_ids:
        patch = by_id.get(patch_id)
        if patch is None:
            raise ValidationError(f"unknown patch_id {patch_id!r}")
        if patch_id in selected:
            raise ValidationError(f"patch_id {patch_id!r} selected twice")
        gain = (patch.covered_cves & risk_of.keys()) - covered
        marginal = _set_risk(gain, risk_of)
        selected.append(patch_id)
        covered |= patch.covered_cves & risk_of.keys()
        hours += patch.effort_hours
        steps.append(PlanStep(patch_id, marginal, marginal / patch.effort_hours))
    if budget_hours is not None and hours > budget_hours:
        raise ValidationError(
            f"forced selection needs {hours}h, exceeding the {budget_hours}h budget"
        )
    return _finish_plan(selected, covered, hours, budget_hours, risk_of, steps)


def plan_roi(plan: RemediationPlan) -> float:
    """Risk units reduced per remediation hour (0 for an empty plan)."""
    return plan.risk_reduced / plan.total_hours if plan.total_hours > 0 else 0.0
