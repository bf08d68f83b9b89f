"""Pure scoring kernel: recency decay, ZDES, urgency classes, and the BII.

ZDES (zero-day exposure score) weighs exploit probability, severity, the
absence of confirmed exploitation, and freshness:

    zdes = 0.35*epss + 0.3*(cvss/10) + 0.2*(1 - kev) + 0.15*recency

The BII (business impact index) folds asset criticality and patch effort in
on the same 0-1 scale. All functions here are pure and injectable with an
``as_of`` date; nothing reads the wall clock.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date
from enum import Enum

from .errors import FuturePublication, NegativeEffort, ValidationError
from .feeds.models import VulnRecord

# Urgency thresholds. Boundary semantics are >= for 9 and 0.5, strict > for 0.3.
URGENT_CVSS_MIN = 9.0
URGENT_EPSS_MIN = 0.5
HIGH_EPSS_MIN = 0.3

DEFAULT_RECENCY_HORIZON_DAYS = 365
DEFAULT_EFFORT_CAP_HOURS = 40.0

_WEIGHT_TOLERANCE = 1e-9


class UrgencyLevel(str, Enum):
    URGENT = "URGENT"
    HIGH = "HIGH"
    STANDARD = "STANDARD"


class Environment(str, Enum):
    INTERNET_FACING = "INTERNET_FACING"
    INTERNAL = "INTERNAL"
    ISOLATED = "ISOLATED"


@dataclass(frozen=True)
class ZdesWeights:
    epss: float = 0.35
    cvss: float = 0.3
    kev_absent: float = 0.2
    recency: float = 0.15

    def validate(self) -> None:
        total = self.epss + self.cvss + self.kev_absent + self.recency
        if abs(total - 1.0) > _WEIGHT_TOLERANCE:
            raise ValidationError(f"zdes weights sum to {total}, expected 1")
        if min(self.epss, self.cvss, self.kev_absent, self.recency) < 0:
            raise ValidationError("zdes weights must be non-negative")


@dataclass(frozen=True)
class BiiWeights:
    cvss: float = 0.25
    epss: float = 0.25
    kev: float = 0.15
    criticality: float = 0.25
    effort: float = 0.10

    def validate(self) -> None:
        total = self.cvss + self.epss + self.kev + self.criticality + self.effort
        if abs(total - 1.0) > _WEIGHT_TOLERANCE:
            raise ValidationError(f"bii weights sum to {total}, expected 1")
        if min(self.cvss, self.epss, self.kev, self.criticality, self.effort) < 0:
            raise ValidationError("bii weights must be non-negative")


@dataclass(frozen=True)
class ScoringConfig:
    zdes_weights: ZdesWeights = field(default_factory=ZdesWeights)
    bii_weights: BiiWeights = field(default_factory=BiiWeights)
    recency_horizon_days: int = DEFAULT_RECENCY_HORIZON_DAYS
    effort_cap_hours: float = DEFAULT_EFFORT_CAP_HOURS

    def validate(self) -> None:
        self.zdes_weights.validate()
        self.bii_weights.validate()
        if self.recency_horizon_days <= 0:
            raise ValidationError("recency horizon must be positive")
        if self.effort_cap_hours <= 0:
            raise ValidationError("effort cap must be positive")


DEFAULT_CONFIG = ScoringConfig()


@dataclass(frozen=True)
class ZdesScore:
    """ZDES value plus its weighted component terms (value = sum of terms)."""

    value: float
    epss_term: float
    cvss_term: float
    kev_term: float
    recency_term: float
    as_of: date

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "epss_term": self.epss_term,
            "cvss_term": self.cvss_term,
            "kev_term": self.kev_term,
            "recency_term": self.recency_term,
            "as_of": self.as_of.isoformat(),
        }


@dataclass(frozen=True)
class UrgencyClass:
    level: UrgencyLevel
    fired_rule: str

    def to_dict(self) -> dict:
        return {"level": self.level.value, "fired_rule": self.fired_rule}


@dataclass(frozen=True)
class AssetContext:
    asset_id: str
    criticality: float
    environment: Environment
    compliance_scopes: frozenset[str] = frozenset()

    def __post_init__(self):
        if not 0.0 <= self.criticality <= 1.0:
            raise ValidationError(
                f"asset {self.asset_id}: criticality {self.criticality} outside [0, 1]"
            )


@dataclass(frozen=True)
class BiiScore:
    """BII value plus weighted component values and the effort input."""

    value: float
    cvss_w: float
    epss_w: float
    kev_w: float
    asset_w: float
    effort_w: float
    effort_hours: float

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "cvss_w": self.cvss_w,
            "epss_w": self.epss_w,
            "kev_w": self.kev_w,
            "asset_w": self.asset_w,
            "effort_w": self.effort_w,
            "effort_hours": self.effort_hours,
        }


def recency_factor(
    published_date: date,
    as_of: date,
    *,
    horizon_days: int = DEFAULT_RECENCY_HORIZON_DAYS,
) -> float:
    """Linear freshness decay: 1.0 on the publication day, 0.0 at the horizon."""
    if published_date > as_of:
        raise FuturePublication(
            f"published {published_date.isoformat()} is after as_of {as_of.isoformat()}"
        )
    age_days = (as_of - published_date).days
    return max(0.0, 1.0 - age_days / horizon_days)


def compute_zdes(
    record: VulnRecord, as_of: date, config: ScoringConfig = DEFAULT_CONFIG
) -> ZdesScore:
    w = config.zdes_weights
    recency = recency_factor(record.published_date, as_of, horizon_days=config.recency_horizon_days)
    epss_term = w.epss * record.epss_probability
    cvss_term = w.cvss * (record.cvss_score / 10.0)
    kev_term = w.kev_absent * (0.0 if record.kev_listed else 1.0)
    recency_term = w.recency * recency
    value = epss_term + cvss_term + kev_term + recency_term
    return ZdesScore(
        value=value,
        epss_term=epss_term,
        cvss_term=cvss_term,
        kev_term=kev_term,
        recency_term=recency_term,
        as_of=as_of,
    )


def classify_urgency(record: VulnRecord) -> UrgencyClass:
    """First-match classification: the Urgent criteria in printed order,
    then the High rule, else Standard."""
    if record.cvss_score >= URGENT_CVSS_MIN:
        return UrgencyClass(UrgencyLevel.URGENT, "cvss_ge_9")
    if record.epss_probability >= URGENT_EPSS_MIN:
        return UrgencyClass(UrgencyLevel.URGENT, "epss_ge_0.5")
    if record.kev_listed:
        return UrgencyClass(UrgencyLevel.URGENT, "kev_listed")
    if record.epss_probability > HIGH_EPSS_MIN:
        return UrgencyClass(UrgencyLevel.HIGH, "epss_gt_0.3")
    return UrgencyClass(UrgencyLevel.STANDARD, "no_exploit_indicators")


def compute_bii(
    record: VulnRecord,
    asset: AssetContext,
    effort_hours: float,
    config: ScoringConfig = DEFAULT_CONFIG,
) -> BiiScore:
    """Business impact: severity, exploit signals, asset criticality, and
    (inverse) patch effort, normalized to [0, 1].

    Cheaper patches score higher; effort saturates at the configured cap
    (default one work week), past which the effort term contributes 0.
    """
    if effort_hours < 0:
        raise NegativeEffort(f"{record.cve_id}: effort_hours {effort_hours} is negative")
    w = config.bii_weights
    cvss_w = w.cvss * (record.cvss_score / 10.0)
    epss_w = w.epss * record.epss_probability
    kev_w = w.kev * (1.0 if record.kev_listed else 0.0)
    asset_w = w.criticality * asset.criticality
    effort_w = w.effort * (1.0 - min(effort_hours / config.effort_cap_hours, 1.0))
    value = min(max(cvss_w + epss_w + kev_w + asset_w + effort_w, 0.0), 1.0)
    return BiiScore(
        value=value,
        cvss_w=cvss_w,
        epss_w=epss_w,
        kev_w=kev_w,
        asset_w=asset_w,
        effort_w=effort_w,
        effort_hours=effort_hours,
    )
