"""End-to-end orchestration: config, overrides, and the scoring pipeline.

Stage order: ingest -> score -> classify -> override -> SLA -> optimize ->
report. The as_of date is injected (config or caller), never read from the
wall clock inside scoring, so OFFLINE runs with fixed fixtures are
deterministic byte-for-byte.
"""

from __future__ import annotations

import json
import os
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from datetime import date
from pathlib import Path
from typing import Mapping, Sequence

from .errors import ConfigError, EngineError, ValidationError
from .feeds.cache import DEFAULT_TTL_SECONDS, FeedCache
from .feeds.models import FeedSource, VulnRecord, parse_rfc3339_date, utc_now
from .feeds.store import FeedStore, merge_feeds
from .optimizer import (
    DEFAULT_RISK_UNIT_SCALE,
    Patch,
    RemediationPlan,
    RiskAssessment,
    assess_risk,
    plan_greedy,
)
from .policy import PolicyDocument, SlaAssignment, assign_sla, load_builtin_profile, load_policy
from .reporting import (
    AuditTrace,
    CriticalityOverrideNote,
    MetricsReport,
    SlaExceptionNote,
    UrgencyOverrideNote,
    build_trace,
    compute_metrics,
    most_restrictive,
    render_report,
)
from .scoring import (
    AssetContext,
    BiiScore,
    BiiWeights,
    Environment,
    ScoringConfig,
    UrgencyClass,
    UrgencyLevel,
    ZdesScore,
    ZdesWeights,
    classify_urgency,
    compute_bii,
    compute_zdes,
)

CONFIG_ENV_VAR = "RISKBRIDGE_CONFIG"

DEFAULT_ASSET = AssetContext(
    asset_id="default", criticality=0.5, environment=Environment.INTERNAL
)


@dataclass(frozen=True)
class EngineConfig:
    network_mode: str = "OFFLINE"
    endpoints: dict = field(default_factory=dict)  # source name -> url
    api_keys: dict = field(default_factory=dict)
    page_size: int = 2000
    rate_limit_per_minute: int = 30
    cache_dir: str | None = None
    cache_ttl_seconds: int = DEFAULT_TTL_SECONDS
    fixtures_dir: str | None = None
    scoring: ScoringConfig = field(default_factory=ScoringConfig)
    profiles: tuple[str, ...] = ("pci-dss",)
    risk_unit_scale: float = DEFAULT_RISK_UNIT_SCALE
    default_effort_hours: float = 40.0
    as_of: date | None = None
    asset_map_path: str | None = None
    patches_path: str | None = None

    def validate(self) -> None:
        if self.network_mode not in ("LIVE", "OFFLINE"):
            raise ConfigError(f"network_mode must be LIVE or OFFLINE, got {self.network_mode!r}")
        if not self.profiles:
            raise ConfigError("at least one policy profile must be active")
        if self.risk_unit_scale <= 0:
            raise ConfigError("risk_unit_scale must be positive")
        if self.default_effort_hours < 0:
            raise ConfigError("default_effort_hours must be >= 0")
        self.scoring.validate()

    @property
    def offline(self) -> bool:
        return self.network_mode == "OFFLINE"


def config_from_dict(data: dict, *, base_dir: Path | None = None) -> EngineConfig:
    """Build an EngineConfig from parsed JSON; relative paths resolve
    against the config file's directory."""
    if not isinstance(data, dict):
        raise ConfigError("config root must be an object")
    base_dir = base_dir or Path.cwd()

    def resolve(value: str | None) -> str | None:
        if value is None:
            return None
        path = Path(value)
        return str(path if path.is_absolute() else base_dir / path)

    def option(*names, default=None):
        # dotted spellings ("zdes.weights") and flat ones are both accepted
        for name in names:
            if name in data:
                return data[name]
        return default

    zdes_override = option("zdes.weights", "zdes_weights")
    bii_override = option("bii.weights", "bii_weights")
    scoring = ScoringConfig(
        zdes_weights=ZdesWeights(**zdes_override) if zdes_override else ZdesWeights(),
        bii_weights=BiiWeights(**bii_override) if bii_override else BiiWeights(),
        recency_horizon_days=option("recency.horizon_days", "recency_horizon_days", default=365),
        effort_cap_hours=option("effort_cap_hours", default=40.0),
    )
    as_of = parse_rfc3339_date(data["as_of"], where="as_of") if data.get("as_of") else None
    config = EngineConfig(
        network_mode=data.get("network_mode", "OFFLINE"),
        endpoints=data.get("endpoints", {}),
        api_keys=data.get("api_keys", {}),
        page_size=data.get("page_size", 2000),
        rate_limit_per_minute=data.get("rate_limit_per_minute", 30),
        cache_dir=resolve(data.get("cache_dir")),
        cache_ttl_seconds=data.get("cache_ttl_seconds", DEFAULT_TTL_SECONDS),
        fixtures_dir=resolve(data.get("fixtures_dir")),
        scoring=scoring,
        profiles=tuple(data.get("profiles", ("pci-dss",))),
        risk_unit_scale=data.get("risk_unit_scale", DEFAULT_RISK_UNIT_SCALE),
        default_effort_hours=data.get("default_effort_hours", 40.0),
        as_of=as_of,
        asset_map_path=resolve(data.get("asset_map")),
        patches_path=resolve(data.get("patches")),
    )
    config.validate()
    return config


def load_config(path: str | Path | None = None) -> EngineConfig:
    """Load config from a path or the RISKBRIDGE_CONFIG environment variable."""
    if path is None:
        env = os.environ.get(CONFIG_ENV_VAR)
        if not env:
            return EngineConfig()
        path = env
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(data, base_dir=path.parent)


@dataclass(frozen=True)
class UrgencyOverride:
    level: UrgencyLevel
    justification: str


@dataclass(frozen=True)
class CriticalityOverride:
    value: float
    justification: str


@dataclass(frozen=True)
class SlaException:
    due_date: date
    justification: str


@dataclass(frozen=True)
class OverrideSet:
    """Analyst overrides; every entry must carry a justification and every
    applied override is recorded into the audit trace."""

    urgency: Mapping[str, UrgencyOverride] = field(default_factory=dict)
    criticality: Mapping[str, CriticalityOverride] = field(default_factory=dict)
    sla_exceptions: Mapping[str, SlaException] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict) -> "OverrideSet":
        def need_justification(entry: dict, where: str) -> str:
            justification = entry.get("justification", "")
            if not isinstance(justification, str) or not justification.strip():
                raise ValidationError(f"{where}: override requires a non-empty justification")
            return justification

        urgency = {}
        for cve_id, entry in (data.get("urgency") or {}).items():
            urgency[cve_id] = UrgencyOverride(
                level=UrgencyLevel(entry["level"]),
                justification=need_justification(entry, f"urgency[{cve_id}]"),
            )
        criticality = {}
        for asset_id, entry in (data.get("criticality") or {}).items():
            value = float(entry["value"])
            if not 0.0 <= value <= 1.0:
                raise ValidationError(f"criticality[{asset_id}]: {value} outside [0, 1]")
            criticality[asset_id] = CriticalityOverride(
                value=value,
                justification=need_justification(entry, f"criticality[{asset_id}]"),
            )
        exceptions = {}
        for cve_id, entry in (data.get("sla_exceptions") or {}).items():
            exceptions[cve_id] = SlaException(
                due_date=parse_rfc3339_date(entry["due_date"], where=f"sla_exceptions[{cve_id}]"),
                justification=need_justification(entry, f"sla_exceptions[{cve_id}]"),
            )
        return cls(urgency=urgency, criticality=criticality, sla_exceptions=exceptions)

    def to_dict(self) -> dict:
        return {
            "urgency": {
                cve: {"level": o.level.value, "justification": o.justification}
                for cve, o in sorted(self.urgency.items())
            },
            "criticality": {
                asset: {"value": o.value, "justification": o.justification}
                for asset, o in sorted(self.criticality.items())
            },
            "sla_exceptions": {
                cve: {"due_date": o.due_date.isoformat(), "justification": o.justification}
                for cve, o in sorted(self.sla_exceptions.items())
            },
        }


EMPTY_OVERRIDES = OverrideSet()


@dataclass(frozen=True)
class AssetMap:
    assets: Mapping[str, AssetContext]
    assignments: Mapping[str, str]  # cve_id -> asset_id
    default_asset: AssetContext = DEFAULT_ASSET

    def asset_for(self, cve_id: str) -> AssetContext:
        asset_id = self.assignments.get(cve_id)
        if asset_id is None:
            return self.default_asset
        try:
            return self.assets[asset_id]
        except KeyError:
            raise ValidationError(f"asset map assigns {cve_id} to unknown asset {asset_id!r}") from None


EMPTY_ASSET_MAP = AssetMap(assets={}, assignments={})


def asset_map_from_dict(data: dict) -> AssetMap:
    assets = {}
    for entry in data.get("assets", []):
        asset = AssetContext(
            asset_id=entry["asset_id"],
            criticality=float(entry["criticality"]),
            environment=Environment(entry["environment"].upper()),
            compliance_scopes=frozenset(entry.get("compliance_scopes", ())),
        )
        assets[asset.asset_id] = asset
    default_asset = DEFAULT_ASSET
    if "default_asset" in data:
        default_id = data["default_asset"]
        if default_id not in assets:
            raise ValidationError(f"default_asset {default_id!r} not defined in assets")
        default_asset = assets[default_id]
    return AssetMap(
        assets=assets, assignments=dict(data.get("assignments", {})), default_asset=default_asset
    )


def load_asset_map(path: str | Path) -> AssetMap:
    return asset_map_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def load_patches(path: str | Path) -> list[Patch]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, list):
        raise ValidationError(f"{path}: patch inventory must be a JSON list")
    return [Patch.from_dict(entry) for entry in data]


def build_store(config: EngineConfig, *, transport=None, clock=utc_now) -> FeedStore:
    endpoints = {
        FeedSource(name.upper()): url for name, url in (config.endpoints or {}).items()
    }
    api_keys = {FeedSource(name.upper()): key for name, key in (config.api_keys or {}).items()}
    cache = (
        FeedCache(config.cache_dir, ttl_seconds=config.cache_ttl_seconds)
        if config.cache_dir
        else None
    )
    store = FeedStore(
        offline=config.offline,
        cache=cache,
        endpoints=endpoints,
        api_keys=api_keys,
        page_size=config.page_size,
        rate_limit_per_minute=config.rate_limit_per_minute,
        transport=transport,
        clock=clock,
    )
    if config.fixtures_dir:
        store.register_fixture_dir(config.fixtures_dir)
    return store


@dataclass(frozen=True)
class PipelineResult:
    as_of: date
    records: tuple[VulnRecord, ...]
    assets_by_cve: Mapping[str, AssetContext]
    effort_by_cve: Mapping[str, float]
    zdes: Mapping[str, ZdesScore]
    bii: Mapping[str, BiiScore]
    urgencies: Mapping[str, UrgencyClass]  # effective (post-override)
    assignments: Mapping[str, SlaAssignment]  # winning profile per CVE
    assessments: tuple[RiskAssessment, ...]
    plan: RemediationPlan
    traces: tuple[AuditTrace, ...]
    metrics: MetricsReport
    report_json: bytes
    policies: tuple[PolicyDocument, ...]
    patches: tuple[Patch, ...]
    provenance: Mapping[str, str]
    overrides: OverrideSet


def _load_policies(config: EngineConfig) -> tuple[PolicyDocument, ...]:
    policies = []
    for name in config.profiles:
        if name.endswith(".json") or "/" in name or "\\" in name:
            policies.append(load_policy(name))
        else:
            policies.append(load_builtin_profile(name))
    return tuple(policies)


def effort_for_cves(
    records: Sequence[VulnRecord], patches: Sequence[Patch], default_effort: float
) -> dict[str, float]:
    """Patch effort per CVE: the cheapest covering patch, else the default."""
    effort: dict[str, float] = {}
    for record in records:
        candidates = [p.effort_hours for p in patches if record.cve_id in p.covered_cves]
        effort[record.cve_id] = min(candidates) if candidates else default_effort
    return effort


@contextmanager
def _stage(name: str):
    """Label any engine error escaping this block with the stage name."""
    try:
        yield
    except EngineError as exc:
        if exc.stage is None:
            exc.stage = name
        raise


def run_pipeline(
    config: EngineConfig,
    *,
    cve_scope: Sequence[str] | None = None,
    since: date | None = None,
    asset_map: AssetMap | None = None,
    patches: Sequence[Patch] | None = None,
    overrides: OverrideSet | None = None,
    budget_hours: float | None = None,
    metrics_k: int = 3,
    store: FeedStore | None = None,
    as_of: date | None = None,
) -> PipelineResult:
    """Execute ingest -> score -> classify -> override -> SLA -> optimize ->
    report and return every intermediate product."""
    config.validate()
    overrides = overrides if overrides is not None else EMPTY_OVERRIDES
    if asset_map is None:
        asset_map = (
            load_asset_map(config.asset_map_path) if config.asset_map_path else EMPTY_ASSET_MAP
        )
    if patches is None:
        patches = load_patches(config.patches_path) if config.patches_path else []
    patches = tuple(patches)
    as_of = as_of or config.as_of or utc_now().date()

    with _stage("ingest"):
        store = store or build_store(config)
        query: Sequence[str] | date | None = list(cve_scope) if cve_scope else since
        nvd = store.fetch_feed(FeedSource.NVD, query)
        epss = store.fetch_feed(FeedSource.EPSS, list(cve_scope) if cve_scope else None)
        kev = store.fetch_feed(FeedSource.KEV, list(cve_scope) if cve_scope else None)
        records = tuple(merge_feeds(nvd, epss, kev))
        provenance = {
            "nvd": nvd.content_hash,
            "epss": epss.content_hash,
            "kev": kev.content_hash,
        }

    with _stage("score"):
        assets_by_cve: dict[str, AssetContext] = {}
        crit_notes: dict[str, CriticalityOverrideNote] = {}
        for record in records:
            asset = asset_map.asset_for(record.cve_id)
            crit_override = overrides.criticality.get(asset.asset_id)
            if crit_override is not None:
                crit_notes[record.cve_id] = CriticalityOverrideNote(
                    original_value=asset.criticality,
                    override_value=crit_override.value,
                    justification=crit_override.justification,
                )
                asset = replace(asset, criticality=crit_override.value)
            assets_by_cve[record.cve_id] = asset
        effort_by_cve = effort_for_cves(records, patches, config.default_effort_hours)
        zdes = {r.cve_id: compute_zdes(r, as_of, config.scoring) for r in records}
        bii = {
            r.cve_id: compute_bii(r, assets_by_cve[r.cve_id], effort_by_cve[r.cve_id], config.scoring)
            for r in records
        }

    with _stage("classify"):
        original_urgency = {r.cve_id: classify_urgency(r) for r in records}
        urgencies: dict[str, UrgencyClass] = {}
        override_notes: dict[str, UrgencyOverrideNote] = {}
        for record in records:
            base = original_urgency[record.cve_id]
            override = overrides.urgency.get(record.cve_id)
            if override is not None and override.level is not base.level:
                urgencies[record.cve_id] = UrgencyClass(override.level, base.fired_rule)
                override_notes[record.cve_id] = UrgencyOverrideNote(
                    original_level=base.level.value,
                    override_level=override.level.value,
                    justification=override.justification,
                )
            else:
                urgencies[record.cve_id] = base

    with _stage("sla"):
        policies = _load_policies(config)
        assignments: dict[str, SlaAssignment] = {}
        exception_notes: dict[str, SlaExceptionNote] = {}
        for record in records:
            candidates = [
                assign_sla(record, urgencies[record.cve_id], assets_by_cve[record.cve_id], p, as_of)
                for p in policies
            ]
            assignment = most_restrictive(candidates)
            exception = overrides.sla_exceptions.get(record.cve_id)
            if exception is not None:
                exception_notes[record.cve_id] = SlaExceptionNote(
                    due_date=exception.due_date, justification=exception.justification
                )
            assignments[record.cve_id] = assignment

    with _stage("optimize"):
        assessments = tuple(assess_risk(records, zdes, bii, scale=config.risk_unit_scale))
        plan = plan_greedy(patches, assessments, budget_hours)
        patch_of: dict[str, str] = {}
        for patch_id in plan.selected:  # earliest selected patch wins membership
            patch = next(p for p in patches if p.patch_id == patch_id)
            for cve_id in sorted(patch.covered_cves):
                patch_of.setdefault(cve_id, patch_id)

    with _stage("report"):
        risk_of = {a.cve_id: a.risk_units for a in assessments}
        traces = tuple(
            build_trace(
                record=record,
                asset=assets_by_cve[record.cve_id],
                effort_hours=effort_by_cve[record.cve_id],
                zdes=zdes[record.cve_id],
                bii=bii[record.cve_id],
                urgency=urgencies[record.cve_id],
                sla=assignments[record.cve_id],
                risk_units=risk_of[record.cve_id],
                urgency_override=override_notes.get(record.cve_id),
                sla_exception=exception_notes.get(record.cve_id),
                criticality_override=crit_notes.get(record.cve_id),
                patch_id=patch_of.get(record.cve_id),
                provenance=provenance,
            )
            for record in records
        )
        metrics = compute_metrics(
            records, zdes, urgencies, list(assignments.values()), plan, k=metrics_k
        )
        report_json = render_report(traces, plan, metrics, "json", inventory=patches)

    return PipelineResult(
        as_of=as_of,
        records=records,
        assets_by_cve=assets_by_cve,
        effort_by_cve=effort_by_cve,
        zdes=zdes,
        bii=bii,
        urgencies=urgencies,
        assignments=assignments,
        assessments=assessments,
        plan=plan,
        traces=traces,
        metrics=metrics,
        report_json=report_json,
        policies=policies,
        patches=patches,
        provenance=provenance,
        overrides=overrides,
    )


def simulate_zeroday(
    records: Sequence[VulnRecord],
    as_of: date,
    config: ScoringConfig = ScoringConfig(),
    *,
    cve_ids: Sequence[str] | None = None,
) -> dict[str, ZdesScore]:
    """Score records under zero-day assumptions: EPSS forced to 0, KEV
    absent, recency 1 (as if published on the assessment day)."""
    wanted = set(cve_ids) if cve_ids else None
    scores: dict[str, ZdesScore] = {}
    for record in records:
        if wanted is not None and record.cve_id not in wanted:
            continue
        zero_day = replace(
            record,
            epss_probability=0.0,
            epss_missing=True,
            kev_listed=False,
            published_date=as_of,
        )
        scores[record.cve_id] = compute_zdes(zero_day, as_of, config)
    return scores
