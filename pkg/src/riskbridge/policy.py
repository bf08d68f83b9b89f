"""Policy-as-code: compliance profiles compiled into SLA deadlines.

A profile is a JSON document mapping urgency levels to base SLA days plus
two multiplier tables: an ordered list of threat conditions (first match
wins) and per-environment exposure factors. The adjusted deadline is

    adjusted_days = max(1, ceil(base_days * threat_factor * env_factor))

and every assignment carries a due_basis record naming exactly which
framework, rule, and factors produced it, so deadlines replay from the
audit trail alone.

The condition grammar is deliberately closed (kev_listed | epss >= t |
cvss >= t | urgency = level); free-form expressions are rejected so the
policies stay auditable.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from datetime import date, timedelta
from enum import Enum
from importlib import resources
from pathlib import Path

from .errors import (
    MissingEnvFactor,
    NonpositiveFactor,
    SchemaError,
    UnknownCondition,
    ValidationError,
)
from .feeds.models import VulnRecord
from .scoring import AssetContext, Environment, UrgencyClass, UrgencyLevel

MAX_FACTOR = 2.0

BUILTIN_PROFILES = ("pci-dss", "nist-800-53", "iso-27001")

_CONDITION_RES = (
    ("kev_listed", re.compile(r"^kev_listed$")),
    ("epss_ge", re.compile(r"^epss\s*>=\s*(\d+(?:\.\d+)?)$")),
    ("cvss_ge", re.compile(r"^cvss\s*>=\s*(\d+(?:\.\d+)?)$")),
    ("urgency_eq", re.compile(r"^urgency\s*=\s*(urgent|high|standard)$", re.IGNORECASE)),
)


class ConditionKind(str, Enum):
    KEV_LISTED = "kev_listed"
    EPSS_GE = "epss_ge"
    CVSS_GE = "cvss_ge"
    URGENCY_EQ = "urgency_eq"


@dataclass(frozen=True)
class ThreatCondition:
    kind: ConditionKind
    threshold: float | None = None
    level: UrgencyLevel | None = None

    @property
    def condition_id(self) -> str:
        if self.kind is ConditionKind.KEV_LISTED:
            return "kev_listed"
        if self.kind is ConditionKind.URGENCY_EQ:
            return f"urgency_{self.level.value.lower()}"
        return f"{self.kind.value}_{self.threshold:g}"

    def matches(self, record: VulnRecord, urgency: UrgencyClass | None) -> bool:
        if self.kind is ConditionKind.KEV_LISTED:
            return record.kev_listed
        if self.kind is ConditionKind.EPSS_GE:
            return record.epss_probability >= self.threshold
        if self.kind is ConditionKind.CVSS_GE:
            return record.cvss_score >= self.threshold
        return urgency is not None and urgency.level is self.level


def parse_condition(text: str) -> ThreatCondition:
    """Parse one condition string from the closed grammar."""
    stripped = text.strip()
    for kind, pattern in _CONDITION_RES:
        match = pattern.match(stripped)
        if not match:
            continue
        if kind == "kev_listed":
            return ThreatCondition(ConditionKind.KEV_LISTED)
        if kind == "urgency_eq":
            return ThreatCondition(
                ConditionKind.URGENCY_EQ, level=UrgencyLevel(match.group(1).upper())
            )
        return ThreatCondition(ConditionKind(kind), threshold=float(match.group(1)))
    raise UnknownCondition(
        f"condition {text!r} is outside the grammar "
        "(kev_listed | epss >= t | cvss >= t | urgency = level)"
    )


@dataclass(frozen=True)
class PolicyDocument:
    framework_id: str
    version: str
    base_sla_days: dict  # UrgencyLevel -> positive int
    threat_multipliers: tuple  # ordered (ThreatCondition, factor) pairs
    env_multipliers: dict  # Environment -> factor

    def to_dict(self) -> dict:
        return {
            "framework_id": self.framework_id,
            "version": self.version,
            "base_sla_days": {level.value.lower(): days for level, days in self.base_sla_days.items()},
            "threat_multipliers": [
                {"when": condition.condition_id, "factor": factor}
                for condition, factor in self.threat_multipliers
            ],
            "env_multipliers": {env.value.lower(): f for env, f in self.env_multipliers.items()},
        }


@dataclass(frozen=True)
class DueBasis:
    """Machine-readable audit record for one deadline."""

    framework_id: str
    urgency_level: str
    urgency_rule_id: str
    threat_condition_id: str
    env_key: str
    raw_product: float

    def to_dict(self) -> dict:
        return {
            "framework_id": self.framework_id,
            "urgency_level": self.urgency_level,
            "urgency_rule_id": self.urgency_rule_id,
            "threat_condition_id": self.threat_condition_id,
            "env_key": self.env_key,
            "raw_product": self.raw_product,
        }


@dataclass(frozen=True)
class SlaAssignment:
    cve_id: str
    base_days: int
    threat_factor: float
    env_factor: float
    adjusted_days: int
    due_date: date
    due_basis: DueBasis

    def to_dict(self) -> dict:
        return {
            "cve_id": self.cve_id,
            "base_days": self.base_days,
            "threat_factor": self.threat_factor,
            "env_factor": self.env_factor,
            "adjusted_days": self.adjusted_days,
            "due_date": self.due_date.isoformat(),
            "due_basis": self.due_basis.to_dict(),
        }


_TOP_LEVEL_KEYS = {"framework_id", "version", "base_sla_days", "threat_multipliers", "env_multipliers"}


def validate_policy(document: dict | str) -> PolicyDocument:
    """Validate a policy document, reporting every violation (not fail-fast).

    Raises UnknownCondition or NonpositiveFactor when all violations are of
    that one kind, SchemaError otherwise; either way the exception carries
    the full violation list.
    """
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"policy is not valid JSON: {exc}", violations=[str(exc)]) from exc
    if not isinstance(document, dict):
        raise SchemaError("policy root must be an object", violations=["root: not an object"])

    violations: list[tuple[str, str]] = []  # (code, message)

    def problem(code: str, message: str) -> None:
        violations.append((code, message))

    for key in sorted(set(document) - _TOP_LEVEL_KEYS):
        problem("SCHEMA_ERROR", f"unknown key {key!r}")
    for key in sorted(_TOP_LEVEL_KEYS - set(document)):
        problem("SCHEMA_ERROR", f"missing key {key!r}")

    framework_id = document.get("framework_id")
    if "framework_id" in document and (not isinstance(framework_id, str) or not framework_id):
        problem("SCHEMA_ERROR", "framework_id: must be a non-empty string")
    version = document.get("version")
    if "version" in document and not isinstance(version, str):
        problem("SCHEMA_ERROR", "version: must be a string")

    base_sla: dict = {}
    raw_base = document.get("base_sla_days", {})
    if not isinstance(raw_base, dict):
        problem("SCHEMA_ERROR", "base_sla_days: must be an object")
        raw_base = {}
    for level in UrgencyLevel:
        key = level.value.lower()
        if key not in raw_base:
            problem("SCHEMA_ERROR", f"base_sla_days.{key}: missing")
            continue
        days = raw_base[key]
        if not isinstance(days, int) or isinstance(days, bool) or days <= 0:
            problem("SCHEMA_ERROR", f"base_sla_days.{key}: must be a positive integer, got {days!r}")
        else:
            base_sla[level] = days
    for key in sorted(set(raw_base) - {l.value.lower() for l in UrgencyLevel}):
        problem("SCHEMA_ERROR", f"base_sla_days.{key}: unknown urgency level")

    threat: list[tuple[ThreatCondition, float]] = []
    raw_threat = document.get("threat_multipliers", [])
    if not isinstance(raw_threat, list):
        problem("SCHEMA_ERROR", "threat_multipliers: must be a list")
        raw_threat = []
    for index, entry in enumerate(raw_threat):
        where = f"threat_multipliers[{index}]"
        if not isinstance(entry, dict) or set(entry) != {"when", "factor"}:
            problem("SCHEMA_ERROR", f"{where}: must be an object with keys when, factor")
            continue
        condition = None
        try:
            condition = parse_condition(entry["when"]) if isinstance(entry["when"], str) else None
            if condition is None:
                problem("SCHEMA_ERROR", f"{where}.when: must be a string")
        except UnknownCondition as exc:
            problem("UNKNOWN_CONDITION", f"{where}.when: {exc.message}")
        factor_ok = _check_factor(entry["factor"], f"{where}.factor", problem)
        if condition is not None and factor_ok:
            threat.append((condition, float(entry["factor"])))

    env: dict = {}
    raw_env = document.get("env_multipliers", {})
    if not isinstance(raw_env, dict):
        problem("SCHEMA_ERROR", "env_multipliers: must be an object")
        raw_env = {}
    env_keys = {e.value.lower(): e for e in Environment}
    for key, value in raw_env.items():
        if key not in env_keys:
            problem("SCHEMA_ERROR", f"env_multipliers.{key}: unknown environment")
            continue
        if _check_factor(value, f"env_multipliers.{key}", problem):
            env[env_keys[key]] = float(value)

    if violations:
        codes = {code for code, _ in violations}
        messages = [message for _, message in violations]
        summary = f"policy invalid ({len(messages)} violation(s)): " + "; ".join(messages)
        if codes == {"UNKNOWN_CONDITION"}:
            error: ValidationError = UnknownCondition(summary)
        elif codes == {"NONPOSITIVE_FACTOR"}:
            error = NonpositiveFactor(summary)
        else:
            error = SchemaError(summary, violations=messages)
        setattr(error, "violations", messages)
        raise error

    return PolicyDocument(
        framework_id=framework_id,
        version=version,
        base_sla_days=base_sla,
        threat_multipliers=tuple(threat),
        env_multipliers=env,
    )


def _check_factor(value, where: str, problem) -> bool:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        problem("SCHEMA_ERROR", f"{where}: must be a number, got {value!r}")
        return False
    if value <= 0:
        problem("NONPOSITIVE_FACTOR", f"{where}: factor must be > 0, got {value}")
        return False
    if value > MAX_FACTOR:
        problem("SCHEMA_ERROR", f"{where}: factor must be <= {MAX_FACTOR}, got {value}")
        return False
    return True


def load_policy(path: str | Path) -> PolicyDocument:
    return validate_policy(Path(path).read_text(encoding="utf-8"))


def load_builtin_profile(name: str) -> PolicyDocument:
    """Load one of the shipped default profiles by name (e.g. 'pci-dss')."""
    if name not in BUILTIN_PROFILES:
        raise ValidationError(
            f"unknown profile {name!r}; built-ins are {', '.join(BUILTIN_PROFILES)}"
        )
    text = resources.files("riskbridge").joinpath(f"profiles/{name}.json").read_text("utf-8")
    return validate_policy(text)


def threat_factor(
    record: VulnRecord,
    policy: PolicyDocument,
    urgency: UrgencyClass | None = None,
) -> tuple[float, str]:
    """First matching threat multiplier in listed order, else (1.0, "none")."""
    for condition, factor in policy.threat_multipliers:
        if condition.matches(record, urgency):
            return factor, condition.condition_id
    return 1.0, "none"


def assign_sla(
    record: VulnRecord,
    urgency: UrgencyClass,
    asset: AssetContext,
    policy: PolicyDocument,
    as_of: date,
) -> SlaAssignment:
    """Compute the adjusted due date: base_days * threat * env, ceil, 1-day floor."""
    base_days = policy.base_sla_days[urgency.level]
    factor, condition_id = threat_factor(record, policy, urgency)
    env_factor = policy.env_multipliers.get(asset.environment)
    if env_factor is None:
        raise MissingEnvFactor(
            f"{policy.framework_id}: no env multiplier for {asset.environment.value}"
        )
    raw = base_days * factor * env_factor
    adjusted_days = max(1, math.ceil(raw))
    return SlaAssignment(
        cve_id=record.cve_id,
        base_days=base_days,
        threat_factor=factor,
        env_factor=env_factor,
        adjusted_days=adjusted_days,
        due_date=as_of + timedelta(days=adjusted_days),
        due_basis=DueBasis(
            framework_id=policy.framework_id,
            urgency_level=urgency.level.value,
            urgency_rule_id=urgency.fired_rule,
            threat_condition_id=condition_id,
            env_key=asset.environment.value.lower(),
            raw_product=raw,
        ),
    )


def replay_due_basis(basis: DueBasis, policy: PolicyDocument) -> int:
    """Recompute adjusted_days from a due_basis against the same policy."""
    if basis.framework_id != policy.framework_id:
        raise ValidationError(
            f"due_basis names {basis.framework_id}, policy is {policy.framework_id}"
        )
    base_days = policy.base_sla_days[UrgencyLevel(basis.urgency_level)]
    if basis.threat_condition_id == "none":
        factor = 1.0
    else:
        by_id = {condition.condition_id: f for condition, f in policy.threat_multipliers}
        factor = by_id[basis.threat_condition_id]
    env = {e.value.lower(): e for e in Environment}[basis.env_key]
    env_factor = policy.env_multipliers[env]
    return max(1, math.ceil(base_days * factor * env_factor))
