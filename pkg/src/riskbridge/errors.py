"""Engine error hierarchy.

Every error carries a stable machine-readable ``code`` (what went wrong)
and, once it crosses the pipeline boundary, a ``stage`` label (where).
The HTTP service and CLI serialize these as {code, stage, message}.
"""

from __future__ import annotations


class EngineError(Exception):
    """Base class for all engine errors."""

    code = "ENGINE_ERROR"

    def __init__(self, message: str, *, stage: str | None = None):
        super().__init__(message)
        self.message = message
        self.stage = stage

    def to_dict(self) -> dict:
        return {"code": self.code, "stage": self.stage, "message": self.message}


class ValidationError(EngineError):
    """Bad inputs: schemas, ranges, preconditions. CLI exit code 2."""

    code = "VALIDATION_ERROR"


class UpstreamError(EngineError):
    """Failures talking to external feeds. CLI exit code 3."""

    code = "UPSTREAM_ERROR"


# feedstore

class UnreachableSource(UpstreamError):
    code = "UNREACHABLE_SOURCE"


class MalformedPayload(UpstreamError):
    code = "MALFORMED_PAYLOAD"


class OfflineNoFixture(ValidationError):
    code = "OFFLINE_NO_FIXTURE"


class ParseError(ValidationError):
    code = "PARSE_ERROR"


# scoring

class FuturePublication(ValidationError):
    code = "FUTURE_PUBLICATION"


class NegativeEffort(ValidationError):
    code = "NEGATIVE_EFFORT"


# policy

class SchemaError(ValidationError):
    code = "SCHEMA_ERROR"

    def __init__(self, message: str, *, violations: list[str] | None = None, stage: str | None = None):
        super().__init__(message, stage=stage)
        self.violations = violations or []

    def to_dict(self) -> dict:
        d = super().to_dict()
        d["violations"] = self.violations
        return d


class UnknownCondition(ValidationError):
    code = "UNKNOWN_CONDITION"


class NonpositiveFactor(ValidationError):
    code = "NONPOSITIVE_FACTOR"


class MissingEnvFactor(ValidationError):
    code = "MISSING_ENV_FACTOR"


# optimizer

class MissingScore(ValidationError):
    code = "MISSING_SCORE"


class NonpositiveBudget(ValidationError):
    code = "NONPOSITIVE_BUDGET"


class InstanceTooLarge(ValidationError):
    code = "INSTANCE_TOO_LARGE"


# reporting

class KExceedsRanking(ValidationError):
    code = "K_EXCEEDS_RANKING"


class DuplicateInRanking(ValidationError):
    code = "DUPLICATE_IN_RANKING"


class SetOutsideUniverse(ValidationError):
    code = "SET_OUTSIDE_UNIVERSE"


class EmptyInput(ValidationError):
    code = "EMPTY_INPUT"


class UnsupportedFormat(ValidationError):
    code = "UNSUPPORTED_FORMAT"


class IncompletePipeline(ValidationError):
    code = "INCOMPLETE_PIPELINE"


# api

class ConfigError(ValidationError):
    code = "CONFIG_ERROR"


class BindFailure(EngineError):
    code = "BIND_FAILURE"
