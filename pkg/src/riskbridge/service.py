"""HTTP service backing the analyst console.

Serves read endpoints over an immutable published run snapshot; what-if
planning (POST /plan) is stateless per request and never touches the
baseline. POST /overrides re-runs the pipeline with the submitted override
set and swaps the published snapshot atomically.
"""

from __future__ import annotations

import errno
import threading
from dataclasses import dataclass
from dataclasses import replace as dc_replace
from datetime import date
from typing import Optional, Sequence

from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import __version__
from .errors import BindFailure, EngineError, UpstreamError
from .feeds.store import FeedStore
from .optimizer import Patch, assess_risk, plan_for_selection, plan_greedy
from .pipeline import AssetMap, EngineConfig, OverrideSet, PipelineResult, run_pipeline
from .scoring import compute_bii


class PlanRequest(BaseModel):
    selected_patch_ids: Optional[list[str]] = None
    budget_hours: Optional[float] = None
    overrides: Optional[dict] = None


class OverridesRequest(BaseModel):
    urgency: Optional[dict] = None
    criticality: Optional[dict] = None
    sla_exceptions: Optional[dict] = None


@dataclass
class RunInputs:
    """Everything a pipeline run needs besides the config and overrides."""

    cve_scope: Optional[Sequence[str]] = None
    since: Optional[date] = None
    asset_map: Optional[AssetMap] = None
    patches: Optional[Sequence[Patch]] = None
    budget_hours: Optional[float] = None
    metrics_k: int = 3
    as_of: Optional[date] = None
    store: Optional[FeedStore] = None

    def run(self, config: EngineConfig, overrides: OverrideSet | None = None) -> PipelineResult:
        return run_pipeline(
            config,
            cve_scope=self.cve_scope,
            since=self.since,
            asset_map=self.asset_map,
            patches=self.patches,
            overrides=overrides,
            budget_hours=self.budget_hours,
            metrics_k=self.metrics_k,
            store=self.store,
            as_of=self.as_of,
        )


class RunPublisher:
    """Holds the published run; re-runs swap the snapshot atomically."""

    def __init__(self, config: EngineConfig, inputs: RunInputs, result: PipelineResult):
        self.config = config
        self.inputs = inputs
        self._result = result
        self._lock = threading.Lock()

    @property
    def result(self) -> PipelineResult:
        return self._result

    def republish(self, overrides: OverrideSet) -> PipelineResult:
        with self._lock:
            # pin as_of so a republished run stays comparable to the baseline
            if self.inputs.as_of is None:
                self.inputs.as_of = self._result.as_of
            result = self.inputs.run(self.config, overrides)
            self._result = result
            return result


def _vuln_rows(result: PipelineResult) -> list[dict]:
    patch_of = {t.cve_id: t.patch_id for t in result.traces}
    rows = []
    for record in result.records:
        cve = record.cve_id
        sla = result.assignments[cve]
        rows.append(
            {
                "cve_id": cve,
                "cvss_score": record.cvss_score,
                "epss_probability": record.epss_probability,
                "kev_listed": record.kev_listed,
                "urgency": result.urgencies[cve].level.value,
                "fired_rule": result.urgencies[cve].fired_rule,
                "zdes": result.zdes[cve].value,
                "bii": result.bii[cve].value,
                "due_date": sla.due_date.isoformat(),
                "due_basis": sla.due_basis.to_dict(),
                "patch_id": patch_of.get(cve),
            }
        )
    return rows


def what_if_plan(result: PipelineResult, config: EngineConfig, request: PlanRequest):
    """Compute a plan against the published run without mutating it.

    Criticality overrides in the request rescore BII/risk in-memory for
    this response only.
    """
    assessments = result.assessments
    if request.overrides:
        overrides = OverrideSet.from_dict(request.overrides)
        records_by_id = {r.cve_id: r for r in result.records}
        bii = dict(result.bii)
        for cve, asset in result.assets_by_cve.items():
            crit = overrides.criticality.get(asset.asset_id)
            if crit is not None:
                patched_asset = dc_replace(asset, criticality=crit.value)
                bii[cve] = compute_bii(
                    records_by_id[cve], patched_asset, result.effort_by_cve[cve], config.scoring
                )
        assessments = tuple(
            assess_risk(result.records, result.zdes, bii, scale=config.risk_unit_scale)
        )
    if request.selected_patch_ids is not None:
        return plan_for_selection(
            result.patches, assessments, request.selected_patch_ids, request.budget_hours
        )
    return plan_greedy(result.patches, assessments, request.budget_hours)


def create_app(
    config: EngineConfig,
    inputs: RunInputs | None = None,
    *,
    result: PipelineResult | None = None,
) -> FastAPI:
    """Build the service app; runs the pipeline once unless given a result."""
    inputs = inputs or RunInputs()
    if result is None:
        result = inputs.run(config)
    publisher = RunPublisher(config, inputs, result)

    app = FastAPI(title="riskbridge", version=__version__)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.publisher = publisher

    @app.exception_handler(EngineError)
    async def engine_error_handler(_request: Request, exc: EngineError):
        status = 502 if isinstance(exc, UpstreamError) else 400
        return JSONResponse(status_code=status, content=exc.to_dict())

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "version": __version__}

    @app.get("/vulns")
    def vulns():
        return _vuln_rows(publisher.result)

    @app.get("/trace/{cve_id}")
    def trace(cve_id: str):
        for t in publisher.result.traces:
            if t.cve_id == cve_id:
                return t.to_dict()
        return JSONResponse(
            status_code=404,
            content={"code": "NOT_FOUND", "stage": "report", "message": f"no trace for {cve_id}"},
        )

    @app.get("/report")
    def report():
        return Response(content=publisher.result.report_json, media_type="application/json")

    @app.get("/policies")
    def policies():
        return [p.to_dict() for p in publisher.result.policies]

    @app.post("/plan")
    def plan(request: PlanRequest):
        return what_if_plan(publisher.result, config, request).to_dict()

    @app.post("/overrides")
    def overrides(request: OverridesRequest):
        override_set = OverrideSet.from_dict(request.model_dump(exclude_none=True))
        updated = publisher.republish(override_set)
        return {
            "status": "published",
            "overrides": override_set.to_dict(),
            "cve_count": len(updated.records),
        }

    return app


def serve(
    config: EngineConfig,
    inputs: RunInputs | None = None,
    *,
    host: str = "127.0.0.1",
    port: int = 8400,
) -> None:
    """Run the service until interrupted; raises BindFailure if the port is taken."""
    import uvicorn

    app = create_app(config, inputs)
    try:
        uvicorn.run(app, host=host, port=port, log_level="info")
    except (OSError, SystemExit) as exc:
        if isinstance(exc, OSError) and exc.errno not in (errno.EADDRINUSE, errno.EACCES):
            raise
        raise BindFailure(f"cannot bind {host}:{port}: {exc}") from exc
