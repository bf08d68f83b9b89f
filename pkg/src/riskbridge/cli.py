"""Command-line surface.

Exit codes: 0 success, 2 validation error, 3 upstream (feed/network) failure.
Configuration comes from --config or the RISKBRIDGE_CONFIG environment
variable; individual flags override the file.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from datetime import date

from .errors import EngineError, UpstreamError, ValidationError
from .feeds.models import FeedSource
from .feeds.store import merge_feeds
from .optimizer import plan_exact
from .pipeline import build_store, load_config, run_pipeline, simulate_zeroday
from .reporting import render_report
from .service import RunInputs, serve

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_UPSTREAM = 3


def _parse_date(text: str) -> date:
    try:
        return date.fromisoformat(text)
    except ValueError as exc:
        raise ValidationError(f"invalid date {text!r}: {exc}") from exc


def _emit(payload) -> None:
    json.dump(payload, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riskbridge",
        description="Vulnerability prioritization: feed fusion, scoring, SLAs, patch planning.",
    )
    parser.add_argument("--config", help="engine config file (default: $RISKBRIDGE_CONFIG)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="fetch and merge the NVD/EPSS/KEV feeds")
    p.add_argument("--offline", action="store_true", help="force offline fixture mode")
    p.add_argument("--fixtures", help="fixture directory (nvd.json/epss.json/kev.json)")
    p.add_argument("--since", type=_parse_date, help="only CVEs published on/after this date")

    p = sub.add_parser("score", help="score merged records (zdes, bii, urgency)")
    p.add_argument("--as-of", type=_parse_date, dest="as_of", help="assessment date")

    p = sub.add_parser("plan", help="compute a remediation plan over the patch inventory")
    p.add_argument("--budget", type=float, help="effort budget in hours")
    p.add_argument("--exact", action="store_true", help="use the exact oracle (<= 20 patches)")

    p = sub.add_parser("report", help="render the run report")
    p.add_argument("--format", choices=("json", "csv", "md"), default="json")
    p.add_argument("--out", help="output path (default stdout)")

    p = sub.add_parser("metrics", help="evaluation metrics for the run")
    p.add_argument("--k", type=int, default=3, help="K for precision@K")

    p = sub.add_parser("serve", help="run the HTTP service for the console")
    p.add_argument("--port", type=int, default=8400)
    p.add_argument("--host", default="127.0.0.1")

    p = sub.add_parser(
        "simulate-zeroday",
        help="score as zero-days: EPSS forced to 0, no KEV listing, recency 1",
    )
    p.add_argument("--cves", help="comma-separated CVE ids (default: all ingested)")

    return parser


def _apply_flags(config, args):
    updates = {}
    if getattr(args, "offline", False):
        updates["network_mode"] = "OFFLINE"
    if getattr(args, "fixtures", None):
        updates["fixtures_dir"] = args.fixtures
    if getattr(args, "as_of", None):
        updates["as_of"] = args.as_of
    return dataclasses.replace(config, **updates) if updates else config


def _cmd_ingest(config, args) -> int:
    store = build_store(config)
    query = args.since
    nvd = store.fetch_feed(FeedSource.NVD, query)
    epss = store.fetch_feed(FeedSource.EPSS)
    kev = store.fetch_feed(FeedSource.KEV)
    records = merge_feeds(nvd, epss, kev)
    _emit(
        {
            "records": len(records),
            "kev_listed": sum(1 for r in records if r.kev_listed),
            "epss_missing": sum(1 for r in records if r.epss_missing),
            "snapshots": {
                "nvd": nvd.content_hash,
                "epss": epss.content_hash,
                "kev": kev.content_hash,
            },
        }
    )
    return EXIT_OK


def _cmd_score(config, args) -> int:
    result = run_pipeline(config)
    rows = [
        {
            "cve_id": r.cve_id,
            "zdes": result.zdes[r.cve_id].value,
            "bii": result.bii[r.cve_id].value,
            "urgency": result.urgencies[r.cve_id].level.value,
            "fired_rule": result.urgencies[r.cve_id].fired_rule,
            "due_date": result.assignments[r.cve_id].due_date.isoformat(),
        }
        for r in result.records
    ]
    _emit(rows)
    return EXIT_OK


def _cmd_plan(config, args) -> int:
    result = run_pipeline(config, budget_hours=args.budget)
    plan = result.plan
    if args.exact:
        plan = plan_exact(result.patches, result.assessments, args.budget)
    _emit(plan.to_dict())
    return EXIT_OK


def _cmd_report(config, args) -> int:
    result = run_pipeline(config)
    if args.format == "json":
        payload = result.report_json
    else:
        payload = render_report(result.traces, result.plan, result.metrics, args.format)
    if args.out:
        with open(args.out, "wb") as handle:
            handle.write(payload)
    else:
        sys.stdout.write(payload.decode("utf-8"))
    return EXIT_OK


def _cmd_metrics(config, args) -> int:
    if args.k <= 0:
        raise ValidationError(f"--k must be positive, got {args.k}")
    result = run_pipeline(config, metrics_k=args.k)
    _emit(result.metrics.to_dict())
    return EXIT_OK


def _cmd_serve(config, args) -> int:
    serve(config, RunInputs(), host=args.host, port=args.port)
    return EXIT_OK


def _cmd_simulate_zeroday(config, args) -> int:
    store = build_store(config)
    nvd = store.fetch_feed(FeedSource.NVD)
    epss = store.fetch_feed(FeedSource.EPSS)
    kev = store.fetch_feed(FeedSource.KEV)
    records = merge_feeds(nvd, epss, kev)
    as_of = config.as_of or date.today()
    cve_ids = [c.strip() for c in args.cves.split(",")] if args.cves else None
    scores = simulate_zeroday(records, as_of, config.scoring, cve_ids=cve_ids)
    _emit({cve: round(score.value, 6) for cve, score in sorted(scores.items())})
    return EXIT_OK


_COMMANDS = {
    "ingest": _cmd_ingest,
    "score": _cmd_score,
    "plan": _cmd_plan,
    "report": _cmd_report,
    "metrics": _cmd_metrics,
    "serve": _cmd_serve,
    "simulate-zeroday": _cmd_simulate_zeroday,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _apply_flags(load_config(args.config), args)
        return _COMMANDS[args.command](config, args)
    except UpstreamError as exc:
        json.dump(exc.to_dict(), sys.stderr)
        sys.stderr.write("\n")
        return EXIT_UPSTREAM
    except EngineError as exc:
        json.dump(exc.to_dict(), sys.stderr)
        sys.stderr.write("\n")
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
