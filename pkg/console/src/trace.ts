import type { TraceResponse } from "./types.js";

function escapeHtml(value: string): string {
  return value
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function section(title: string, payload: unknown): string {
  return (
    `<section class="trace-section"><h3>${escapeHtml(title)}</h3>` +
    `<pre>${escapeHtml(JSON.stringify(payload, null, 2))}</pre></section>`
  );
}

/** Per-CVE reasoning chain, rendered verbatim from the trace response. */
export function renderTraceHtml(trace: TraceResponse): string {
  const override = trace.urgency.override
    ? `<div class="badge override" data-testid="override-badge">overridden</div>`
    : "";
  return (
    `<div class="trace" data-cve="${escapeHtml(trace.cve_id)}">` +
    `<h2>${escapeHtml(trace.cve_id)}</h2>` +
    override +
    section("Inputs", trace.inputs) +
    section("Exposure score", trace.zdes) +
    section("Business impact", trace.bii) +
    section("Urgency", trace.urgency) +
    section("SLA", trace.sla) +
    section("Plan membership", trace.plan) +
    section("Data sources", trace.provenance) +
    `</div>`
  );
}
