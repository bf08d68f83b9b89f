import { ApiClient, ServiceUnreachable } from "./api.js";
import { filterRows, renderQueueHtml, renderUnreachableBanner, sortRows } from "./queue.js";
import type { QueueFilters, SortKey } from "./queue.js";
import { submitOverride } from "./overrides.js";
import type { OverrideDraft, OverrideKind } from "./overrides.js";
import { renderTraceHtml } from "./trace.js";
import type { QueueRow } from "./types.js";
import { renderWhatIfHtml, WhatIfSession } from "./whatif.js";

interface ReportDocument {
  inventory: { patch_id: string; covered_cves: string[]; effort_hours: number }[];
}

const baseUrl =
  new URLSearchParams(window.location.search).get("api") ?? "http://127.0.0.1:8400";
const client = new ApiClient(baseUrl);

const queueEl = document.getElementById("queue")!;
const whatifEl = document.getElementById("whatif")!;
const patchesEl = document.getElementById("patches")!;
const traceEl = document.getElementById("trace")!;
const overrideStatusEl = document.getElementById("override-status")!;

let rows: QueueRow[] = [];
let filters: QueueFilters = {};
let sortKey: SortKey = "zdes";
let sortDescending = true;

const session = new WhatIfSession(client, (view) => {
  whatifEl.innerHTML = renderWhatIfHtml(view);
});

function renderQueue(): void {
  queueEl.innerHTML = renderQueueHtml(sortRows(filterRows(rows, filters), sortKey, sortDescending));
  for (const tr of queueEl.querySelectorAll<HTMLTableRowElement>("tr[data-cve]")) {
    tr.addEventListener("click", () => openTrace(tr.dataset.cve!));
  }
}

async function openTrace(cveId: string): Promise<void> {
  try {
    traceEl.innerHTML = renderTraceHtml(await client.trace(cveId));
  } catch (error) {
    traceEl.innerHTML = `<div class="banner error">${String(error)}</div>`;
  }
}

function renderPatchToggles(inventory: ReportDocument["inventory"]): void {
  patchesEl.innerHTML = inventory
    .map(
      (patch) =>
        `<label><input type="checkbox" data-patch="${patch.patch_id}"> ` +
        `${patch.patch_id} (${String(patch.effort_hours)}h, covers ${patch.covered_cves.length})</label>`,
    )
    .join("<br>");
  for (const box of patchesEl.querySelectorAll<HTMLInputElement>("input[data-patch]")) {
    box.addEventListener("change", () => void session.toggle(box.dataset.patch!));
  }
}

async function refreshAll(): Promise<void> {
  try {
    rows = await client.vulns();
    renderQueue();
    const report = JSON.parse(await client.reportText()) as ReportDocument;
    renderPatchToggles(report.inventory);
  } catch (error) {
    if (error instanceof ServiceUnreachable) {
      queueEl.innerHTML = renderUnreachableBanner(baseUrl);
      queueEl
        .querySelector("[data-action=retry]")
        ?.addEventListener("click", () => void refreshAll());
      return;
    }
    throw error;
  }
}

function wireControls(): void {
  const urgencySelect = document.getElementById("filter-urgency") as HTMLSelectElement | null;
  urgencySelect?.addEventListener("change", () => {
    filters = { ...filters, urgency: urgencySelect.value || undefined };
    renderQueue();
  });
  const textInput = document.getElementById("filter-text") as HTMLInputElement | null;
  textInput?.addEventListener("input", () => {
    filters = { ...filters, text: textInput.value || undefined };
    renderQueue();
  });
  const sortSelect = document.getElementById("sort-key") as HTMLSelectElement | null;
  sortSelect?.addEventListener("change", () => {
    sortKey = sortSelect.value as SortKey;
    renderQueue();
  });
  const form = document.getElementById("override-form") as HTMLFormElement | null;
  form?.addEventListener("submit", (event) => {
    event.preventDefault();
    const data = new FormData(form);
    const draft: OverrideDraft = {
      kind: data.get("kind") as OverrideKind,
      targetId: String(data.get("target") ?? ""),
      value: String(data.get("value") ?? ""),
      justification: String(data.get("justification") ?? ""),
    };
    void submitOverride(client, draft).then((outcome) => {
      if (!outcome.ok) {
        overrideStatusEl.textContent = outcome.problems.join("; ");
        return;
      }
      overrideStatusEl.textContent = "override recorded";
      void refreshAll();
    });
  });
}

wireControls();
void refreshAll();
