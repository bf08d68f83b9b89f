import type { QueueRow } from "./types.js";

export interface QueueFilters {
  urgency?: string;
  framework?: string;
  text?: string;
}

export type SortKey = "zdes" | "due_date" | "urgency";

const URGENCY_RANK: Record<string, number> = { URGENT: 2, HIGH: 1, STANDARD: 0 };

export function filterRows(rows: QueueRow[], filters: QueueFilters): QueueRow[] {
  const text = filters.text?.trim().toLowerCase();
  return rows.filter((row) => {
    if (filters.urgency && row.urgency !== filters.urgency) return false;
    if (filters.framework && row.due_basis.framework_id !== filters.framework) return false;
    if (text) {
      const haystack = `${row.cve_id} ${row.fired_rule} ${row.patch_id ?? ""}`.toLowerCase();
      if (!haystack.includes(text)) return false;
    }
    return true;
  });
}

/** Sorting compares response values only; cve_id breaks ties so the order
 * is total and stable across renders. */
export function sortRows(rows: QueueRow[], key: SortKey, descending = true): QueueRow[] {
  const sign = descending ? -1 : 1;
  const sorted = [...rows].sort((a, b) => {
    let cmp: number;
    if (key === "zdes") {
      cmp = a.zdes === b.zdes ? 0 : a.zdes < b.zdes ? -1 : 1;
    } else if (key === "due_date") {
      cmp = a.due_date < b.due_date ? -1 : a.due_date > b.due_date ? 1 : 0;
    } else {
      cmp = (URGENCY_RANK[a.urgency] ?? -1) - (URGENCY_RANK[b.urgency] ?? -1);
    }
    if (cmp !== 0) return sign * cmp;
    return a.cve_id < b.cve_id ? -1 : 1;
  });
  return sorted;
}

function escapeHtml(value: string): string {
  return value
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Cell text is String(field) — values pass through with no reformatting. */
export function rowCells(row: QueueRow): string[] {
  return [
    row.cve_id,
    row.urgency,
    String(row.zdes),
    String(row.bii),
    row.due_date,
    `${row.due_basis.framework_id}/${row.due_basis.threat_condition_id}`,
    row.patch_id ?? "-",
  ];
}

export const QUEUE_HEADERS = ["CVE", "Urgency", "ZDES", "BII", "Due", "Basis", "Patch"];

export function renderQueueHtml(rows: QueueRow[]): string {
  if (rows.length === 0) {
    return `<div class="empty-state" data-testid="empty-state">No vulnerabilities in scope.</div>`;
  }
  const head = QUEUE_HEADERS.map((h) => `<th>${h}</th>`).join("");
  const body = rows
    .map((row) => {
      const cells = rowCells(row)
        .map((cell) => `<td>${escapeHtml(cell)}</td>`)
        .join("");
      return `<tr data-cve="${escapeHtml(row.cve_id)}">${cells}</tr>`;
    })
    .join("");
  return `<table class="queue"><thead><tr>${head}</tr></thead><tbody>${body}</tbody></table>`;
}

export function renderUnreachableBanner(detail: string): string {
  return (
    `<div class="banner error" data-testid="unreachable">` +
    `Service unreachable: ${escapeHtml(detail)} ` +
    `<button data-action="retry">Retry</button></div>`
  );
}
