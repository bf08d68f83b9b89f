import { describe, expect, it } from "vitest";

import { filterRows, renderQueueHtml, rowCells, sortRows } from "../src/queue.js";
import type { QueueRow } from "../src/types.js";

function row(cve: string, zdes: number, urgency = "STANDARD", due = "2025-08-30"): QueueRow {
  return {
    cve_id: cve,
    cvss_score: 5,
    epss_probability: 0,
    kev_listed: false,
    urgency,
    fired_rule: "no_exploit_indicators",
    zdes,
    bii: 0.42,
    due_date: due,
    due_basis: {
      framework_id: "PCI-DSS",
      urgency_level: urgency,
      urgency_rule_id: "no_exploit_indicators",
      threat_condition_id: "none",
      env_key: "internal",
      raw_product: 90,
    },
    patch_id: null,
  };
}

// mirrors the five-CVE zero-day run: 65015 carries the top score
const ZERO_DAY_ROWS = [
  row("CVE-2025-62406", 0.593),
  row("CVE-2025-64324", 0.605),
  row("CVE-2025-64325", 0.602),
  row("CVE-2025-65015", 0.626),
  row("CVE-2025-65013", 0.536),
];

describe("queue sorting", () => {
  it("top zdes sort puts the highest-scored CVE first", () => {
    const sorted = sortRows(ZERO_DAY_ROWS, "zdes");
    expect(sorted[0].cve_id).toBe("CVE-2025-65015");
    expect(sorted.map((r) => r.cve_id).slice(-1)[0]).toBe("CVE-2025-65013");
  });

  it("due date sort ascending", () => {
    const rows = [row("CVE-2025-0001", 0.1, "STANDARD", "2025-09-01"),
                  row("CVE-2025-0002", 0.2, "STANDARD", "2025-07-01")];
    expect(sortRows(rows, "due_date", false)[0].cve_id).toBe("CVE-2025-0002");
  });

  it("urgency ranking URGENT > HIGH > STANDARD", () => {
    const rows = [row("CVE-2025-0001", 0.1, "STANDARD"), row("CVE-2025-0002", 0.1, "URGENT"),
                  row("CVE-2025-0003", 0.1, "HIGH")];
    expect(sortRows(rows, "urgency").map((r) => r.urgency)).toEqual([
      "URGENT", "HIGH", "STANDARD",
    ]);
  });

  it("does not mutate the input array", () => {
    const rows = [...ZERO_DAY_ROWS];
    sortRows(rows, "zdes");
    expect(rows.map((r) => r.cve_id)).toEqual(ZERO_DAY_ROWS.map((r) => r.cve_id));
  });
});

describe("queue filters", () => {
  it("urgency filter keeps only matching rows", () => {
    const rows = [row("CVE-2025-0001", 0.1, "URGENT"), row("CVE-2025-0002", 0.1, "HIGH")];
    const filtered = filterRows(rows, { urgency: "URGENT" });
    expect(filtered.map((r) => r.cve_id)).toEqual(["CVE-2025-0001"]);
    expect(filtered.every((r) => r.urgency === "URGENT")).toBe(true);
  });

  it("text filter matches cve id substring", () => {
    expect(filterRows(ZERO_DAY_ROWS, { text: "65015" })).toHaveLength(1);
  });

  it("no filters returns everything", () => {
    expect(filterRows(ZERO_DAY_ROWS, {})).toHaveLength(5);
  });
});

describe("queue rendering", () => {
  it("renders score cells verbatim via String()", () => {
    const r = row("CVE-2025-0001", 0.6049999999999999);
    const cells = rowCells(r);
    expect(cells[2]).toBe(String(r.zdes));
    expect(cells[2]).toBe("0.6049999999999999"); // no rounding, no math
    expect(cells[3]).toBe(String(r.bii));
    expect(cells[4]).toBe(r.due_date);
  });

  it("empty run renders the empty-state panel", () => {
    expect(renderQueueHtml([])).toContain("empty-state");
  });

  it("renders one tr per row", () => {
    const html = renderQueueHtml(ZERO_DAY_ROWS);
    expect(html.match(/<tr data-cve=/g)).toHaveLength(5);
  });
});
