import { ApiClient } from "./api.js";
import type { OverridesPayload } from "./types.js";

export type OverrideKind = "urgency" | "criticality" | "sla_exception";

export interface OverrideDraft {
  kind: OverrideKind;
  targetId: string; // cve_id for urgency/sla_exception, asset_id for criticality
  value: string; // level, criticality value, or due date depending on kind
  justification: string;
}

const URGENCY_LEVELS = new Set(["URGENT", "HIGH", "STANDARD"]);

/** Client-side validation; the server re-enforces all of this. */
export function validateDraft(draft: OverrideDraft): string[] {
  const problems: string[] = [];
  if (!draft.targetId.trim()) {
    problems.push("target id is required");
  }
  if (!draft.justification.trim()) {
    problems.push("justification must not be empty");
  }
  if (draft.kind === "urgency" && !URGENCY_LEVELS.has(draft.value)) {
    problems.push(`urgency level must be one of ${[...URGENCY_LEVELS].join(", ")}`);
  }
  if (draft.kind === "criticality") {
    const value = Number(draft.value);
    if (!Number.isFinite(value) || value < 0 || value > 1) {
      problems.push("criticality must be a number in [0, 1]");
    }
  }
  if (draft.kind === "sla_exception" && !/^\d{4}-\d{2}-\d{2}$/.test(draft.value)) {
    problems.push("due date must be YYYY-MM-DD");
  }
  return problems;
}

export function buildPayload(draft: OverrideDraft): OverridesPayload {
  if (draft.kind === "urgency") {
    return {
      urgency: {
        [draft.targetId]: { level: draft.value, justification: draft.justification },
      },
    };
  }
  if (draft.kind === "criticality") {
    return {
      criticality: {
        [draft.targetId]: { value: Number(draft.value), justification: draft.justification },
      },
    };
  }
  return {
    sla_exceptions: {
      [draft.targetId]: { due_date: draft.value, justification: draft.justification },
    },
  };
}

/** Validate then submit; invalid drafts never produce a request. */
export async function submitOverride(
  client: ApiClient,
  draft: OverrideDraft,
): Promise<{ ok: boolean; problems: string[] }> {
  const problems = validateDraft(draft);
  if (problems.length > 0) {
    return { ok: false, problems };
  }
  await client.submitOverrides(buildPayload(draft));
  return { ok: true, problems: [] };
}
