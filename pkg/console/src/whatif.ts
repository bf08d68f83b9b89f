import { ApiClient, ApiError } from "./api.js";
import type { PlanResponse, ServiceError } from "./types.js";

export interface WhatIfView {
  selected: string[];
  budget: number | null;
  plan: PlanResponse | null;
  previous: PlanResponse | null;
  newlyCovered: string[];
  riskDelta: number | null;
  inFlight: boolean;
  error: ServiceError | null;
}

function initialView(): WhatIfView {
  return {
    selected: [],
    budget: null,
    plan: null,
    previous: null,
    newlyCovered: [],
    riskDelta: null,
    inFlight: false,
    error: null,
  };
}

/** Interactive bundle builder state.
 *
 * Every number shown comes from the most recent applied POST /plan
 * response; requests carry sequence numbers and responses that arrive
 * after a newer one has been applied are discarded. While a request is
 * in flight the view is flagged stale (inFlight).
 */
export class WhatIfSession {
  private seq = 0;
  private lastApplied = 0;
  private view: WhatIfView = initialView();

  constructor(
    private readonly client: ApiClient,
    private readonly onChange: (view: WhatIfView) => void = () => {},
  ) {}

  getView(): WhatIfView {
    return this.view;
  }

  async toggle(patchId: string): Promise<WhatIfView> {
    const selected = this.view.selected.includes(patchId)
      ? this.view.selected.filter((id) => id !== patchId)
      : [...this.view.selected, patchId];
    return this.refresh(selected, this.view.budget);
  }

  async setBudget(budget: number | null): Promise<WhatIfView> {
    return this.refresh(this.view.selected, budget);
  }

  async clear(): Promise<WhatIfView> {
    return this.refresh([], this.view.budget);
  }

  private emit(view: WhatIfView): WhatIfView {
    this.view = view;
    this.onChange(view);
    return view;
  }

  private async refresh(selected: string[], budget: number | null): Promise<WhatIfView> {
    const mySeq = ++this.seq;
    this.emit({ ...this.view, selected, budget, inFlight: true });
    let plan: PlanResponse;
    try {
      plan = await this.client.plan({
        selected_patch_ids: selected,
        ...(budget !== null ? { budget_hours: budget } : {}),
      });
    } catch (error) {
      if (mySeq <= this.lastApplied) return this.view; // superseded
      this.lastApplied = mySeq;
      const payload: ServiceError =
        error instanceof ApiError
          ? error.payload
          : { code: "UNREACHABLE", stage: null, message: String(error) };
      return this.emit({ ...this.view, inFlight: this.seq > mySeq, error: payload });
    }
    if (mySeq <= this.lastApplied) return this.view; // stale response, discard
    this.lastApplied = mySeq;
    const previous = this.view.plan;
    const previousCovered = new Set(previous?.covered ?? []);
    return this.emit({
      selected,
      budget,
      plan,
      previous,
      newlyCovered: plan.covered.filter((cve) => !previousCovered.has(cve)),
      riskDelta: previous === null ? null : plan.risk_reduced - previous.risk_reduced,
      inFlight: this.seq > mySeq,
      error: null,
    });
  }
}

function escapeHtml(value: string): string {
  return value
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Displayed figures are String(field) from the latest applied response. */
export function displayedFigures(view: WhatIfView): Record<string, string> {
  if (view.plan === null) {
    return { risk_reduced: "-", total_hours: "-", roi: "-" };
  }
  return {
    risk_reduced: String(view.plan.risk_reduced),
    total_hours: String(view.plan.total_hours),
    roi: String(view.plan.roi),
  };
}

export function renderWhatIfHtml(view: WhatIfView): string {
  const figures = displayedFigures(view);
  const stale = view.inFlight ? ` <span class="stale" data-testid="stale">updating…</span>` : "";
  const error = view.error
    ? `<div class="banner error" data-testid="plan-error">${escapeHtml(view.error.code)}: ` +
      `${escapeHtml(view.error.message)}</div>`
    : "";
  const delta =
    view.riskDelta === null
      ? ""
      : `<div data-testid="risk-delta">Δ risk vs previous: ${String(view.riskDelta)}</div>`;
  const newly = view.newlyCovered.length
    ? `<div data-testid="newly-covered">Newly covered: ${view.newlyCovered
        .map(escapeHtml)
        .join(", ")}</div>`
    : "";
  return (
    `<div class="whatif-panel">` +
    `<div>Selected: ${view.selected.map(escapeHtml).join(", ") || "(none)"}${stale}</div>` +
    `<div data-testid="risk">Risk reduced: ${figures.risk_reduced}</div>` +
    `<div data-testid="hours">Total hours: ${figures.total_hours}</div>` +
    `<div data-testid="roi">ROI: ${figures.roi}</div>` +
    delta +
    newly +
    error +
    `</div>`
  );
}
