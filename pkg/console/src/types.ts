// Response shapes for the engine's JSON API. The console displays these
// values verbatim; it never rescores or re-derives anything.

export interface DueBasis {
  framework_id: string;
  urgency_level: string;
  urgency_rule_id: string;
  threat_condition_id: string;
  env_key: string;
  raw_product: number;
}

export interface QueueRow {
  cve_id: string;
  cvss_score: number;
  epss_probability: number;
  kev_listed: boolean;
  urgency: string;
  fired_rule: string;
  zdes: number;
  bii: number;
  due_date: string;
  due_basis: DueBasis;
  patch_id: string | null;
}

export interface PlanStep {
  patch_id: string;
  marginal_risk: number;
  marginal_roi: number;
}

export interface PlanResponse {
  selected: string[];
  covered: string[];
  risk_reduced: number;
  total_hours: number;
  roi: number;
  budget_hours: number | null;
  per_step: PlanStep[];
}

export interface PlanRequest {
  selected_patch_ids?: string[];
  budget_hours?: number;
  overrides?: OverridesPayload;
}

export interface OverrideEntry {
  justification: string;
  [key: string]: unknown;
}

export interface OverridesPayload {
  urgency?: Record<string, { level: string; justification: string }>;
  criticality?: Record<string, { value: number; justification: string }>;
  sla_exceptions?: Record<string, { due_date: string; justification: string }>;
}

export interface ServiceError {
  code: string;
  stage: string | null;
  message: string;
}

export interface HealthResponse {
  status: string;
  version: string;
}

// Traces are rendered generically; only the fields the viewer names are typed.
export interface TraceResponse {
  cve_id: string;
  inputs: Record<string, unknown>;
  zdes: Record<string, unknown> & { value: number };
  bii: Record<string, unknown> & { value: number };
  urgency: { level: string; fired_rule: string; override: unknown };
  sla: Record<string, unknown> & { due_date: string; due_basis: DueBasis };
  plan: { patch_id: string | null; risk_units: number };
  provenance: Record<string, string>;
}

export interface PolicySummary {
  framework_id: string;
  version: string;
  base_sla_days: Record<string, number>;
  threat_multipliers: { when: string; factor: number }[];
  env_multipliers: Record<string, number>;
}
