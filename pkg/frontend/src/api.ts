/** Thin client for the /v1 API.
 *
 * Every mutation carries an Idempotency-Key so a retried request lands on
 * the server's cached original result instead of re-applying.
 */

import type {
  AgreementReport, ApiErrorBody, Assignment, ComplianceReport,
  ConfirmationReport, CrosstabReport, GroupComparisonReport,
  IncidentalsReport, LiftReport, PacketManifest, ProcessReport, ScreeningItem,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public body: ApiErrorBody,
  ) {
    super(body.message);
  }
}

function newIdempotencyKey(): string {
  if (typeof crypto !== "undefined" && crypto.randomUUID) {
    return crypto.randomUUID();
  }
  return `key-${Date.now()}-${Math.random().toString(36).slice(2)}`;
}

export class ApiClient {
  constructor(private baseUrl: string) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = {};
    let payload: string | undefined;
    if (body !== undefined) {
      headers["Content-Type"] = "application/json";
      payload = JSON.stringify(body);
    }
    if (method !== "GET") {
      headers["Idempotency-Key"] = newIdempotencyKey();
    }
    const response = await fetch(this.baseUrl + path, { method, headers, body: payload });
    const text = await response.text();
    const parsed = text ? JSON.parse(text) : null;
    if (!response.ok) {
      throw new ApiError(response.status, parsed as ApiErrorBody);
    }
    return parsed as T;
  }

  health(): Promise<{ status: string; last_seq: number }> {
    return this.request("GET", "/v1/health");
  }

  screeningQueue(status = "pending"): Promise<ScreeningItem[]> {
    return this.request("GET", `/v1/screening?status=${encodeURIComponent(status)}`);
  }

  decideScreening(
    detectionId: string,
    decision: "accept" | "reject",
    reason?: string,
    note?: string,
  ): Promise<ScreeningItem & { assignment: Assignment | null }> {
    const body: Record<string, unknown> = { decision };
    if (reason) body.reason = reason;
    if (note) body.note = note;
    return this.request("POST", `/v1/screening/${encodeURIComponent(detectionId)}`, body);
  }

  assignments(filters: { org?: string; verifier_id?: string; run_id?: string } = {}): Promise<Assignment[]> {
    const params = new URLSearchParams();
    for (const [key, value] of Object.entries(filters)) {
      if (value) params.set(key, value);
    }
    const query = params.toString();
    return this.request("GET", `/v1/assignments${query ? "?" + query : ""}`);
  }

  packet(assignmentId: string): Promise<PacketManifest> {
    return this.request("GET", `/v1/packets/${encodeURIComponent(assignmentId)}`);
  }

  submitResponse(payload: Record<string, unknown>): Promise<Record<string, unknown>> {
    return this.request("POST", "/v1/responses", payload);
  }

  submitDetermination(payload: Record<string, unknown>): Promise<Record<string, unknown>> {
    return this.request("POST", "/v1/determinations", payload);
  }

  reportConfirmation(org: string, screenedOnly = false): Promise<ConfirmationReport> {
    return this.request(
      "GET",
      `/v1/reports/confirmation_by_bucket?org=${org}&screened_only=${screenedOnly}`,
    );
  }

  reportLift(totalImages: number): Promise<LiftReport> {
    return this.request("GET", `/v1/reports/lift?total_images=${totalImages}`);
  }

  reportAgreement(): Promise<AgreementReport> {
    return this.request("GET", "/v1/reports/agreement");
  }

  reportCompliance(): Promise<ComplianceReport> {
    return this.request("GET", "/v1/reports/compliance");
  }

  reportProcess(org = "elpc"): Promise<ProcessReport> {
    return this.request("GET", `/v1/reports/process?org=${org}`);
  }

  reportGroupComparison(): Promise<GroupComparisonReport> {
    return this.request("GET", "/v1/reports/group_comparison");
  }

  reportCrosstab(): Promise<CrosstabReport> {
    return this.request("GET", "/v1/reports/confidence_crosstab");
  }

  reportIncidentals(): Promise<IncidentalsReport> {
    return this.request("GET", "/v1/reports/incidentals");
  }
}
