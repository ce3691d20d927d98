/**
 * Typed client for the adjudication review API.
 *
 * Payload shapes mirror the server responses field for field. The client
 * never computes retention or progress on its own; every number shown in
 * the UI comes from one of these calls.
 */

export interface QueueCode {
  code: string;
  description: string;
  patient_count: number;
}

export interface DecisionRecord {
  term_id: string;
  reviewer_id: string;
  verdict: string;
  note: string;
  timestamp: number;
}

/** One reviewable term: matched in-sample codes plus its decision history. */
export interface QueueItem {
  term_id: string;
  component: string;
  phrase: string;
  provenance: string;
  codes: QueueCode[];
  decisions: DecisionRecord[];
  latest: Record<string, string>;
}

export interface Progress {
  pending: number;
  decided: number;
  retained_if_exported: number;
}

export type Verdict = "approve" | "reject";

export const RETENTION_RULES = ["any_approve", "all_approve", "majority"] as const;

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function errorMessage(response: Response): Promise<string> {
  const text = await response.text();
  try {
    const payload = JSON.parse(text) as { error?: unknown };
    if (typeof payload.error === "string") return payload.error;
  } catch {
    // non-JSON error body, fall through to the raw text
  }
  return text || `HTTP ${response.status}`;
}

export class ReviewApi {
  constructor(private readonly baseUrl: string = "") {}

  private async requestJson<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(this.baseUrl + path, init);
    if (!response.ok) {
      throw new ApiError(response.status, await errorMessage(response));
    }
    return (await response.json()) as T;
  }

  async queue(): Promise<QueueItem[]> {
    const payload = await this.requestJson<{ items: QueueItem[] }>("/api/queue");
    return payload.items;
  }

  // term ids are lowercase words joined by "-" with one ":", all URL-path
  // safe; the server compares the path segment verbatim, so no escaping
  async term(termId: string): Promise<QueueItem> {
    return this.requestJson<QueueItem>(`/api/terms/${termId}`);
  }

  async submitDecision(
    termId: string,
    reviewerId: string,
    verdict: Verdict,
    note = "",
  ): Promise<QueueItem> {
    const payload = await this.requestJson<{ ok: boolean; term: QueueItem }>(
      "/api/decisions",
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({
          term_id: termId,
          reviewer_id: reviewerId,
          verdict,
          note,
        }),
      },
    );
    return payload.term;
  }

  async progress(rule = "any_approve"): Promise<Progress> {
    return this.requestJson<Progress>(`/api/progress?rule=${encodeURIComponent(rule)}`);
  }

  exportUrl(rule = "any_approve"): string {
    return `${this.baseUrl}/api/export?rule=${encodeURIComponent(rule)}`;
  }

  async exportCsv(rule = "any_approve"): Promise<string> {
    const response = await fetch(this.exportUrl(rule));
    if (!response.ok) {
      throw new ApiError(response.status, await errorMessage(response));
    }
    return response.text();
  }
}
