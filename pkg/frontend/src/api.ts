/**
 * Thin fetch layer over the runsim service.
 *
 * The fetch function is injectable so tests can count calls and feed
 * canned responses without a network. All non-2xx responses become
 * ApiError with the server's detail string; a failed fetch (service
 * down, DNS, CORS) becomes ApiError with status 0 so callers can show
 * a connection banner instead of a request error.
 */

import type {
  EditOp,
  FitJobStatus,
  ParamsResponse,
  RunDetail,
  RunListResponse,
  SimulateResponse,
  WhatIfResponse,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  readonly status: number;

  constructor(status: number, message: string) {
    super(message);
    this.name = "ApiError";
    this.status = status;
  }

  get unreachable(): boolean {
    return this.status === 0;
  }
}

function detailToMessage(body: unknown, status: number): string {
  if (body && typeof body === "object" && "detail" in body) {
    const detail = (body as { detail: unknown }).detail;
    if (typeof detail === "string") return detail;
    if (Array.isArray(detail)) {
      // 400 field errors: [{loc, msg, type}, ...]
      const parts = detail
        .map((d) => (d && typeof d === "object" && "msg" in d ? String((d as any).msg) : ""))
        .filter((s) => s.length > 0);
      if (parts.length) return parts.join("; ");
    }
  }
  return `request failed with status ${status}`;
}

export class ServiceClient {
  readonly baseUrl: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl: string, fetchFn?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let res: Response;
    try {
      res = await this.fetchFn(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiError(0, `service unreachable: ${String((err as Error)?.message ?? err)}`);
    }
    let body: unknown = null;
    try {
      body = await res.json();
    } catch {
      // non-JSON body; fall through to the status message
    }
    if (!res.ok) throw new ApiError(res.status, detailToMessage(body, res.status));
    return body as T;
  }

  private post<T>(path: string, payload: unknown, signal?: AbortSignal): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
      signal,
    });
  }

  listRuns(): Promise<RunListResponse> {
    return this.request<RunListResponse>("/runs");
  }

  runDetail(runId: string): Promise<RunDetail> {
    return this.request<RunDetail>(`/runs/${encodeURIComponent(runId)}`);
  }

  params(ref?: string): Promise<ParamsResponse> {
    const q = ref ? `?ref=${encodeURIComponent(ref)}` : "";
    return this.request<ParamsResponse>(`/params${q}`);
  }

  simulate(runId: string, ref?: string, testIds?: number[]): Promise<SimulateResponse> {
    const q = ref ? `?ref=${encodeURIComponent(ref)}` : "";
    return this.post<SimulateResponse>(`/simulate${q}`, {
      run_id: runId,
      test_example_ids: testIds && testIds.length ? testIds : null,
    });
  }

  whatIf(
    runId: string,
    edits: EditOp[],
    ref?: string,
    testIds?: number[],
    signal?: AbortSignal
  ): Promise<WhatIfResponse> {
    const q = ref ? `?ref=${encodeURIComponent(ref)}` : "";
    return this.post<WhatIfResponse>(
      `/whatif${q}`,
      {
        run_id: runId,
        edits,
        test_example_ids: testIds && testIds.length ? testIds : null,
      },
      signal
    );
  }

  startFit(): Promise<FitJobStatus> {
    // defaults only: linear variant, ridge strength selected server-side
    return this.post<FitJobStatus>("/fit", {});
  }

  fitJob(jobId: string): Promise<FitJobStatus> {
    return this.request<FitJobStatus>(`/fit/jobs/${encodeURIComponent(jobId)}`);
  }
}
