/** HTTP client for the local review service. Page content is only ever
 * sent to the configured localhost base URL, nowhere else. */

import type { FindingsResponse, LabelsResponse, ScanOptions, SimilarResponse } from "./types";

export const DEFAULT_BASE_URL = "http://127.0.0.1:8787";

export class ServiceError extends Error {
  constructor(
    message: string,
    public readonly status: number | null,
    public readonly retryable: boolean,
    public readonly partial: FindingsResponse | null = null,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

interface FetchLike {
  (input: string, init?: RequestInit): Promise<Response>;
}

export class ServiceClient {
  constructor(
    private readonly baseUrl: string = DEFAULT_BASE_URL,
    private readonly fetchImpl: FetchLike = fetch,
  ) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/+$/, "") + path;
  }

  async scan(
    content: string,
    contentType: "html" | "text" = "html",
    options: ScanOptions = {},
    signal?: AbortSignal,
  ): Promise<FindingsResponse> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.url("/api/v1/scan"), {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ content, content_type: contentType, options }),
        signal,
      });
    } catch (err) {
      if ((err as Error).name === "AbortError") throw err;
      throw new ServiceError(`service unreachable: ${(err as Error).message}`, null, true);
    }
    if (response.status === 503) {
      const body = await response.json().catch(() => ({}));
      throw new ServiceError(
        "service reported providers unreachable",
        503,
        true,
        (body as { partial?: FindingsResponse }).partial ?? null,
      );
    }
    if (response.status === 202) {
      const { job_id } = (await response.json()) as { job_id: string };
      return this.pollJob(job_id, signal);
    }
    if (!response.ok) {
      const body = await response.json().catch(() => ({ error: response.statusText }));
      throw new ServiceError(
        (body as { error?: string }).error ?? `scan failed (${response.status})`,
        response.status,
        response.status >= 500,
      );
    }
    return (await response.json()) as FindingsResponse;
  }

  private async pollJob(jobId: string, signal?: AbortSignal, delayMs = 400): Promise<FindingsResponse> {
    for (;;) {
      const response = await this.fetchImpl(this.url(`/api/v1/scan/${jobId}`), { signal });
      if (!response.ok) {
        throw new ServiceError(`job ${jobId} failed (${response.status})`, response.status, true);
      }
      const body = (await response.json()) as {
        status: string;
        result?: FindingsResponse;
      };
      if (body.status === "done" && body.result) return body.result;
      if (body.status === "error") {
        throw new ServiceError(`scan job failed`, null, true);
      }
      await new Promise((resolve) => setTimeout(resolve, delayMs));
      if (signal?.aborted) throw new DOMException("aborted", "AbortError");
    }
  }

  async labels(signal?: AbortSignal): Promise<LabelsResponse> {
    const response = await this.fetchImpl(this.url("/api/v1/labels"), { signal });
    if (!response.ok) {
      throw new ServiceError(`labels failed (${response.status})`, response.status, true);
    }
    return (await response.json()) as LabelsResponse;
  }

  async similar(clauseText: string, k: number, signal?: AbortSignal): Promise<SimilarResponse> {
    const params = new URLSearchParams({ clause_text: clauseText, k: String(k) });
    const response = await this.fetchImpl(this.url(`/api/v1/similar?${params}`), { signal });
    if (!response.ok) {
      throw new ServiceError(`similar lookup failed (${response.status})`, response.status, response.status >= 500);
    }
    return (await response.json()) as SimilarResponse;
  }
}
