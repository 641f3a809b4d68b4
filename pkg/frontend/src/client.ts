import type {
  EncodeResponse,
  HealthResponse,
  InkJson,
  RecognizeResponse,
} from "./types.js";

/** Failure talking to the service, with the service's error code when it sent one. */
export class ServiceError extends Error {
  constructor(
    readonly code: string,
    message: string,
    readonly status = 0,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** The subset of the client the UI layer depends on; stubbed in tests. */
export interface RecognitionApi {
  recognize(ink: InkJson, nBest?: number, model?: string): Promise<RecognizeResponse>;
  encode(ink: InkJson): Promise<EncodeResponse>;
  health(): Promise<HealthResponse>;
}

/**
 * HTTP client for the recognition service.
 *
 * recognize() keeps at most one request in flight: starting a new one
 * aborts the previous, which then rejects with code "cancelled".
 */
export class RecognizerClient implements RecognitionApi {
  private inflight: AbortController | null = null;

  constructor(
    readonly baseUrl: string,
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  async health(): Promise<HealthResponse> {
    return this.request("GET", "/v1/health");
  }

  async recognize(ink: InkJson, nBest = 5, model?: string): Promise<RecognizeResponse> {
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;
    const body: Record<string, unknown> = { ...ink, n_best: nBest };
    if (model !== undefined) body.model = model;
    try {
      return await this.request("POST", "/v1/recognize", body, controller.signal);
    } finally {
      if (this.inflight === controller) this.inflight = null;
    }
  }

  async encode(ink: InkJson): Promise<EncodeResponse> {
    return this.request("POST", "/v1/encode", ink);
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
    signal?: AbortSignal,
  ): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, {
        method,
        signal,
        ...(body === undefined
          ? {}
          : {
              headers: { "content-type": "application/json" },
              body: JSON.stringify(body),
            }),
      });
    } catch (err) {
      const e = err as Error;
      if (e.name === "AbortError") {
        throw new ServiceError("cancelled", "request cancelled");
      }
      throw new ServiceError("unreachable", `service unreachable: ${e.message}`);
    }
    if (!response.ok) {
      let code = "http_error";
      let message = `request failed with status ${response.status}`;
      try {
        const payload = (await response.json()) as {
          error?: { code?: string; message?: string };
        };
        if (payload.error?.code) code = payload.error.code;
        if (payload.error?.message) message = payload.error.message;
      } catch {
        // non-JSON error body; keep the status message
      }
      throw new ServiceError(code, message, response.status);
    }
    return (await response.json()) as T;
  }
}
