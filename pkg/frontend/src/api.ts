/**
 * Client for the calibration service, with last-write-wins recomputation:
 * when edits arrive faster than the service answers, only the newest
 * request's result is ever delivered.
 */

import type { CalibrateRequest, CalibrateResponse } from "./scenario";

export class ServiceError extends Error {
  constructor(
    message: string,
    readonly status: number | null = null,
  ) {
    super(message);
  }
}

export class CalibrationClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  async calibrate(
    request: CalibrateRequest,
    signal?: AbortSignal,
  ): Promise<CalibrateResponse> {
    let response: Response;
    try {
      response = await this.fetchFn(`${this.baseUrl}/api/calibrate`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(request),
        signal,
      });
    } catch (error) {
      if ((error as Error).name === "AbortError") throw error;
      throw new ServiceError(`service unreachable: ${(error as Error).message}`);
    }
    const body = await response.json().catch(() => ({}));
    if (!response.ok) {
      const detail = (body as { error?: string }).error ?? response.statusText;
      throw new ServiceError(detail, response.status);
    }
    return body as CalibrateResponse;
  }

  async productionPreset(): Promise<unknown> {
    let response: Response;
    try {
      response = await this.fetchFn(`${this.baseUrl}/api/preset/production`);
    } catch (error) {
      throw new ServiceError(`service unreachable: ${(error as Error).message}`);
    }
    if (!response.ok) {
      throw new ServiceError(response.statusText, response.status);
    }
    return response.json();
  }
}

/**
 * Serializes recomputation: submitting a new request aborts and supersedes
 * any in-flight one. Superseded submissions resolve to null.
 */
export class RecomputeQueue {
  private generation = 0;
  private controller: AbortController | null = null;

  constructor(private readonly client: CalibrationClient) {}

  async submit(request: CalibrateRequest): Promise<CalibrateResponse | null> {
    this.generation += 1;
    const mine = this.generation;
    this.controller?.abort();
    this.controller = new AbortController();
    try {
      const response = await this.client.calibrate(
        request,
        this.controller.signal,
      );
      return mine === this.generation ? response : null;
    } catch (error) {
      if (mine !== this.generation) return null; // superseded; swallow
      throw error;
    }
  }
}
