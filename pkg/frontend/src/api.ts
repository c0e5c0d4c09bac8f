/** Thin typed client for the annotation service. All UI traffic goes
 * through here; nothing touches files or other transports. */

import type {
  AgreementPayload,
  AnnotationPayload,
  ItemState,
  QualityValue,
  SchemaPayload,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: unknown,
  ) {
    super(`API error ${status}: ${JSON.stringify(detail)}`);
  }

  /** Server-side validation violations, when the detail carries them. */
  violations(): string[] {
    if (Array.isArray(this.detail)) return this.detail.map(String);
    return [String(this.detail)];
  }
}

export class ConflictError extends Error {
  constructor(readonly currentVersion: number) {
    super(`stale version; server is at ${currentVersion}`);
  }
}

type FetchLike = typeof fetch;

/** The slice of the service the session layer needs; ApiClient implements
 * it over HTTP, tests implement it in memory. */
export interface AnnotationApi {
  getSchema(): Promise<SchemaPayload>;
  getRunItems(runId: string): Promise<ItemState[]>;
  getItem(ref: string): Promise<ItemState>;
  postAnnotations(
    ref: string,
    annotatorId: string,
    version: number,
    annotations: AnnotationPayload[],
  ): Promise<{ version: number }>;
  postQuality(
    ref: string,
    annotatorId: string,
    version: number,
    quality: QualityValue,
  ): Promise<{ version: number }>;
}

export class ApiClient implements AnnotationApi {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      headers: { "content-type": "application/json" },
      ...init,
    });
    const body = await response.json().catch(() => null);
    if (response.status === 409) {
      const detail = (body as { detail?: { current_version?: number } })?.detail;
      throw new ConflictError(detail?.current_version ?? -1);
    }
    if (!response.ok) {
      throw new ApiError(response.status, (body as { detail?: unknown })?.detail ?? body);
    }
    return body as T;
  }

  getSchema(): Promise<SchemaPayload> {
    return this.request("/schema");
  }

  async getRuns(): Promise<string[]> {
    const data = await this.request<{ runs: string[] }>("/runs");
    return data.runs;
  }

  async getRunItems(runId: string): Promise<ItemState[]> {
    const data = await this.request<{ items: ItemState[] }>(
      `/runs/${encodeURIComponent(runId)}/items`,
    );
    return data.items;
  }

  getItem(ref: string): Promise<ItemState> {
    return this.request(`/items/${ref}`);
  }

  postAnnotations(
    ref: string,
    annotatorId: string,
    version: number,
    annotations: AnnotationPayload[],
  ): Promise<{ version: number }> {
    return this.request(`/items/${ref}/annotations`, {
      method: "POST",
      body: JSON.stringify({ annotator_id: annotatorId, version, annotations }),
    });
  }

  postQuality(
    ref: string,
    annotatorId: string,
    version: number,
    quality: QualityValue,
  ): Promise<{ version: number }> {
    return this.request(`/items/${ref}/quality`, {
      method: "POST",
      body: JSON.stringify({ annotator_id: annotatorId, version, quality }),
    });
  }

  getAgreement(runId: string): Promise<AgreementPayload> {
    return this.request(`/agreement?run=${encodeURIComponent(runId)}`);
  }

  async getQualityExport(runId: string): Promise<string> {
    const response = await this.fetchImpl(
      `${this.baseUrl}/export/quality?run=${encodeURIComponent(runId)}`,
    );
    if (!response.ok) throw new ApiError(response.status, await response.text());
    return response.text();
  }
}
