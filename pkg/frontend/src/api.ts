/** Typed client for the annotation service; the single source of truth. */

export interface AnnotationRecord {
  text: string;
  positions: number[];
  labels: string[];
  comment?: string;
}

export interface DocumentSummary {
  id: string;
  version: number;
  records: number;
}

export interface DocumentPayload {
  id: string;
  version: number;
  text: string;
  names: AnnotationRecord[];
}

export interface Violation {
  kind: string;
  doc_id: string;
  record_index: number | null;
  detail: string;
}

export interface Disagreement {
  doc_id: string;
  kind: "SpanOnlyInA" | "SpanOnlyInB" | "FormMismatch";
  span: [number, number];
  details: string;
}

export interface GroupLabelResult {
  id: string;
  version: number;
  applied: number[];
  skipped: number[];
}

export class ConflictError extends Error {
  constructor(public currentVersion: number) {
    super(`document changed on the server (version ${currentVersion})`);
  }
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function asJson<T>(response: Response): Promise<T> {
  const body = (await response.json()) as Record<string, unknown>;
  if (response.status === 409) {
    throw new ConflictError(Number(body["version"] ?? 0));
  }
  if (!response.ok) {
    throw new ApiError(response.status, String(body["error"] ?? response.statusText));
  }
  return body as T;
}

export class ServiceClient {
  constructor(
    private base: string,
    private fetcher: typeof fetch = fetch,
  ) {}

  private async get<T>(path: string): Promise<T> {
    return asJson<T>(await this.fetcher(this.base + path));
  }

  private async post<T>(path: string, payload: unknown): Promise<T> {
    return asJson<T>(
      await this.fetcher(this.base + path, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(payload),
      }),
    );
  }

  listDocuments(): Promise<{ docs: DocumentSummary[] }> {
    return this.get("/docs");
  }

  getDocument(id: string): Promise<DocumentPayload> {
    return this.get(`/docs/${encodeURIComponent(id)}`);
  }

  getMask(id: string): Promise<{ text: string }> {
    return this.get(`/docs/${encodeURIComponent(id)}/mask`);
  }

  validate(id: string): Promise<{ ok: boolean; violations: Violation[] }> {
    return this.get(`/docs/${encodeURIComponent(id)}/validate`);
  }

  suggest(id: string): Promise<{ suggestions: AnnotationRecord[] }> {
    return this.post(`/docs/${encodeURIComponent(id)}/suggest`, {});
  }

  groupLabel(
    id: string,
    version: number,
    template: string,
    labels: string[],
  ): Promise<GroupLabelResult> {
    return this.post(`/docs/${encodeURIComponent(id)}/group-label`, {
      template,
      labels,
      version,
    });
  }

  save(
    id: string,
    version: number,
    names: AnnotationRecord[],
  ): Promise<{ id: string; version: number }> {
    return this.post(`/docs/${encodeURIComponent(id)}/save`, { version, names });
  }

  compare(
    docId: string,
    namesA: AnnotationRecord[],
    namesB: AnnotationRecord[],
  ): Promise<{ disagreements: Disagreement[] }> {
    return this.post("/compare", { doc_id: docId, names_a: namesA, names_b: namesB });
  }
}
