/**
 * Typed client for the gateway's audit routes. The UI talks to the server
 * exclusively through this module — no direct file access, no other routes.
 */

export type Grade = 'High' | 'Moderate' | 'Low';

/** Selector order mirrors the grading scale, best first. */
export const GRADES: readonly Grade[] = ['High', 'Moderate', 'Low'];

/** Server-side key order for histograms and CSV rows, worst first. */
export const GRADES_ASCENDING: readonly Grade[] = ['Low', 'Moderate', 'High'];

export function isGrade(value: unknown): value is Grade {
  return value === 'High' || value === 'Moderate' || value === 'Low';
}

/** Source text, its translation, and the translation translated back. */
export interface TextTriple {
  source: string;
  translated: string;
  double_translated: string;
}

export interface AuditItem {
  record_id: string;
  question: TextTriple;
  answer: TextTriple;
}

export type NextItem =
  | { kind: 'item'; item: AuditItem; remaining: number }
  | { kind: 'exhausted' };

export interface AnnotationSubmission {
  record_id: string;
  annotator_id: string;
  question_grade: Grade;
  answer_grade: Grade;
  note?: string;
}

export interface HistogramCell {
  count: number;
  fraction: number;
}

/**
 * Quality matrix exactly as the server reports it. Nested keys are
 * [question grade][answer grade], ascending (Low, Moderate, High). The UI
 * renders these values verbatim and never recomputes statistics.
 */
export interface MatrixPayload {
  n: number;
  joint_counts: Record<Grade, Record<Grade, number>>;
  joint_fractions: Record<Grade, Record<Grade, number>>;
  question_histogram: Record<Grade, HistogramCell>;
  answer_histogram: Record<Grade, HistogramCell>;
  usable_fraction: number;
  unsuitable_fraction: number;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
    this.name = 'ApiError';
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function detailOf(response: Response): Promise<string> {
  try {
    const body = (await response.json()) as { detail?: unknown };
    if (typeof body.detail === 'string') return body.detail;
    return JSON.stringify(body.detail ?? body);
  } catch {
    return response.statusText || 'request failed';
  }
}

/** What the UI needs from the server; AuditClient is the HTTP implementation. */
export interface AuditApi {
  next(annotatorId: string): Promise<NextItem>;
  submit(annotation: AnnotationSubmission): Promise<{ id: number }>;
  matrix(): Promise<MatrixPayload | null>;
}

export class AuditClient implements AuditApi {
  private readonly fetchFn: FetchLike;

  constructor(
    private readonly baseUrl: string = '',
    fetchFn?: FetchLike,
  ) {
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  /**
   * Next ungraded item for this annotator. A 404 marked "exhausted" is the
   * normal end of the sample, not an error.
   */
  async next(annotatorId: string): Promise<NextItem> {
    const url = `${this.baseUrl}/audit/next?annotator=${encodeURIComponent(annotatorId)}`;
    const response = await this.fetchFn(url);
    if (response.status === 404) {
      const detail = await detailOf(response);
      if (detail.includes('exhausted')) return { kind: 'exhausted' };
      throw new ApiError(404, detail);
    }
    if (!response.ok) {
      throw new ApiError(response.status, await detailOf(response));
    }
    const body = (await response.json()) as AuditItem & { remaining: number };
    const { remaining, ...item } = body;
    return { kind: 'item', item, remaining };
  }

  /** Submit one graded pair. Resubmitting a record overwrites server-side. */
  async submit(annotation: AnnotationSubmission): Promise<{ id: number }> {
    const response = await this.fetchFn(`${this.baseUrl}/audit/annotation`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(annotation),
    });
    if (!response.ok) {
      throw new ApiError(response.status, await detailOf(response));
    }
    return (await response.json()) as { id: number };
  }

  /** Current quality matrix, or null before the first annotation exists. */
  async matrix(): Promise<MatrixPayload | null> {
    const response = await this.fetchFn(`${this.baseUrl}/audit/matrix`);
    if (response.status === 404) return null;
    if (!response.ok) {
      throw new ApiError(response.status, await detailOf(response));
    }
    return (await response.json()) as MatrixPayload;
  }
}
