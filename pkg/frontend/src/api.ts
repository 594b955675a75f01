import { z } from 'zod';
import { SketchWire } from './wire';

const matchScoreSchema = z.object({
  overlap: z.number().int().nonnegative(),
  sketch_norm: z.number().min(0).max(1),
  model_norm: z.number().min(0).max(1),
  avg: z.number().min(0).max(1),
});

const textScoreSchema = z.object({ text_score: z.number().nonnegative() });

const resultItemSchema = z.object({
  id: z.string(),
  rank: z.number().int().positive(),
  score: z.union([matchScoreSchema, textScoreSchema]),
  name: z.string(),
  thumbnail_url: z.string(),
  suggested_scale: z.number().positive().optional(),
});

const searchResponseSchema = z.object({
  results: z.array(resultItemSchema),
  sketch_extents_mm: z.tuple([z.number(), z.number(), z.number()]).optional(),
});

const labelsResponseSchema = z.object({
  labels: z.array(z.object({ term: z.string(), confidence: z.number() })),
});

const errorEnvelopeSchema = z.object({
  code: z.string(),
  message: z.string(),
  http_status: z.number().int(),
});

export type ResultItem = z.infer<typeof resultItemSchema>;
export type SearchResponse = z.infer<typeof searchResponseSchema>;
export type LabelGuess = z.infer<typeof labelsResponseSchema>['labels'][number];

export class ApiError extends Error {
  constructor(
    readonly code: string,
    message: string,
    readonly status: number,
  ) {
    super(message);
    this.name = 'ApiError';
  }
}

export function isAbort(err: unknown): boolean {
  return err instanceof DOMException && err.name === 'AbortError';
}

async function raiseEnvelope(res: Response): Promise<never> {
  let body: unknown;
  try {
    body = await res.json();
  } catch {
    throw new ApiError('bad_response', `HTTP ${res.status}`, res.status);
  }
  const parsed = errorEnvelopeSchema.safeParse(body);
  if (parsed.success) {
    throw new ApiError(parsed.data.code, parsed.data.message, parsed.data.http_status);
  }
  throw new ApiError('bad_response', `HTTP ${res.status}`, res.status);
}

// Thin client over the search service. Only one search may be in flight:
// submitting again aborts the previous request, so a slow query can never
// paint its results over a newer one.
export class Client {
  private inflightSearch: AbortController | null = null;

  constructor(
    readonly baseUrl: string = '',
    private readonly fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  private searchSignal(): AbortSignal {
    this.inflightSearch?.abort();
    this.inflightSearch = new AbortController();
    return this.inflightSearch.signal;
  }

  async searchSketch(wire: SketchWire): Promise<SearchResponse> {
    const res = await this.fetchFn(`${this.baseUrl}/search/sketch`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(wire),
      signal: this.searchSignal(),
    });
    if (!res.ok) await raiseEnvelope(res);
    return searchResponseSchema.parse(await res.json());
  }

  async searchText(term: string, limit = 24, offset = 0): Promise<SearchResponse> {
    const res = await this.fetchFn(`${this.baseUrl}/search/text`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ term, limit, offset }),
      signal: this.searchSignal(),
    });
    if (!res.ok) await raiseEnvelope(res);
    return searchResponseSchema.parse(await res.json());
  }

  async suggestLabels(image: Blob, filename = 'photo'): Promise<LabelGuess[]> {
    const form = new FormData();
    form.append('image', image, filename);
    const res = await this.fetchFn(`${this.baseUrl}/labels`, {
      method: 'POST',
      body: form,
    });
    if (!res.ok) await raiseEnvelope(res);
    return labelsResponseSchema.parse(await res.json()).labels;
  }

  async health(): Promise<{ models: number }> {
    const res = await this.fetchFn(`${this.baseUrl}/healthz`);
    if (!res.ok) await raiseEnvelope(res);
    return z.object({ models: z.number().int() }).parse(await res.json());
  }

  meshUrl(id: string): string {
    return `${this.baseUrl}/models/${encodeURIComponent(id)}/mesh`;
  }

  thumbnailUrl(id: string): string {
    return `${this.baseUrl}/models/${encodeURIComponent(id)}/thumbnail`;
  }
}
