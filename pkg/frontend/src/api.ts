/**
 * Typed client for the human-evaluation HTTP API.
 *
 * Rating submissions that fail with a network error are queued and
 * retried; the server's (sample, annotator, system) uniqueness constraint
 * makes retries safe. A 409 conflict means the rating already exists
 * server-side and is surfaced as such, never silently dropped.
 */
import type { Progress, RatingSubmission, Sample, SampleListItem } from './types.js';

export type SubmitOutcome = 'recorded' | 'conflict' | 'queued';

type FetchLike = typeof fetch;

export class ApiClient {
  private queue: RatingSubmission[] = [];

  constructor(
    private baseUrl: string = '',
    private fetchFn: FetchLike = fetch,
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const resp = await this.fetchFn(`${this.baseUrl}${path}`);
    if (!resp.ok) throw new Error(`GET ${path} -> ${resp.status}`);
    return (await resp.json()) as T;
  }

  listSamples(annotator: string): Promise<SampleListItem[]> {
    return this.getJson(`/api/samples?annotator=${encodeURIComponent(annotator)}`);
  }

  getSample(sampleId: string, annotator: string): Promise<Sample> {
    return this.getJson(
      `/api/samples/${encodeURIComponent(sampleId)}?annotator=${encodeURIComponent(annotator)}`,
    );
  }

  getProgress(annotator: string): Promise<Progress> {
    return this.getJson(`/api/progress?annotator=${encodeURIComponent(annotator)}`);
  }

  getAnchors(): Promise<Record<string, string>> {
    return this.getJson('/api/anchors');
  }

  /**
   * Submit one rating. Network failures enqueue the submission for
   * retryPending(); HTTP 409 reports a conflict.
   */
  async submitRating(rating: RatingSubmission): Promise<SubmitOutcome> {
    let resp: Response;
    try {
      resp = await this.fetchFn(`${this.baseUrl}/api/ratings`, {
        method: 'POST',
        headers: { 'Content-Type': 'application/json' },
        body: JSON.stringify(rating),
      });
    } catch {
      this.queue.push(rating);
      return 'queued';
    }
    if (resp.status === 409) return 'conflict';
    if (!resp.ok) throw new Error(`POST /api/ratings -> ${resp.status}`);
    return 'recorded';
  }

  pendingCount(): number {
    return this.queue.length;
  }

  /**
   * Re-send queued ratings. Conflicts count as delivered (the server
   * already has them); remaining network failures stay queued.
   */
  async retryPending(): Promise<number> {
    const pending = this.queue;
    this.queue = [];
    let delivered = 0;
    for (const rating of pending) {
      const outcome = await this.submitRating(rating);
      if (outcome === 'recorded' || outcome === 'conflict') delivered += 1;
    }
    return delivered;
  }
}
