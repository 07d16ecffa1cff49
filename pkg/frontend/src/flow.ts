/**
 * Annotation flow: walk the manifest in order, skipping fully rated
 * samples, collecting one 1-5 score per system panel per sample.
 */
import { ApiClient, SubmitOutcome } from './api.js';
import type { Sample, SystemLabel } from './types.js';

export interface FlowState {
  current: Sample | null;
  position: number; // index in manifest order, -1 when done
  ratedSamples: number;
  totalSamples: number;
  pendingUploads: number;
}

export class AnnotationFlow {
  private order: string[] = [];

  constructor(
    private api: ApiClient,
    private annotatorId: string,
  ) {}

  async start(): Promise<FlowState> {
    const listing = await this.api.listSamples(this.annotatorId);
    this.order = listing.map((s) => s.sample_id);
    return this.advance();
  }

  /** Move to the first sample this annotator has not fully rated. */
  async advance(): Promise<FlowState> {
    const listing = await this.api.listSamples(this.annotatorId);
    const next = listing.find((s) => !(s.rated.A && s.rated.B));
    const progress = await this.api.getProgress(this.annotatorId);
    if (!next) {
      return {
        current: null,
        position: -1,
        ratedSamples: progress.rated,
        totalSamples: progress.total,
        pendingUploads: this.api.pendingCount(),
      };
    }
    const sample = await this.api.getSample(next.sample_id, this.annotatorId);
    return {
      current: sample,
      position: this.order.indexOf(next.sample_id),
      ratedSamples: progress.rated,
      totalSamples: progress.total,
      pendingUploads: this.api.pendingCount(),
    };
  }

  async rate(sampleId: string, label: SystemLabel, score: number):
      Promise<SubmitOutcome> {
    return this.api.submitRating({
      sample_id: sampleId,
      annotator_id: this.annotatorId,
      system_label: label,
      score,
    });
  }

  /** Rate both panels of one sample, returning per-label outcomes. */
  async rateBoth(sampleId: string, scores: { A: number; B: number }):
      Promise<Record<SystemLabel, SubmitOutcome>> {
    return {
      A: await this.rate(sampleId, 'A', scores.A),
      B: await this.rate(sampleId, 'B', scores.B),
    };
  }

  retryPending(): Promise<number> {
    return this.api.retryPending();
  }
}
