export class AnnotationFlow {
    constructor(api, annotatorId) {
        this.api = api;
        this.annotatorId = annotatorId;
        this.order = [];
    }
    async start() {
        const listing = await this.api.listSamples(this.annotatorId);
        this.order = listing.map((s) => s.sample_id);
        return this.advance();
    }
    /** Move to the first sample this annotator has not fully rated. */
    async advance() {
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
    async rate(sampleId, label, score) {
        return this.api.submitRating({
            sample_id: sampleId,
            annotator_id: this.annotatorId,
            system_label: label,
            score,
        });
    }
    /** Rate both panels of one sample, returning per-label outcomes. */
    async rateBoth(sampleId, scores) {
        return {
            A: await this.rate(sampleId, 'A', scores.A),
            B: await this.rate(sampleId, 'B', scores.B),
        };
    }
    retryPending() {
        return this.api.retryPending();
    }
}
