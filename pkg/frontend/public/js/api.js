export class ApiClient {
    constructor(baseUrl = '', fetchFn = fetch) {
        this.baseUrl = baseUrl;
        this.fetchFn = fetchFn;
        this.queue = [];
    }
    async getJson(path) {
        const resp = await this.fetchFn(`${this.baseUrl}${path}`);
        if (!resp.ok)
            throw new Error(`GET ${path} -> ${resp.status}`);
        return (await resp.json());
    }
    listSamples(annotator) {
        return this.getJson(`/api/samples?annotator=${encodeURIComponent(annotator)}`);
    }
    getSample(sampleId, annotator) {
        return this.getJson(`/api/samples/${encodeURIComponent(sampleId)}?annotator=${encodeURIComponent(annotator)}`);
    }
    getProgress(annotator) {
        return this.getJson(`/api/progress?annotator=${encodeURIComponent(annotator)}`);
    }
    getAnchors() {
        return this.getJson('/api/anchors');
    }
    /**
     * Submit one rating. Network failures enqueue the submission for
     * retryPending(); HTTP 409 reports a conflict.
     */
    async submitRating(rating) {
        let resp;
        try {
            resp = await this.fetchFn(`${this.baseUrl}/api/ratings`, {
                method: 'POST',
                headers: { 'Content-Type': 'application/json' },
                body: JSON.stringify(rating),
            });
        }
        catch {
            this.queue.push(rating);
            return 'queued';
        }
        if (resp.status === 409)
            return 'conflict';
        if (!resp.ok)
            throw new Error(`POST /api/ratings -> ${resp.status}`);
        return 'recorded';
    }
    pendingCount() {
        return this.queue.length;
    }
    /**
     * Re-send queued ratings. Conflicts count as delivered (the server
     * already has them); remaining network failures stay queued.
     */
    async retryPending() {
        const pending = this.queue;
        this.queue = [];
        let delivered = 0;
        for (const rating of pending) {
            const outcome = await this.submitRating(rating);
            if (outcome === 'recorded' || outcome === 'conflict')
                delivered += 1;
        }
        return delivered;
    }
}
