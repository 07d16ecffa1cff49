"""HTTP API for the annotation UI.

Every payload served to the browser is blinded: system outputs appear only
under the labels "A"/"B", and the de-blinding key never leaves the server.
The aggregate report endpoint is disabled unless explicitly allowed, so
annotators cannot watch running results.
"""
from __future__ import annotations

from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from ..errors import DuplicateRatingError
from .protocol import (SCORE_ANCHORS, RatingRecord, RatingStore, aggregate,
                       load_manifest)


class RatingIn(BaseModel):
    sample_id: str
    annotator_id: str
    system_label: str
    score: int


def create_app(run_dir, allow_report: bool = False,
               static_dir: Optional[str] = None) -> FastAPI:
    run_dir = Path(run_dir)
    manifest, key = load_manifest(run_dir)
    by_id = {s.sample_id: s for s in manifest}
    store = RatingStore(run_dir / "ratings.jsonl",
                        sample_ids=set(by_id))

    app = FastAPI(title="finextract human evaluation")

    @app.get("/api/anchors")
    def anchors():
        return {str(k): v for k, v in SCORE_ANCHORS.items()}

    @app.get("/api/samples")
    def list_samples(annotator: str = Query(...)):
        rated = {
            (r.sample_id, r.system_label)
            for r in store.ratings_for_annotator(annotator)
        }
        return [
            {
                "sample_id": s.sample_id,
                "rated": {
                    label: (s.sample_id, label) in rated for label in ("A", "B")
                },
            }
            for s in manifest
        ]

    @app.get("/api/samples/{sample_id}")
    def get_sample(sample_id: str, annotator: str = Query(...)):
        sample = by_id.get(sample_id)
        if sample is None:
            raise HTTPException(status_code=404, detail="unknown sample")
        own = {
            r.system_label: r.score
            for r in store.ratings_for_annotator(annotator)
            if r.sample_id == sample_id
        }
        return {**sample.to_record(), "own_ratings": own}

    @app.post("/api/ratings", status_code=201)
    def post_rating(rating: RatingIn):
        record = RatingRecord(
            sample_id=rating.sample_id, annotator_id=rating.annotator_id,
            system_label=rating.system_label, score=rating.score,
        )
        try:
            store.record(record)
        except DuplicateRatingError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return {"status": "recorded"}

    @app.get("/api/progress")
    def progress(annotator: str = Query(...)):
        own = store.ratings_for_annotator(annotator)
        complete = {
            s.sample_id
            for s in manifest
            if {r.system_label for r in own if r.sample_id == s.sample_id}
            >= {"A", "B"}
        }
        return {"rated": len(complete), "total": len(manifest)}

    @app.get("/api/report")
    def report():
        if not allow_report:
            raise HTTPException(
                status_code=403,
                detail="report endpoint disabled; restart with --allow-report",
            )
        try:
            return JSONResponse(aggregate(store, key).to_dict())
        except Exception as exc:
            raise HTTPException(status_code=409, detail=str(exc))

    if static_dir:
        app.mount("/", StaticFiles(directory=static_dir, html=True),
                  name="ui")
    return app
