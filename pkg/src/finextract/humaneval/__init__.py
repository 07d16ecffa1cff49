"""Human-evaluation protocol and serving."""
from .protocol import (EvalSample, HumanEvalReport, RatingRecord, RatingStore,
                       aggregate, build_manifest, load_manifest,
                       sample_instances, save_manifest)

__all__ = [
    "EvalSample",
    "HumanEvalReport",
    "RatingRecord",
    "RatingStore",
    "aggregate",
    "build_manifest",
    "load_manifest",
    "sample_instances",
    "save_manifest",
]
