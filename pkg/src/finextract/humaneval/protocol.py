"""Human-evaluation protocol: sampling, blinded manifests, ratings, aggregation.

Storage is file-based for auditability: a blinded manifest JSONL served to
annotators, a separate de-blinding key file that never reaches the browser,
and an append-only ratings JSONL.
"""
from __future__ import annotations

import json
import random
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from ..corpus.types import Dataset, Instance
from ..errors import DegenerateInputError, DuplicateRatingError, SpecificationError
from ..structout import Prediction

SYSTEM_LABELS = ("A", "B")
MIN_SCORE, MAX_SCORE = 1, 5

SCORE_ANCHORS = {
    5: "Perfect",
    4: "Good, minor errors",
    3: "Acceptable, some errors",
    2: "Poor, many errors",
    1: "Completely Wrong",
}


def sample_instances(dataset: Dataset, n: int, seed: int) -> list[Instance]:
    """Uniform sample without replacement, deterministic in seed."""
    instances = list(dataset)
    if n > len(instances):
        raise ValueError(f"cannot sample {n} from {len(instances)} instances")
    rng = random.Random(seed)
    rng.shuffle(instances)
    return instances[:n]


@dataclass
class EvalSample:
    """One blinded side-by-side comparison served to annotators."""

    sample_id: str
    instance_id: str
    text: str
    event_type: str
    outputs: dict[str, list[dict]]  # blinded label -> entity records

    def to_record(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "instance_id": self.instance_id,
            "text": self.text,
            "event_type": self.event_type,
            "outputs": self.outputs,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "EvalSample":
        return cls(
            sample_id=rec["sample_id"], instance_id=rec["instance_id"],
            text=rec["text"], event_type=rec["event_type"],
            outputs=rec["outputs"],
        )


def build_manifest(dataset: Dataset, predictions: dict[str, list[Prediction]],
                   n: int, seed: int) -> tuple[list[EvalSample], dict[str, dict[str, str]]]:
    """Sample n instances and blind the two systems' outputs per sample.

    predictions maps system name -> prediction list covering the dataset.
    Returns (manifest, key) where key maps sample_id -> {label: system}.
    The blinding coin flips derive from the same seed as the sample.
    """
    systems = sorted(predictions)
    if len(systems) != 2:
        raise SpecificationError(
            f"manifest needs exactly two systems, got {systems}"
        )
    by_id = {
        name: {p.instance_id: p for p in preds}
        for name, preds in predictions.items()
    }
    sampled = sample_instances(dataset, n, seed)
    rng = random.Random(seed + 1)

    manifest: list[EvalSample] = []
    key: dict[str, dict[str, str]] = {}
    for i, inst in enumerate(sampled):
        sample_id = f"s{i:04d}"
        first, second = systems if rng.random() < 0.5 else systems[::-1]
        key[sample_id] = {"A": first, "B": second}
        outputs = {}
        for label, system in key[sample_id].items():
            pred = by_id[system].get(inst.id)
            if pred is None:
                raise SpecificationError(
                    f"system {system!r} has no prediction for {inst.id!r}"
                )
            outputs[label] = [e.to_record() for e in pred.parsed.entities]
        manifest.append(EvalSample(
            sample_id=sample_id, instance_id=inst.id, text=inst.text,
            event_type=inst.event_type.value, outputs=outputs,
        ))
    return manifest, key


def save_manifest(manifest: Sequence[EvalSample], key: dict, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with (out_dir / "manifest.jsonl").open("w", encoding="utf-8") as fh:
        for sample in manifest:
            fh.write(json.dumps(sample.to_record(), ensure_ascii=False,
                                separators=(",", ":")) + "\n")
    (out_dir / "key.json").write_text(
        json.dumps(key, indent=2, sort_keys=True), encoding="utf-8"
    )


def load_manifest(out_dir) -> tuple[list[EvalSample], dict]:
    out_dir = Path(out_dir)
    manifest = []
    for line in (out_dir / "manifest.jsonl").read_text(encoding="utf-8").splitlines():
        if line.strip():
            manifest.append(EvalSample.from_record(json.loads(line)))
    key = json.loads((out_dir / "key.json").read_text(encoding="utf-8"))
    return manifest, key


@dataclass
class RatingRecord:
    sample_id: str
    annotator_id: str
    system_label: str
    score: int
    ts: float = 0.0

    def validate(self) -> None:
        if self.system_label not in SYSTEM_LABELS:
            raise ValueError(f"system_label must be one of {SYSTEM_LABELS}")
        if not isinstance(self.score, int) or isinstance(self.score, bool) \
                or not MIN_SCORE <= self.score <= MAX_SCORE:
            raise ValueError(
                f"score must be an integer in [{MIN_SCORE}, {MAX_SCORE}], "
                f"got {self.score!r}"
            )
        if not self.sample_id or not self.annotator_id:
            raise ValueError("sample_id and annotator_id are required")

    def to_record(self) -> dict:
        return {
            "sample_id": self.sample_id, "annotator_id": self.annotator_id,
            "system_label": self.system_label, "score": self.score,
            "ts": self.ts,
        }


class RatingStore:
    """Append-only JSONL rating store with (sample, annotator, system) uniqueness.

    Writes are serialized through a lock; concurrent annotators are safe.
    """

    def __init__(self, path, sample_ids: Optional[set[str]] = None):
        self.path = Path(path)
        self.sample_ids = sample_ids
        self._lock = threading.Lock()
        self._seen: set[tuple[str, str, str]] = set()
        self._ratings: list[RatingRecord] = []
        if self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    rec = json.loads(line)
                    rating = RatingRecord(**rec)
                    self._ratings.append(rating)
                    self._seen.add(self._key(rating))

    @staticmethod
    def _key(rating: RatingRecord) -> tuple[str, str, str]:
        return (rating.sample_id, rating.annotator_id, rating.system_label)

    def record(self, rating: RatingRecord) -> None:
        rating.validate()
        if self.sample_ids is not None and rating.sample_id not in self.sample_ids:
            raise ValueError(f"unknown sample_id {rating.sample_id!r}")
        with self._lock:
            if self._key(rating) in self._seen:
                raise DuplicateRatingError(
                    f"rating already recorded for sample={rating.sample_id} "
                    f"annotator={rating.annotator_id} system={rating.system_label}"
                )
            if rating.ts == 0.0:
                rating.ts = time.time()
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(rating.to_record(), separators=(",", ":"))
                         + "\n")
            self._ratings.append(rating)
            self._seen.add(self._key(rating))

    def ratings(self) -> list[RatingRecord]:
        with self._lock:
            return list(self._ratings)

    def ratings_for_annotator(self, annotator_id: str) -> list[RatingRecord]:
        return [r for r in self.ratings() if r.annotator_id == annotator_id]


@dataclass
class SystemStats:
    average: float
    pct_ge4: float
    n_ratings: int

    def to_dict(self) -> dict:
        return {"average": self.average, "pct_ge4": self.pct_ge4,
                "n_ratings": self.n_ratings}


@dataclass
class HumanEvalReport:
    systems: dict[str, SystemStats]
    per_annotator: dict[str, dict[str, int]]
    n_samples_rated: int

    def to_dict(self) -> dict:
        return {
            "systems": {k: v.to_dict() for k, v in self.systems.items()},
            "per_annotator": self.per_annotator,
            "n_samples_rated": self.n_samples_rated,
        }


def aggregate(store: RatingStore, key: dict[str, dict[str, str]]
              ) -> HumanEvalReport:
    """De-blinded per-system average score and share of ratings >= 4.

    Also reports per-annotator rating counts so coverage gaps are visible.
    """
    ratings = store.ratings()
    if not ratings:
        raise DegenerateInputError("no ratings recorded")

    per_system: dict[str, list[int]] = {}
    per_annotator: dict[str, dict[str, int]] = {}
    rated_samples: set[str] = set()
    for rating in ratings:
        system = key[rating.sample_id][rating.system_label]
        per_system.setdefault(system, []).append(rating.score)
        counts = per_annotator.setdefault(rating.annotator_id, {})
        counts[system] = counts.get(system, 0) + 1
        rated_samples.add(rating.sample_id)

    systems = {}
    for system, scores in sorted(per_system.items()):
        n = len(scores)
        systems[system] = SystemStats(
            average=round(sum(scores) / n, 2),
            pct_ge4=round(100.0 * sum(1 for s in scores if s >= 4) / n, 1),
            n_ratings=n,
        )
    return HumanEvalReport(systems=systems, per_annotator=per_annotator,
                           n_samples_rated=len(rated_samples))
