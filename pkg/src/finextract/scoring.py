"""Exact-match micro P/R/F1 plus facet breakdowns and the error profile.

Only exact matches (identical start/end, and identical entity type when the
prediction carries one) count as correct. Partial matches, missing gold and
spurious predictions feed the diagnostic error profile only.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from .corpus.generator import DENSITY_BINS, complexity_bin
from .corpus.types import EntitySpan, Instance
from .errors import SpecificationError

UNKNOWN_TYPE = "unknown"

FACETS = ("event_type", "entity_type", "complexity")


@dataclass(frozen=True)
class PredSpan:
    """A prediction as the scorer sees it: offsets plus optional type."""

    start: int
    end: int
    text: str = ""
    entity_type: Optional[str] = None


@dataclass
class MatchResult:
    """One instance's one-to-one alignment between gold and predictions."""

    n_gold: int
    n_pred: int
    exact_pairs: list[tuple[int, int]] = field(default_factory=list)
    partial_pairs: list[tuple[int, int]] = field(default_factory=list)
    missing: list[int] = field(default_factory=list)
    spurious: list[int] = field(default_factory=list)

    @property
    def n_exact(self) -> int:
        return len(self.exact_pairs)


def _overlap(a_start: int, a_end: int, b_start: int, b_end: int) -> int:
    return max(0, min(a_end, b_end) - max(a_start, b_start))


def match_entities(gold: Sequence[EntitySpan],
                   pred: Sequence[PredSpan]) -> MatchResult:
    """Two-phase one-to-one matching.

    Phase 1 pairs spans with identical (start, end) — and identical entity
    type when the prediction carries one — as exact. Phase 2 greedily pairs
    the remainder by descending character overlap (ties: smaller gold
    start, then smaller pred start) as partial. Leftovers are
    missing/spurious.
    """
    result = MatchResult(n_gold=len(gold), n_pred=len(pred))
    gold_free = set(range(len(gold)))
    pred_free = set(range(len(pred)))

    for gi, g in enumerate(gold):
        if gi not in gold_free:
            continue
        for pi in sorted(pred_free):
            p = pred[pi]
            if p.start == g.start and p.end == g.end and (
                p.entity_type is None
                or p.entity_type == g.entity_type.value
            ):
                result.exact_pairs.append((gi, pi))
                gold_free.discard(gi)
                pred_free.discard(pi)
                break

    candidates = []
    for gi in sorted(gold_free):
        g = gold[gi]
        for pi in sorted(pred_free):
            p = pred[pi]
            ov = _overlap(g.start, g.end, p.start, p.end)
            if ov > 0:
                candidates.append((-ov, g.start, p.start, gi, pi))
    for _, _, _, gi, pi in sorted(candidates):
        if gi in gold_free and pi in pred_free:
            result.partial_pairs.append((gi, pi))
            gold_free.discard(gi)
            pred_free.discard(pi)

    result.missing = sorted(gold_free)
    result.spurious = sorted(pred_free)
    return result


def f1(p: float, r: float) -> float:
    """Harmonic mean of precision and recall; 0 when both are 0."""
    if not (0.0 <= p <= 1.0 and 0.0 <= r <= 1.0):
        raise ValueError(f"precision/recall must lie in [0, 1], got {p}, {r}")
    if p + r == 0.0:
        return 0.0
    return 2.0 * p * r / (p + r)


def micro_scores(matches: Sequence[MatchResult]) -> tuple[float, float, float]:
    """Pooled precision, recall and F1 over a dataset's match results.

    Precision is vacuously 1.0 with zero predictions; recall is 1.0 with
    zero gold.
    """
    if not matches:
        raise ValueError("micro_scores requires at least one instance")
    n_exact = sum(m.n_exact for m in matches)
    n_pred = sum(m.n_pred for m in matches)
    n_gold = sum(m.n_gold for m in matches)
    p = n_exact / n_pred if n_pred else 1.0
    r = n_exact / n_gold if n_gold else 1.0
    return p, r, f1(p, r)


@dataclass
class FacetRow:
    precision: float
    recall: float
    f1: float
    n_gold: int
    n_pred: int
    n_exact: int

    def to_dict(self) -> dict:
        return {
            "precision": self.precision, "recall": self.recall, "f1": self.f1,
            "gold": self.n_gold, "predicted": self.n_pred, "exact": self.n_exact,
        }


def _row(n_gold: int, n_pred: int, n_exact: int) -> FacetRow:
    p = n_exact / n_pred if n_pred else 1.0
    r = n_exact / n_gold if n_gold else 1.0
    return FacetRow(precision=p, recall=r, f1=f1(p, r),
                    n_gold=n_gold, n_pred=n_pred, n_exact=n_exact)


def facet_breakdown(instances: Sequence[Instance],
                    matches: Sequence[MatchResult],
                    facet: str) -> dict[str, FacetRow]:
    """Group scores by event type, by gold entity type, or by complexity bin.

    For the entity_type facet, matched predictions inherit their gold
    partner's type; spurious predictions attribute to "unknown".
    """
    if facet not in FACETS:
        raise SpecificationError(f"unknown facet {facet!r}; choose from {FACETS}")
    if len(instances) != len(matches):
        raise SpecificationError("instances and matches must align")

    if facet in ("event_type", "complexity"):
        totals: dict[str, list[int]] = {}
        for inst, m in zip(instances, matches):
            key = (inst.event_type.value if facet == "event_type"
                   else complexity_bin(len(inst.gold)))
            t = totals.setdefault(key, [0, 0, 0])
            t[0] += m.n_gold
            t[1] += m.n_pred
            t[2] += m.n_exact
        keys = (sorted(totals) if facet == "event_type"
                else [b for b in DENSITY_BINS if b in totals])
        return {k: _row(*totals[k]) for k in keys}

    totals = {}
    for inst, m in zip(instances, matches):
        for gi, g in enumerate(inst.gold):
            totals.setdefault(g.entity_type.value, [0, 0, 0])[0] += 1
        for gi, pi in m.exact_pairs:
            t = totals.setdefault(inst.gold[gi].entity_type.value, [0, 0, 0])
            t[1] += 1
            t[2] += 1
        for gi, pi in m.partial_pairs:
            totals.setdefault(inst.gold[gi].entity_type.value, [0, 0, 0])[1] += 1
        if m.spurious:
            totals.setdefault(UNKNOWN_TYPE, [0, 0, 0])[1] += len(m.spurious)
    return {k: _row(*totals[k]) for k in sorted(totals)}


@dataclass
class ErrorProfile:
    """Percentages at one decimal place, matching the published row structure.

    exact/partial/missing are shares of total gold and are rounded with a
    largest-remainder scheme so they always sum to exactly 100.0; spurious
    is a share of total predictions.
    """

    exact_pct: float
    partial_pct: float
    missing_pct: float
    spurious_pct: float

    def to_dict(self) -> dict:
        return {
            "exact_pct": self.exact_pct, "partial_pct": self.partial_pct,
            "missing_pct": self.missing_pct, "spurious_pct": self.spurious_pct,
        }


def _largest_remainder_tenths(counts: list[int], total: int) -> list[float]:
    """Allocate 1000 tenths-of-a-percent proportionally to counts."""
    if total == 0:
        return [0.0 for _ in counts]
    raw = [c * 1000.0 / total for c in counts]
    floors = [int(x) for x in raw]
    shortfall = 1000 - sum(floors)
    order = sorted(range(len(counts)), key=lambda i: raw[i] - floors[i],
                   reverse=True)
    for i in order[:shortfall]:
        floors[i] += 1
    return [f / 10.0 for f in floors]


def error_profile(matches: Sequence[MatchResult]) -> ErrorProfile:
    n_gold = sum(m.n_gold for m in matches)
    n_pred = sum(m.n_pred for m in matches)
    n_exact = sum(m.n_exact for m in matches)
    n_partial = sum(len(m.partial_pairs) for m in matches)
    n_missing = sum(len(m.missing) for m in matches)
    n_spurious = sum(len(m.spurious) for m in matches)

    exact_pct, partial_pct, missing_pct = _largest_remainder_tenths(
        [n_exact, n_partial, n_missing], n_gold
    )
    spurious_pct = round(n_spurious * 100.0 / n_pred, 1) if n_pred else 0.0
    return ErrorProfile(exact_pct=exact_pct, partial_pct=partial_pct,
                        missing_pct=missing_pct, spurious_pct=spurious_pct)


@dataclass
class ScoreReport:
    precision: float
    recall: float
    f1: float
    n_gold: int
    n_pred: int
    n_exact: int
    facets: dict[str, dict[str, FacetRow]]
    profile: ErrorProfile

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "counts": {"gold": self.n_gold, "predicted": self.n_pred,
                       "exact": self.n_exact},
            "facets": {
                facet: {k: row.to_dict() for k, row in table.items()}
                for facet, table in self.facets.items()
            },
            "error_profile": self.profile.to_dict(),
        }


def score_dataset(instances: Sequence[Instance],
                  predictions: Sequence[Sequence[PredSpan]]) -> ScoreReport:
    """Match every instance and assemble the full report."""
    if len(instances) != len(predictions):
        raise SpecificationError(
            f"{len(instances)} instances vs {len(predictions)} predictions"
        )
    matches = [match_entities(inst.gold, pred)
               for inst, pred in zip(instances, predictions)]
    p, r, f = micro_scores(matches)
    return ScoreReport(
        precision=p, recall=r, f1=f,
        n_gold=sum(m.n_gold for m in matches),
        n_pred=sum(m.n_pred for m in matches),
        n_exact=sum(m.n_exact for m in matches),
        facets={facet: facet_breakdown(instances, matches, facet)
                for facet in FACETS},
        profile=error_profile(matches),
    )
