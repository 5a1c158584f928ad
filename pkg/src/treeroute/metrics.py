"""Multi-label metrics, depth-stratified cost reporting, and dominance analysis.

Accuracy metrics follow the usual multi-label conventions: subset accuracy
is exact set equality, micro-F1 pools true/false positives over all
queries, macro-F1 averages per-class F1 over the whole catalog and scores
classes absent from both predictions and gold as perfect (configurable).
The depth report stratifies traces by exploration depth and recombines
the strata as a share-weighted average, except micro-F1 which is always
recomputed globally because it does not decompose over strata.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .pipeline import QueryTrace

LabelSets = Sequence[frozenset[str] | set[str]]


def _check_paired(predictions: LabelSets, golds: LabelSets) -> None:
    if len(predictions) != len(golds):
        raise ValueError(
            f"got {len(predictions)} predictions for {len(golds)} gold sets"
        )
    if not predictions:
        raise ValueError("metrics need at least one query")


def subset_accuracy(predictions: LabelSets, golds: LabelSets) -> float:
    """Fraction of queries whose predicted set equals the gold set exactly."""
    _check_paired(predictions, golds)
    exact = sum(1 for p, g in zip(predictions, golds) if set(p) == set(g))
    return exact / len(predictions)


def micro_f1(predictions: LabelSets, golds: LabelSets) -> float:
    """Pooled F1 over all label decisions; 1.0 when nothing was expected."""
    _check_paired(predictions, golds)
    tp = fp = fn = 0
    for predicted, gold in zip(predictions, golds):
        predicted, gold = set(predicted), set(gold)
        tp += len(predicted & gold)
        fp += len(predicted - gold)
        fn += len(gold - predicted)
    denominator = 2 * tp + fp + fn
    return 1.0 if denominator == 0 else 2 * tp / denominator


def macro_f1(
    predictions: LabelSets,
    golds: LabelSets,
    catalog: Sequence[str],
    zero_support: str = "one",
) -> float:
    """Mean per-class F1 over the catalog.

    zero_support controls classes with no gold and no predicted examples:
    "one" scores them 1.0, "exclude" drops them from the mean.
    """
    _check_paired(predictions, golds)
    if not catalog:
        raise ValueError("macro F1 needs a nonempty catalog")
    if zero_support not in ("one", "exclude"):
        raise ValueError(f"zero_support must be 'one' or 'exclude', got {zero_support!r}")
    scores = []
    for label in catalog:
        tp = fp = fn = 0
        for predicted, gold in zip(predictions, golds):
            hit, want = label in predicted, label in gold
            tp += hit and want
            fp += hit and not want
            fn += want and not hit
        if tp == fp == fn == 0:
            if zero_support == "one":
                scores.append(1.0)
            continue
        scores.append(2 * tp / (2 * tp + fp + fn))
    return sum(scores) / len(scores) if scores else 1.0


def weighted_average(shares: Sequence[float], values: Sequence[float]) -> float:
    """Share-weighted mean; shares must be non-negative and sum to ~1."""
    if len(shares) != len(values):
        raise ValueError(f"got {len(shares)} shares for {len(values)} values")
    if not shares:
        raise ValueError("weighted average needs at least one bucket")
    if any(s < 0 for s in shares):
        raise ValueError("shares must be non-negative")
    total = sum(shares)
    if abs(total - 1.0) > 1e-6:
        raise ValueError(f"shares must sum to 1, got {total!r}")
    return sum(s * v for s, v in zip(shares, values))


@dataclass(frozen=True)
class DepthBucket:
    depth: int
    query_count: int
    query_share: float
    subset_accuracy: float
    micro_f1: float
    mean_latency_ms: float
    mean_prompt_tokens: float
    mean_total_calls: float

    def as_dict(self) -> dict:
        return {
            "depth": self.depth,
            "query_count": self.query_count,
            "query_share": self.query_share,
            "subset_accuracy": self.subset_accuracy,
            "micro_f1": self.micro_f1,
            "mean_latency_ms": self.mean_latency_ms,
            "mean_prompt_tokens": self.mean_prompt_tokens,
            "mean_total_calls": self.mean_total_calls,
        }


@dataclass(frozen=True)
class DepthReport:
    buckets: tuple[DepthBucket, ...]
    weighted: DepthBucket

    def as_dict(self) -> dict:
        return {
            "buckets": [b.as_dict() for b in self.buckets],
            "weighted": self.weighted.as_dict(),
        }


def _bucket(
    depth: int,
    total: int,
    traces: Sequence[QueryTrace],
    golds: Mapping[str, frozenset[str] | set[str]],
) -> DepthBucket:
    predictions = [set(t.predicted_intents) for t in traces]
    gold_sets = [set(golds[t.query_id]) for t in traces]
    n = len(traces)
    return DepthBucket(
        depth=depth,
        query_count=n,
        query_share=n / total,
        subset_accuracy=subset_accuracy(predictions, gold_sets),
        micro_f1=micro_f1(predictions, gold_sets),
        mean_latency_ms=sum(t.ledger.latency_ms for t in traces) / n,
        mean_prompt_tokens=sum(t.ledger.prompt_tokens for t in traces) / n,
        mean_total_calls=sum(t.ledger.total_calls for t in traces) / n,
    )


def depth_report(
    traces: Sequence[QueryTrace],
    golds: Mapping[str, frozenset[str] | set[str]],
) -> DepthReport:
    """Stratify traces by depth and recombine share-weighted.

    Per-query-mean columns reconstruct exactly from the strata; micro-F1 in
    the weighted row is recomputed over all traces instead.
    """
    if not traces:
        raise ValueError("depth report needs at least one trace")
    missing = [t.query_id for t in traces if t.query_id not in golds]
    if missing:
        raise ValueError(f"no gold labels for queries: {', '.join(missing[:5])}")
    by_depth: dict[int, list[QueryTrace]] = {}
    for trace in traces:
        by_depth.setdefault(trace.depth, []).append(trace)
    total = len(traces)
    buckets = tuple(
        _bucket(depth, total, by_depth[depth], golds) for depth in sorted(by_depth)
    )
    shares = [b.query_share for b in buckets]
    weighted = DepthBucket(
        depth=-1,
        query_count=total,
        query_share=1.0,
        subset_accuracy=weighted_average(shares, [b.subset_accuracy for b in buckets]),
        micro_f1=micro_f1(
            [set(t.predicted_intents) for t in traces],
            [set(golds[t.query_id]) for t in traces],
        ),
        mean_latency_ms=weighted_average(shares, [b.mean_latency_ms for b in buckets]),
        mean_prompt_tokens=weighted_average(
            shares, [b.mean_prompt_tokens for b in buckets]
        ),
        mean_total_calls=weighted_average(shares, [b.mean_total_calls for b in buckets]),
    )
    return DepthReport(buckets=buckets, weighted=weighted)


@dataclass(frozen=True)
class ParetoPoint:
    """A labeled system: accuracy axes to maximize, cost axes to minimize."""

    label: str
    accuracy_axes: Mapping[str, float]
    cost_axes: Mapping[str, float]


def dominates(a: ParetoPoint, b: ParetoPoint) -> bool:
    """True when a is at least as good everywhere and better somewhere."""
    at_least_as_good = all(
        a.accuracy_axes[k] >= b.accuracy_axes[k] for k in a.accuracy_axes
    ) and all(a.cost_axes[k] <= b.cost_axes[k] for k in a.cost_axes)
    strictly_better = any(
        a.accuracy_axes[k] > b.accuracy_axes[k] for k in a.accuracy_axes
    ) or any(a.cost_axes[k] < b.cost_axes[k] for k in a.cost_axes)
    return at_least_as_good and strictly_better


def pareto_frontier(points: Sequence[ParetoPoint]) -> list[ParetoPoint]:
    """Non-dominated points, in input order."""
    if not points:
        raise ValueError("pareto frontier needs at least one point")
    accuracy_keys = set(points[0].accuracy_axes)
    cost_keys = set(points[0].cost_axes)
    for point in points[1:]:
        if set(point.accuracy_axes) != accuracy_keys or set(point.cost_axes) != cost_keys:
            raise ValueError(f"point {point.label!r} has mismatched axes")
    return [
        p
        for p in points
        if not any(dominates(q, p) for q in points if q is not p)
    ]
