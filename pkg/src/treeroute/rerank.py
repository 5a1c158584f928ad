"""Evidence consolidation: deduplicate, rescore once, select.

Tree expansion hands over a pool of per-node survivors that usually
overlaps heavily. The pool is deduplicated first (exact text after
normalization, then near-duplicates by embedding cosine), rescored with a
single batched reranker call against the original query, and reduced to a
bounded evidence set by rank and score floor.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from .embeddings import EmbeddingProvider
from .errors import BackendError
from .vectorstore import ScoredPassage, cosine

# (original query, candidates) -> one score per candidate in [0, 1]
Reranker = Callable[[str, Sequence[ScoredPassage]], Sequence[float]]


@dataclass(frozen=True)
class DedupPolicy:
    near_dup_threshold: float = 0.95

    def __post_init__(self) -> None:
        if not 0.0 < self.near_dup_threshold <= 1.0:
            raise ValueError(
                f"near_dup_threshold must be in (0, 1], got {self.near_dup_threshold}"
            )


@dataclass(frozen=True)
class SelectionRule:
    """Keep the union of the top ranks and everything above the floor."""

    top_rank: int = 10
    score_floor: float = 0.70
    cap: int = 10
    floor_strict: bool = False

    def __post_init__(self) -> None:
        if self.top_rank < 1:
            raise ValueError(f"top_rank must be >= 1, got {self.top_rank}")
        if not 0.0 <= self.score_floor <= 1.0:
            raise ValueError(f"score_floor must be in [0, 1], got {self.score_floor}")
        if self.cap < self.top_rank:
            raise ValueError(
                f"cap must be >= top_rank, got cap={self.cap} top_rank={self.top_rank}"
            )


@dataclass
class ConsolidationResult:
    evidence: list[ScoredPassage]
    reranker_calls: int
    deduped_count: int


def normalize_text(text: str) -> str:
    return " ".join(text.lower().split())


def _ranked(candidates: Sequence[ScoredPassage]) -> list[ScoredPassage]:
    return sorted(candidates, key=lambda c: (-c.score, c.passage.id))


def deduplicate(
    candidates: Sequence[ScoredPassage],
    policy: DedupPolicy,
    embedder: EmbeddingProvider,
) -> list[ScoredPassage]:
    """Merge exact and near duplicates, keeping the better-scored copy.

    Candidates are processed in descending score order (ties by id), so
    the survivor of every merge is the highest-scored member and the
    result is already ranked. Applying this twice changes nothing.
    """
    kept: list[ScoredPassage] = []
    kept_embeddings = []
    seen_text: set[str] = set()
    for candidate in _ranked(candidates):
        normalized = normalize_text(candidate.passage.text)
        if normalized in seen_text:
            continue
        embedding = embedder.embed(candidate.passage.text)
        if any(
            cosine(embedding, other) >= policy.near_dup_threshold
            for other in kept_embeddings
        ):
            continue
        seen_text.add(normalized)
        kept.append(candidate)
        kept_embeddings.append(embedding)
    return kept


def global_rescore(
    original_query: str,
    candidates: Sequence[ScoredPassage],
    reranker: Reranker,
    warnings: list[str] | None = None,
) -> tuple[list[ScoredPassage], int]:
    """Rescore all candidates in one batched call.

    If the reranker fails outright, retrieval cosines clamped to [0, 1]
    stand in so consolidation still completes. Returns the rescored list
    and the number of reranker calls made (0 for an empty pool, else 1).
    """
    if not candidates:
        return [], 0
    try:
        scores = list(reranker(original_query, candidates))
    except BackendError as exc:
        if warnings is not None:
            warnings.append(f"reranker failed, falling back to retrieval scores: {exc}")
        scores = [min(max(c.score, 0.0), 1.0) for c in candidates]
        return (
            [ScoredPassage(c.passage, s, source="rerank") for c, s in zip(candidates, scores)],
            1,
        )
    if len(scores) != len(candidates):
        raise ValueError(
            f"reranker returned {len(scores)} scores for {len(candidates)} candidates"
        )
    return (
        [
            ScoredPassage(c.passage, min(max(float(s), 0.0), 1.0), source="rerank")
            for c, s in zip(candidates, scores)
        ],
        1,
    )


def select_topk(scored: Sequence[ScoredPassage], rule: SelectionRule) -> list[ScoredPassage]:
    """Union of top ranks and above-floor scores, capped, score-descending."""
    ranked = _ranked(scored)
    selected = []
    for rank, candidate in enumerate(ranked, start=1):
        above_floor = (
            candidate.score > rule.score_floor
            if rule.floor_strict
            else candidate.score >= rule.score_floor
        )
        if rank <= rule.top_rank or above_floor:
            selected.append(candidate)
    return selected[: rule.cap]


def consolidate(
    original_query: str,
    tree_evidence: Sequence[ScoredPassage],
    policy: DedupPolicy,
    rule: SelectionRule,
    embedder: EmbeddingProvider,
    reranker: Reranker,
    warnings: list[str] | None = None,
) -> ConsolidationResult:
    """Full consolidation pass over tree evidence."""
    deduped = deduplicate(tree_evidence, policy, embedder)
    rescored, calls = global_rescore(original_query, deduped, reranker, warnings)
    evidence = select_topk(rescored, rule)
    return ConsolidationResult(
        evidence=evidence, reranker_calls=calls, deduped_count=len(deduped)
    )
