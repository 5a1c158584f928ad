"""Query routing: pick an execution path and an exploration depth.

Queries with a conjunction or comparison marker always take the tree path;
the rest split on the complexity index into a simple path (below the
threshold) or a hybrid path (at or above it, still depth 0). Tree-path
queries get a depth of 1 to 3 from a semantic level assessment.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

from .errors import RoutingError
from .signals import (
    QciWeights,
    SignalLexicons,
    SignalVector,
    TokenizedQuery,
    compute_qci,
    extract_signals,
)

DEFAULT_TAU_SIMPLE = 0.10
MAX_DEPTH = 3


class RouteMode(Enum):
    SIMPLE = "simple"
    HYBRID = "hybrid"
    TREE = "tree"


class SemanticLevel(Enum):
    LOW = "low"
    MID = "mid"
    HIGH = "high"


DEPTH_BY_LEVEL = {
    SemanticLevel.LOW: 1,
    SemanticLevel.MID: 2,
    SemanticLevel.HIGH: 3,
}

# (query text, context snippets, initial mode, complexity index) -> level
LevelAssessor = Callable[[str, Sequence[str], "RouteMode", float], SemanticLevel]


@dataclass(frozen=True)
class RoutingDecision:
    mode: RouteMode
    qci: float
    signals: SignalVector
    level: SemanticLevel | None
    depth: int


def route(
    signals: SignalVector, qci: float, tau_simple: float = DEFAULT_TAU_SIMPLE
) -> RouteMode:
    """Total routing rule over the signal vector and complexity index.

    A conjunction or comparison marker forces the tree path regardless of
    the index value; the comparison with the threshold is strict, so a
    query sitting exactly on it is hybrid, not simple.
    """
    if signals.conjunction or signals.comparison:
        return RouteMode.TREE
    if qci < tau_simple:
        return RouteMode.SIMPLE
    return RouteMode.HYBRID


def assign_depth(mode: RouteMode, level: SemanticLevel | None = None) -> int:
    """Map (mode, level) to exploration depth; only tree mode takes a level."""
    if mode is RouteMode.TREE:
        if level is None:
            raise ValueError("tree mode requires a semantic level")
        return DEPTH_BY_LEVEL[level]
    if level is not None:
        raise ValueError(f"{mode.value} mode does not take a semantic level")
    return 0


def decide(
    query: TokenizedQuery,
    context_snippets: Sequence[str],
    assessor: LevelAssessor,
    *,
    lexicons: SignalLexicons = SignalLexicons(),
    weights: QciWeights = QciWeights(),
    tau_simple: float = DEFAULT_TAU_SIMPLE,
) -> RoutingDecision:
    """Full routing pass: signals, index, mode, and depth.

    The level assessor is consulted exactly once and only for tree-mode
    queries; simple and hybrid queries never touch a backend here.
    """
    signals = extract_signals(query, lexicons)
    qci = compute_qci(signals, weights)
    mode = route(signals, qci, tau_simple)
    level: SemanticLevel | None = None
    if mode is RouteMode.TREE:
        try:
            level = assessor(query.raw_text, context_snippets, mode, qci)
        except Exception as exc:
            raise RoutingError(f"level assessment failed: {exc}") from exc
    depth = assign_depth(mode, level)
    return RoutingDecision(mode=mode, qci=qci, signals=signals, level=level, depth=depth)
