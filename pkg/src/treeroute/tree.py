"""Hierarchical query expansion with per-node retrieval and pruning.

The tree is grown breadth first from the root query: every non-pruned
node below the target depth is split into exactly two sub-queries, and
every node (the root included) retrieves candidates that are immediately
gated by the pruner. A node whose candidates are all rejected is pruned
and grows no children, so irrelevant branches die early. A node whose
decomposition fails after the retry is also marked pruned; its candidates
stay on the node so the caller can degrade gracefully when this happens
at the root.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import BackendError, DecompositionError
from .pruning import PruneResult
from .roles import ParseError
from .vectorstore import ScoredPassage, VectorStore

MAX_TREE_DEPTH = 3
ROOT_NODE_ID = "n"

# node text -> two sub-queries; raises ParseError or BackendError
Decomposer = Callable[[str], tuple[str, str]]
# (sub-query text, retrieved candidates) -> pruning result
Pruner = Callable[[str, list[ScoredPassage]], PruneResult]
# query text -> unit-norm embedding
Embedder = Callable[[str], np.ndarray]


@dataclass
class QueryNode:
    id: str
    text: str
    depth_level: int
    parent_id: str | None = None
    child_ids: list[str] = field(default_factory=list)
    candidates: list[ScoredPassage] = field(default_factory=list)
    pruned: bool = False


@dataclass
class RetrievalTree:
    root_id: str
    nodes: dict[str, QueryNode]
    max_depth: int
    judge_calls: int = 0
    decompose_calls: int = 0
    warnings: list[str] = field(default_factory=list)

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @property
    def pruned_count(self) -> int:
        return sum(1 for node in self.nodes.values() if node.pruned)

    @property
    def leaf_count(self) -> int:
        return sum(
            1 for node in self.nodes.values() if not node.pruned and not node.child_ids
        )


def decompose(node_text: str, decomposer: Decomposer, retries: int = 1) -> tuple[str, str]:
    """Split a node into two sub-queries, retrying failures once by default."""
    if not node_text:
        raise DecompositionError("cannot decompose an empty query")
    last_error: Exception | None = None
    for _ in range(1 + retries):
        try:
            return decomposer(node_text)
        except (ParseError, BackendError) as exc:
            last_error = exc
    raise DecompositionError(
        f"decomposition failed after {retries} retry: {last_error}"
    )


def expand(
    root_query: str,
    original_query: str,
    depth: int,
    *,
    store: VectorStore,
    embedder: Embedder,
    pruner: Pruner,
    decomposer: Decomposer,
    k: int = 32,
    retries: int = 1,
) -> RetrievalTree:
    """Grow the retrieval tree level by level to the requested depth.

    Nodes at each level are processed in id order, which makes the whole
    expansion deterministic for deterministic backends. original_query is
    carried only for documentation here; the pruner closure is already
    bound to its embedding.
    """
    if not 1 <= depth <= MAX_TREE_DEPTH:
        raise ValueError(f"depth must be in 1..{MAX_TREE_DEPTH}, got {depth}")
    del original_query

    tree = RetrievalTree(root_id=ROOT_NODE_ID, nodes={}, max_depth=depth)
    root = QueryNode(id=ROOT_NODE_ID, text=root_query, depth_level=0)
    tree.nodes[root.id] = root
    _retrieve_into(root, tree, store=store, embedder=embedder, pruner=pruner, k=k)

    frontier = [root.id]
    for _ in range(depth):
        next_frontier: list[str] = []
        for node_id in frontier:
            node = tree.nodes[node_id]
            if node.pruned:
                continue
            try:
                first, second = decompose(node.text, decomposer, retries)
            except DecompositionError as exc:
                # Candidates stay on the node; only expansion stops here.
                node.pruned = True
                tree.warnings.append(f"node {node.id}: {exc}")
                continue
            tree.decompose_calls += 1
            for branch, sub_query in enumerate((first, second)):
                child = QueryNode(
                    id=f"{node.id}.{branch}",
                    text=sub_query,
                    depth_level=node.depth_level + 1,
                    parent_id=node.id,
                )
                node.child_ids.append(child.id)
                tree.nodes[child.id] = child
                _retrieve_into(child, tree, store=store, embedder=embedder, pruner=pruner, k=k)
                next_frontier.append(child.id)
        frontier = next_frontier
    return tree


def _retrieve_into(
    node: QueryNode,
    tree: RetrievalTree,
    *,
    store: VectorStore,
    embedder: Embedder,
    pruner: Pruner,
    k: int,
) -> None:
    candidates = store.search(embedder(node.text), k=k)
    result = pruner(node.text, candidates)
    node.candidates = result.survivors
    tree.judge_calls += result.judge_calls
    if not node.candidates:
        node.pruned = True


def collect_evidence(tree: RetrievalTree) -> list[ScoredPassage]:
    """Candidates of all non-pruned nodes, in node id then rank order."""
    evidence: list[ScoredPassage] = []
    for node_id in sorted(tree.nodes):
        node = tree.nodes[node_id]
        if not node.pruned:
            evidence.extend(node.candidates)
    return evidence
