"""End-to-end query processing and cost instrumentation.

Three execution modes share one engine: the adaptive mode routes each
query and spends retrieval depth only where the router asks for it, the
fixed-depth mode forces a full depth-3 tree for every query, and the
standard mode is a single retrieval plus rerank. Every processed query
yields one trace with its routing fields, evidence, predictions, and an
exact per-role cost ledger; a backend failure yields a failed trace, never
a crashed batch.

Latency in a trace is wall-clock unless the run is deterministic, in
which case a synthetic per-call latency model is recorded instead so that
identical runs serialize to identical bytes.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from functools import partial
from pathlib import Path
from typing import Sequence

from .backends import (
    BackendRole,
    CallLog,
    ChatBackend,
    RemoteChatBackend,
    StubChatBackend,
    estimate_tokens,
)
from .config import EngineConfig
from .dataset import QueryRecord
from .embeddings import EmbeddingProvider, HashedBagEmbedder, RemoteEmbedder
from .errors import EngineError
from .pruning import prune
from .rerank import consolidate
from .roles import PromptLibrary, RoleRunner
from .routing import RouteMode, decide
from .signals import compute_qci, extract_signals, tokenize
from .tree import collect_evidence, expand
from .vectorstore import Passage, ScoredPassage, VectorStore, build_index

__all__ = [
    "CostLedger",
    "Engine",
    "ExecutionMode",
    "QueryTrace",
    "build_engine",
    "estimate_tokens",
    "process_query",
    "read_traces",
    "run_workload",
    "write_traces",
]


class ExecutionMode(Enum):
    ADAPTIVE = "adaptive"
    FIXED_DEPTH_3 = "fixed3"
    STANDARD_RAG = "standard"


@dataclass
class CostLedger:
    """Per-query cost summary derived from the call log."""

    calls_by_role: dict[str, int]
    total_calls: int
    prompt_tokens: int
    latency_ms: float

    def as_dict(self) -> dict:
        return {
            "calls_by_role": dict(self.calls_by_role),
            "total_calls": self.total_calls,
            "prompt_tokens": self.prompt_tokens,
            "latency_ms": self.latency_ms,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CostLedger":
        return cls(
            calls_by_role=dict(data["calls_by_role"]),
            total_calls=int(data["total_calls"]),
            prompt_tokens=int(data["prompt_tokens"]),
            latency_ms=float(data["latency_ms"]),
        )


@dataclass
class QueryTrace:
    """Everything recorded about one processed query."""

    query_id: str
    mode: str
    qci: float
    signals: dict[str, float]
    depth: int
    node_count: int
    pruned_node_count: int
    evidence: list[dict]
    predicted_intents: list[str]
    ledger: CostLedger
    warnings: list[str] = field(default_factory=list)
    error: str | None = None

    def as_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "mode": self.mode,
            "qci": self.qci,
            "signals": dict(self.signals),
            "depth": self.depth,
            "node_count": self.node_count,
            "pruned_node_count": self.pruned_node_count,
            "evidence": [dict(e) for e in self.evidence],
            "predicted_intents": list(self.predicted_intents),
            "ledger": self.ledger.as_dict(),
            "warnings": list(self.warnings),
            "error": self.error,
        }

    def to_json_line(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: dict) -> "QueryTrace":
        return cls(
            query_id=data["query_id"],
            mode=data["mode"],
            qci=float(data["qci"]),
            signals=dict(data["signals"]),
            depth=int(data["depth"]),
            node_count=int(data["node_count"]),
            pruned_node_count=int(data["pruned_node_count"]),
            evidence=[dict(e) for e in data["evidence"]],
            predicted_intents=list(data["predicted_intents"]),
            ledger=CostLedger.from_dict(data["ledger"]),
            warnings=list(data.get("warnings", [])),
            error=data.get("error"),
        )


class Engine:
    """A built index plus backends, ready to process queries."""

    def __init__(
        self,
        config: EngineConfig,
        store: VectorStore,
        embedder: EmbeddingProvider,
        backend: ChatBackend,
        runner: RoleRunner,
        intent_names: tuple[str, ...],
    ):
        self.config = config
        self.store = store
        self.embedder = embedder
        self.backend = backend
        self.runner = runner
        self.intent_names = intent_names
        self.lexicons = config.lexicons()
        self.weights = config.weights()
        self.thresholds = config.gate_thresholds()
        self.dedup_policy = config.dedup_policy()
        self.selection_rule = config.selection_rule()


def build_engine(
    config: EngineConfig,
    passages: Sequence[Passage],
    intent_names: Sequence[str] | None = None,
) -> Engine:
    """Validate config, build the index, and wire up the backends."""
    config.validate()
    if config.embed_backend == "remote":
        embedder: EmbeddingProvider = RemoteEmbedder(
            config.embed_endpoint,
            config.embed_model,
            config.store_dimension,
            config.backend_timeout_ms,
        )
    else:
        embedder = HashedBagEmbedder(config.store_dimension, config.run_seed)
    store = build_index(passages, embedder)
    if config.backend_kind == "remote":
        backend: ChatBackend = RemoteChatBackend(
            config.backend_endpoint,
            config.backend_model,
            config.backend_timeout_ms,
            config.backend_max_in_flight,
        )
    else:
        backend = StubChatBackend(config.stub_behavior())
    runner = RoleRunner(
        backend,
        PromptLibrary(config.backend_prompt_dir or None),
        model=config.backend_model or "stub",
        temperatures=config.temperatures(),
        fallback_level=config.fallback_level(),
    )
    if intent_names is None:
        names = tuple(sorted({label for p in passages for label in p.intent_labels}))
    else:
        names = tuple(intent_names)
    return Engine(
        config=config,
        store=store,
        embedder=embedder,
        backend=backend,
        runner=runner,
        intent_names=names,
    )


def process_query(
    engine: Engine,
    record: QueryRecord,
    mode: ExecutionMode = ExecutionMode.ADAPTIVE,
    force_depth: int | None = None,
) -> QueryTrace:
    """Process one query under the given mode and return its trace.

    force_depth skips routing and pins the tree depth (0 behaves like the
    simple path); the fixed-depth mode is equivalent to force_depth=3.
    """
    config = engine.config
    log = CallLog()
    warnings: list[str] = []
    retrievals = 0
    started = time.perf_counter()

    tokenized = tokenize(record.text)
    signals = extract_signals(tokenized, engine.lexicons)
    qci = compute_qci(signals, engine.weights)
    mode_value = RouteMode.SIMPLE.value
    depth = 0
    node_count = 0
    pruned_node_count = 0
    evidence: list[ScoredPassage] = []
    predicted: set[str] = set()
    error: str | None = None

    if mode is ExecutionMode.FIXED_DEPTH_3 and force_depth is None:
        force_depth = 3

    try:
        query_embedding = engine.embedder.embed(record.text)

        if mode is ExecutionMode.STANDARD_RAG:
            raw_hits = engine.store.search(query_embedding, k=config.store_k)
            retrievals += 1
            result = consolidate(
                record.text,
                raw_hits,
                engine.dedup_policy,
                engine.selection_rule,
                engine.embedder,
                lambda query, candidates: engine.runner.rerank(query, candidates, log, warnings),
                warnings,
            )
            evidence = result.evidence
        else:
            if force_depth is None:
                raw_hits = engine.store.search(query_embedding, k=config.store_k)
                retrievals += 1
                snippets = [
                    hit.passage.text for hit in raw_hits[: config.qtc_assessor_snippets]
                ]
                decision = decide(
                    tokenized,
                    snippets,
                    lambda text, snips, initial, value: engine.runner.assess_level(
                        text, snips, initial, value, log, warnings
                    ),
                    lexicons=engine.lexicons,
                    weights=engine.weights,
                    tau_simple=config.qtc_tau_simple,
                )
                mode_value = decision.mode.value
                depth = decision.depth
            else:
                depth = force_depth
                mode_value = (RouteMode.TREE if depth >= 1 else RouteMode.SIMPLE).value
                raw_hits = None
                if depth == 0:
                    raw_hits = engine.store.search(query_embedding, k=config.store_k)
                    retrievals += 1

            if depth == 0:
                evidence = list(raw_hits[: config.rrl_cap])
            else:
                def pruner(sub_query: str, candidates: list[ScoredPassage]):
                    def judge(passage: Passage, sim: float) -> bool:
                        return engine.runner.judge(
                            record.text, sub_query, passage.text, sim, log, warnings
                        )

                    return prune(
                        query_embedding,
                        candidates,
                        engine.thresholds,
                        judge,
                        embedding_of=engine.store.embedding_of,
                    )

                tree = expand(
                    record.text,
                    record.text,
                    depth,
                    store=engine.store,
                    embedder=engine.embedder.embed,
                    pruner=pruner,
                    decomposer=lambda text: engine.runner.decompose(text, log),
                    k=config.store_k,
                    retries=config.tor_retry_decompose,
                )
                retrievals += tree.node_count
                warnings.extend(tree.warnings)
                node_count = tree.node_count
                pruned_node_count = tree.pruned_count
                raw_evidence = collect_evidence(tree)
                if raw_evidence:
                    result = consolidate(
                        record.text,
                        raw_evidence,
                        engine.dedup_policy,
                        engine.selection_rule,
                        engine.embedder,
                        lambda query, candidates: engine.runner.rerank(
                            query, candidates, log, warnings
                        ),
                        warnings,
                    )
                    evidence = result.evidence
                else:
                    root = tree.nodes[tree.root_id]
                    if root.pruned and root.candidates:
                        warnings.append(
                            "root decomposition failed; using single-step evidence"
                        )
                        evidence = list(root.candidates[: config.rrl_cap])

        predicted = engine.runner.classify(
            record.text, evidence, engine.intent_names, log, warnings
        )
    except EngineError as exc:
        error = f"{record.id}: {exc}"

    elapsed_ms = (time.perf_counter() - started) * 1000.0
    if config.run_deterministic:
        latency_ms = (
            config.latency_base_ms
            + config.latency_per_retrieval_ms * retrievals
            + config.latency_per_llm_call_ms * log.total_calls
        )
    else:
        latency_ms = elapsed_ms

    ledger = CostLedger(
        calls_by_role=log.counts_by_role(),
        total_calls=log.total_calls,
        prompt_tokens=log.prompt_tokens,
        latency_ms=latency_ms,
    )
    return QueryTrace(
        query_id=record.id,
        mode=mode_value,
        qci=qci,
        signals=signals.as_dict(),
        depth=depth,
        node_count=node_count,
        pruned_node_count=pruned_node_count,
        evidence=[
            {"id": e.passage.id, "score": e.score, "source": e.source} for e in evidence
        ],
        predicted_intents=sorted(predicted),
        ledger=ledger,
        warnings=warnings,
        error=error,
    )


def run_workload(
    engine: Engine,
    records: Sequence[QueryRecord],
    mode: ExecutionMode = ExecutionMode.ADAPTIVE,
    jobs: int | None = None,
    force_depth: int | None = None,
) -> list[QueryTrace]:
    """Process a batch; output is ordered by query id however it ran."""
    if jobs is None:
        jobs = engine.config.run_jobs
    ordered = sorted(records, key=lambda r: r.id)
    worker = partial(process_query, engine, mode=mode, force_depth=force_depth)
    if jobs <= 1:
        return [worker(record) for record in ordered]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, ordered))


def write_traces(path: str | Path, traces: Sequence[QueryTrace]) -> None:
    lines = [trace.to_json_line() for trace in traces]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def read_traces(path: str | Path) -> list[QueryTrace]:
    traces = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            traces.append(QueryTrace.from_dict(json.loads(line)))
    return traces


def run_manifest(
    config: EngineConfig,
    mode: ExecutionMode,
    query_count: int,
    started_at: float,
    finished_at: float,
) -> dict:
    return {
        "mode": mode.value,
        "config_hash": config.config_hash(),
        "seed": config.run_seed,
        "deterministic": config.run_deterministic,
        "query_count": query_count,
        "started_at": started_at,
        "finished_at": finished_at,
    }


def ledger_roles() -> tuple[str, ...]:
    """Names of all ledger roles, for report headers."""
    return tuple(role.value for role in BackendRole)
