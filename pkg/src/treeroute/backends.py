"""Chat model backends and call accounting.

Every model interaction in the engine is a single chat exchange tagged
with one of five roles. The remote backend speaks a chat-completion style
HTTP protocol; the stub backend answers each role with a deterministic
transform of the request so full runs work offline and reproduce exactly.

Requests carry both the rendered prompt messages (what a remote model
sees) and a small structured payload (what the stub keys its transform
on). The stub still answers in plain text, so response parsing is
exercised on every path.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping, Protocol, runtime_checkable

import requests

from .errors import BackendError
from .signals import DEFAULT_CONJUNCTION_TERMS, tokenize


def estimate_tokens(text: str) -> int:
    """Cheap cost proxy: character count over four, floored."""
    return len(text) // 4


class BackendRole(Enum):
    DECOMPOSER = "decomposer"
    LEVEL_ASSESSOR = "level_assessor"
    JUDGE = "judge"
    RERANKER = "reranker"
    INTENT_CLASSIFIER = "intent_classifier"


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str


@dataclass(frozen=True)
class ChatRequest:
    """One chat exchange: rendered messages plus structured stub inputs."""

    role: BackendRole
    model: str
    messages: tuple[ChatMessage, ...]
    temperature: float
    max_output_tokens: int
    payload: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("chat request needs at least one message")
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        if self.max_output_tokens < 1:
            raise ValueError(
                f"max_output_tokens must be >= 1, got {self.max_output_tokens}"
            )

    def prompt_text(self) -> str:
        return "".join(m.content for m in self.messages)


@runtime_checkable
class ChatBackend(Protocol):
    def chat(self, request: ChatRequest) -> str: ...


class CallLog:
    """Thread-safe per-role call counter with a prompt token estimate."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._counts = {role: 0 for role in BackendRole}
        self._prompt_tokens = 0

    def record(self, request: ChatRequest) -> None:
        tokens = estimate_tokens(request.prompt_text())
        with self._lock:
            self._counts[request.role] += 1
            self._prompt_tokens += tokens

    @property
    def total_calls(self) -> int:
        with self._lock:
            return sum(self._counts.values())

    @property
    def prompt_tokens(self) -> int:
        with self._lock:
            return self._prompt_tokens

    def count(self, role: BackendRole) -> int:
        with self._lock:
            return self._counts[role]

    def counts_by_role(self) -> dict[str, int]:
        with self._lock:
            return {role.value: n for role, n in self._counts.items()}


@dataclass(frozen=True)
class StubBehavior:
    """Knobs for the deterministic stub backend.

    Level bands partition the complexity index; the judge verdict is either
    fixed or a threshold on the similarity the pruner hands over.
    """

    assessor_low: float = 0.35
    assessor_high: float = 0.55
    judge_mode: str = "threshold"  # threshold | always_relevant | always_irrelevant
    judge_threshold: float = 0.5
    conjunction_terms: frozenset[str] = DEFAULT_CONJUNCTION_TERMS

    def __post_init__(self) -> None:
        if not 0.0 <= self.assessor_low <= self.assessor_high <= 1.0:
            raise ValueError(
                "assessor bands must satisfy 0 <= low <= high <= 1, got "
                f"({self.assessor_low}, {self.assessor_high})"
            )
        if self.judge_mode not in ("threshold", "always_relevant", "always_irrelevant"):
            raise ValueError(f"unknown judge_mode: {self.judge_mode}")


def stub_decompose(text: str, conjunction_terms: frozenset[str] = DEFAULT_CONJUNCTION_TERMS) -> tuple[str, str]:
    """Split text into two sub-queries; always succeeds, always distinct.

    Prefers splitting at the first conjunction token with nonempty sides,
    then falls back to a half split, then to appending disambiguators for
    texts too short to divide.
    """
    tokens = tokenize(text).tokens
    for i, token in enumerate(tokens):
        if token in conjunction_terms and 0 < i < len(tokens) - 1:
            return " ".join(tokens[:i]), " ".join(tokens[i + 1 :])
    if len(tokens) >= 2:
        mid = (len(tokens) + 1) // 2
        left, right = " ".join(tokens[:mid]), " ".join(tokens[mid:])
        if left != right:
            return left, right
    base = " ".join(tokens) if tokens else text.strip() or "query"
    return f"{base} details", f"{base} context"


class StubChatBackend:
    """Offline backend answering each role with a deterministic rule."""

    def __init__(self, behavior: StubBehavior = StubBehavior()):
        self.behavior = behavior
        self._lock = threading.Lock()
        self.calls = 0

    def chat(self, request: ChatRequest) -> str:
        with self._lock:
            self.calls += 1
        handler = {
            BackendRole.DECOMPOSER: self._decompose,
            BackendRole.LEVEL_ASSESSOR: self._assess,
            BackendRole.JUDGE: self._judge,
            BackendRole.RERANKER: self._rerank,
            BackendRole.INTENT_CLASSIFIER: self._classify,
        }[request.role]
        return handler(request.payload)

    def _decompose(self, payload: Mapping[str, Any]) -> str:
        first, second = stub_decompose(
            str(payload.get("query", "")), self.behavior.conjunction_terms
        )
        return f"1. {first}\n2. {second}"

    def _assess(self, payload: Mapping[str, Any]) -> str:
        qci = float(payload.get("qci", 0.0))
        if qci < self.behavior.assessor_low:
            return "Low"
        if qci < self.behavior.assessor_high:
            return "Mid"
        return "High"

    def _judge(self, payload: Mapping[str, Any]) -> str:
        if self.behavior.judge_mode == "always_relevant":
            return "Relevant"
        if self.behavior.judge_mode == "always_irrelevant":
            return "Irrelevant"
        sim = float(payload.get("sim", 0.0))
        return "Relevant" if sim >= self.behavior.judge_threshold else "Irrelevant"

    def _rerank(self, payload: Mapping[str, Any]) -> str:
        scores = payload.get("scores", ())
        return "\n".join(f"{i}. {float(s)!r}" for i, s in enumerate(scores, start=1))

    def _classify(self, payload: Mapping[str, Any]) -> str:
        labels = payload.get("evidence_labels", ())
        return ", ".join(labels) if labels else "none"


class RemoteChatBackend:
    """HTTP chat client; bounded in-flight requests, one retry per call."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        timeout_ms: int = 30_000,
        max_in_flight: int = 4,
    ):
        if not endpoint:
            raise ValueError("remote chat backend requires an endpoint")
        if max_in_flight < 1:
            raise ValueError(f"max_in_flight must be >= 1, got {max_in_flight}")
        self.endpoint = endpoint
        self.model = model
        self.timeout_s = timeout_ms / 1000.0
        self._slots = threading.Semaphore(max_in_flight)

    def chat(self, request: ChatRequest) -> str:
        body = {
            "model": request.model or self.model,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        last_error: Exception | None = None
        with self._slots:
            for _ in range(2):
                try:
                    response = requests.post(self.endpoint, json=body, timeout=self.timeout_s)
                    response.raise_for_status()
                    return self._extract_text(request.role, response.json())
                except (requests.RequestException, ValueError) as exc:
                    last_error = exc
        raise BackendError(request.role.value, f"request failed after retry: {last_error}")

    @staticmethod
    def _extract_text(role: BackendRole, data: object) -> str:
        text = _response_text(data)
        if text is None:
            raise BackendError(role.value, "unrecognized response shape")
        return text


def _response_text(data: object) -> str | None:
    if not isinstance(data, dict):
        return None
    choices = data.get("choices")
    if isinstance(choices, list) and choices and isinstance(choices[0], dict):
        first = choices[0]
        message = first.get("message")
        if isinstance(message, dict) and isinstance(message.get("content"), str):
            return message["content"]
        if isinstance(first.get("text"), str):
            return first["text"]
    message = data.get("message")
    if isinstance(message, dict) and isinstance(message.get("content"), str):
        return message["content"]
    for key in ("response", "text"):
        if isinstance(data.get(key), str):
            return data[key]
    return None


def call_chat(backend: ChatBackend, request: ChatRequest, log: CallLog | None = None) -> str:
    """Single entry point for every chat call; keeps the ledger exact."""
    if log is not None:
        log.record(request)
    return backend.chat(request)
