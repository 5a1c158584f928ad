"""Prompt rendering and response parsing for the five model roles.

Templates are plain text files with $name placeholders, shipped as package
data and overridable with a prompt directory in config. Parsers are
deliberately forgiving about formatting and strict about semantics: every
recoverable parse failure falls back to a documented default and records a
warning instead of failing the query.
"""

from __future__ import annotations

import re
from importlib import resources
from pathlib import Path
from string import Template
from typing import Any, Mapping, Sequence

from .backends import (
    BackendRole,
    ChatBackend,
    ChatMessage,
    ChatRequest,
    CallLog,
    call_chat,
)
from .errors import BackendError, ConfigError, EngineError
from .routing import RouteMode, SemanticLevel
from .vectorstore import ScoredPassage

DEFAULT_TEMPERATURES: Mapping[BackendRole, float] = {
    BackendRole.DECOMPOSER: 0.3,
    BackendRole.LEVEL_ASSESSOR: 0.0,
    BackendRole.JUDGE: 0.1,
    BackendRole.RERANKER: 0.0,
    BackendRole.INTENT_CLASSIFIER: 0.0,
}

DEFAULT_MAX_OUTPUT_TOKENS: Mapping[BackendRole, int] = {
    BackendRole.DECOMPOSER: 256,
    BackendRole.LEVEL_ASSESSOR: 16,
    BackendRole.JUDGE: 16,
    BackendRole.RERANKER: 512,
    BackendRole.INTENT_CLASSIFIER: 256,
}

_NUMBERED_LINE = re.compile(r"^\s*(\d+)\s*[.):\-]\s*(.*\S)\s*$", re.MULTILINE)
_NUMBERED_SCORE = re.compile(
    r"^\s*(\d+)\s*[.):\-]?\s*([-+]?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)\s*$", re.MULTILINE
)
_LEVEL_WORD = re.compile(r"\b(low|mid|high)\b", re.IGNORECASE)
_VERDICT_WORD = re.compile(r"\b(irrelevant|relevant)\b", re.IGNORECASE)


class ParseError(EngineError):
    """A model response did not contain what the role requires."""


class PromptLibrary:
    """Loads one template per role, from a directory or package data."""

    def __init__(self, prompt_dir: str | Path | None = None):
        self._templates: dict[BackendRole, Template] = {}
        for role in BackendRole:
            if prompt_dir is not None:
                path = Path(prompt_dir) / f"{role.value}.txt"
                try:
                    text = path.read_text(encoding="utf-8")
                except OSError as exc:
                    raise ConfigError(f"backend.prompt_dir: cannot read {path}: {exc}")
            else:
                text = (
                    resources.files(__package__)
                    .joinpath("prompts", f"{role.value}.txt")
                    .read_text(encoding="utf-8")
                )
            self._templates[role] = Template(text)

    def render(self, role: BackendRole, **fields: str) -> str:
        try:
            return self._templates[role].substitute(**fields)
        except KeyError as exc:
            raise ConfigError(f"prompt template {role.value}: unknown placeholder {exc}")


def parse_decomposition(text: str) -> tuple[str, str]:
    """Exactly two nonempty, distinct sub-queries from numbered lines."""
    parts = [m.group(2).strip() for m in _NUMBERED_LINE.finditer(text)]
    parts = [p for p in parts if p]
    if len(parts) != 2:
        raise ParseError(f"expected 2 numbered sub-queries, found {len(parts)}")
    if parts[0] == parts[1]:
        raise ParseError("sub-queries must be distinct")
    return parts[0], parts[1]


def parse_level(text: str) -> SemanticLevel | None:
    """First occurrence of low/mid/high as a word, case-insensitive."""
    match = _LEVEL_WORD.search(text)
    if match is None:
        return None
    return SemanticLevel(match.group(1).lower())


def parse_verdict(text: str) -> bool | None:
    """True for relevant, False for irrelevant, None when neither appears."""
    match = _VERDICT_WORD.search(text)
    if match is None:
        return None
    return match.group(1).lower() == "relevant"


def parse_scores(text: str, count: int) -> list[float | None]:
    """Per-candidate scores from numbered lines; None where missing."""
    found: dict[int, float] = {}
    for match in _NUMBERED_SCORE.finditer(text):
        index = int(match.group(1))
        if 1 <= index <= count and index not in found:
            found[index] = float(match.group(2))
    return [found.get(i) for i in range(1, count + 1)]


def parse_intents(text: str, catalog: Sequence[str]) -> set[str]:
    """Catalog intents named in the response; anything else is dropped."""
    canonical = {name.lower(): name for name in catalog}
    intents: set[str] = set()
    for raw in re.split(r"[,\n;]", text):
        cleaned = raw.strip().strip("-*").strip().strip(".\"'`").strip()
        cleaned = re.sub(r"^\d+\s*[.):\-]\s*", "", cleaned)
        name = canonical.get(cleaned.lower())
        if name is not None:
            intents.add(name)
    return intents


def _clamp01(value: float) -> float:
    return min(max(value, 0.0), 1.0)


def _numbered(texts: Sequence[str], empty: str = "(none)") -> str:
    if not texts:
        return empty
    return "\n".join(f"{i}. {t}" for i, t in enumerate(texts, start=1))


class RoleRunner:
    """Binds a chat backend and prompt library to the five role contracts."""

    def __init__(
        self,
        backend: ChatBackend,
        prompts: PromptLibrary | None = None,
        *,
        model: str = "stub",
        temperatures: Mapping[BackendRole, float] | None = None,
        fallback_level: SemanticLevel = SemanticLevel.MID,
    ):
        self.backend = backend
        self.prompts = prompts if prompts is not None else PromptLibrary()
        self.model = model
        self.temperatures = dict(DEFAULT_TEMPERATURES)
        if temperatures:
            self.temperatures.update(temperatures)
        self.fallback_level = fallback_level

    def _call(
        self,
        role: BackendRole,
        fields: dict[str, str],
        payload: Mapping[str, Any],
        log: CallLog | None,
    ) -> str:
        request = ChatRequest(
            role=role,
            model=self.model,
            messages=(ChatMessage("user", self.prompts.render(role, **fields)),),
            temperature=self.temperatures[role],
            max_output_tokens=DEFAULT_MAX_OUTPUT_TOKENS[role],
            payload=payload,
        )
        return call_chat(self.backend, request, log)

    def decompose(self, node_text: str, log: CallLog | None = None) -> tuple[str, str]:
        response = self._call(
            BackendRole.DECOMPOSER,
            {"query": node_text},
            {"query": node_text},
            log,
        )
        return parse_decomposition(response)

    def assess_level(
        self,
        query: str,
        snippets: Sequence[str],
        initial_mode: RouteMode,
        qci: float,
        log: CallLog | None = None,
        warnings: list[str] | None = None,
    ) -> SemanticLevel:
        response = self._call(
            BackendRole.LEVEL_ASSESSOR,
            {
                "query": query,
                "snippets": _numbered(snippets),
                "mode": initial_mode.value,
            },
            {"qci": qci},
            log,
        )
        level = parse_level(response)
        if level is None:
            if warnings is not None:
                warnings.append(
                    f"level assessor returned no level, using {self.fallback_level.value}"
                )
            return self.fallback_level
        return level

    def judge(
        self,
        original_query: str,
        sub_query: str,
        passage_text: str,
        sim: float,
        log: CallLog | None = None,
        warnings: list[str] | None = None,
    ) -> bool:
        """Borderline relevance verdict; every failure keeps the passage."""
        try:
            response = self._call(
                BackendRole.JUDGE,
                {"query": original_query, "sub_query": sub_query, "passage": passage_text},
                {"sim": sim},
                log,
            )
        except BackendError as exc:
            if warnings is not None:
                warnings.append(f"judge call failed, retaining passage: {exc}")
            return True
        verdict = parse_verdict(response)
        if verdict is None:
            if warnings is not None:
                warnings.append("judge returned no verdict, retaining passage")
            return True
        return verdict

    def rerank(
        self,
        original_query: str,
        candidates: Sequence[ScoredPassage],
        log: CallLog | None = None,
        warnings: list[str] | None = None,
    ) -> list[float]:
        """One batched scoring call; missing entries default to 0.5."""
        response = self._call(
            BackendRole.RERANKER,
            {
                "query": original_query,
                "candidates": _numbered([c.passage.text for c in candidates]),
            },
            {"scores": tuple(c.score for c in candidates)},
            log,
        )
        parsed = parse_scores(response, len(candidates))
        scores: list[float] = []
        for position, value in enumerate(parsed, start=1):
            if value is None:
                if warnings is not None:
                    warnings.append(f"reranker gave no score for candidate {position}, using 0.5")
                scores.append(0.5)
            else:
                scores.append(_clamp01(value))
        return scores

    def classify(
        self,
        query: str,
        evidence: Sequence[ScoredPassage],
        catalog: Sequence[str],
        log: CallLog | None = None,
        warnings: list[str] | None = None,
    ) -> set[str]:
        labels = sorted({label for c in evidence for label in c.passage.intent_labels})
        response = self._call(
            BackendRole.INTENT_CLASSIFIER,
            {
                "query": query,
                "evidence": _numbered([c.passage.text for c in evidence]),
                "catalog": ", ".join(catalog),
            },
            {"evidence_labels": tuple(labels)},
            log,
        )
        intents = parse_intents(response, catalog)
        if not intents and warnings is not None:
            warnings.append("classifier named no catalog intent")
        return intents
