"""Surface signal extraction and the query complexity index.

A query is scored with five cheap lexical signals: presence of an
interrogative word, a conjunction, a comparison marker, a sequence marker,
and a normalized length. The weighted sum of these signals is the
complexity index in [0, 1] that drives path routing.
"""

from __future__ import annotations

from dataclasses import dataclass

DEFAULT_WH_TERMS = frozenset(
    {"what", "when", "where", "who", "whom", "whose", "which", "why", "how"}
)
DEFAULT_CONJUNCTION_TERMS = frozenset({"and", "or", "but", "while"})
DEFAULT_COMPARISON_TERMS = frozenset({"compare", "versus", "better", "difference"})
DEFAULT_SEQUENCE_TERMS = frozenset({"first", "then", "after", "before", "next"})
DEFAULT_LENGTH_THRESHOLD = 25


@dataclass(frozen=True)
class TokenizedQuery:
    """Raw query text plus its normalized token sequence."""

    raw_text: str
    tokens: tuple[str, ...]

    @property
    def token_count(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class SignalVector:
    """Four binary structure markers plus a length signal, each in [0, 1]."""

    wh: int
    conjunction: int
    comparison: int
    sequence: int
    length: float

    def as_dict(self) -> dict[str, float]:
        return {
            "wh": float(self.wh),
            "conjunction": float(self.conjunction),
            "comparison": float(self.comparison),
            "sequence": float(self.sequence),
            "length": self.length,
        }


@dataclass(frozen=True)
class QciWeights:
    """Per-signal weights; must be non-negative and sum to 1."""

    wh: float = 0.25
    conjunction: float = 0.20
    comparison: float = 0.20
    sequence: float = 0.15
    length: float = 0.20

    def validate(self) -> None:
        for name, value in self.as_dict().items():
            if value < 0:
                raise ValueError(f"qci.weights.{name}: must be >= 0, got {value}")
        total = sum(self.as_dict().values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"qci.weights: must sum to 1.0, got {total!r}")

    def as_dict(self) -> dict[str, float]:
        return {
            "wh": self.wh,
            "conjunction": self.conjunction,
            "comparison": self.comparison,
            "sequence": self.sequence,
            "length": self.length,
        }


@dataclass(frozen=True)
class SignalLexicons:
    """Marker term sets plus the token count at which length saturates."""

    wh_terms: frozenset[str] = DEFAULT_WH_TERMS
    conjunction_terms: frozenset[str] = DEFAULT_CONJUNCTION_TERMS
    comparison_terms: frozenset[str] = DEFAULT_COMPARISON_TERMS
    sequence_terms: frozenset[str] = DEFAULT_SEQUENCE_TERMS
    length_threshold: int = DEFAULT_LENGTH_THRESHOLD

    def __post_init__(self) -> None:
        for name in ("wh_terms", "conjunction_terms", "comparison_terms", "sequence_terms"):
            if not getattr(self, name):
                raise ValueError(f"lexicon {name} must be nonempty")
        if self.length_threshold <= 0:
            raise ValueError(
                f"length_threshold must be > 0, got {self.length_threshold}"
            )


def _trim_boundary(fragment: str) -> str:
    start, end = 0, len(fragment)
    while start < end and not fragment[start].isalnum():
        start += 1
    while end > start and not fragment[end - 1].isalnum():
        end -= 1
    return fragment[start:end]


def tokenize(text: str) -> TokenizedQuery:
    """Lowercase, split on whitespace, strip non-alphanumeric edges.

    Fragments that are empty after trimming are dropped, so punctuation-only
    fragments never produce tokens.
    """
    tokens = []
    for fragment in text.lower().split():
        token = _trim_boundary(fragment)
        if token:
            tokens.append(token)
    return TokenizedQuery(raw_text=text, tokens=tuple(tokens))


def extract_signals(
    query: TokenizedQuery, lexicons: SignalLexicons = SignalLexicons()
) -> SignalVector:
    """Compute the five-signal vector by token set membership.

    Each binary signal fires when any token is in the corresponding lexicon;
    length is token count over the threshold, capped at 1.
    """
    present = set(query.tokens)
    return SignalVector(
        wh=int(bool(present & lexicons.wh_terms)),
        conjunction=int(bool(present & lexicons.conjunction_terms)),
        comparison=int(bool(present & lexicons.comparison_terms)),
        sequence=int(bool(present & lexicons.sequence_terms)),
        length=min(query.token_count / lexicons.length_threshold, 1.0),
    )


def compute_qci(signals: SignalVector, weights: QciWeights = QciWeights()) -> float:
    """Weighted sum of the signal vector; in [0, 1] for valid weights."""
    return (
        weights.wh * signals.wh
        + weights.conjunction * signals.conjunction
        + weights.comparison * signals.comparison
        + weights.sequence * signals.sequence
        + weights.length * signals.length
    )
