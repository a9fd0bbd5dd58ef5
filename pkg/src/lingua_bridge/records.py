"""Shared domain types: conversation records, language tags, quality grades,
and endpoint configuration.

Conversation records follow the LLaVA-style JSON layout (``id``, optional
``image``, ``conversations: [{from, value, ...}]``). Parsing is lenient and
keeps unknown fields so files round-trip without loss; ``validate_record``
reports every broken rule instead of raising.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Optional

# Roles accepted in the "from" field of a turn. LLaVA corpora use "gpt" for
# the assistant side; both spellings map to the same speaker.
_SPEAKER_BY_LABEL = {
    "human": "human",
    "gpt": "assistant",
    "assistant": "assistant",
}

# Angle-bracket tokens that look like inline placeholders (e.g. <image>).
_PLACEHOLDER_PATTERN = re.compile(r"<[A-Za-z_][A-Za-z0-9_]*>")

DEFAULT_PLACEHOLDERS: tuple[str, ...] = ("<image>",)


class SchemaError(ValueError):
    """A record or dataset file does not match the expected shape."""


class Speaker(str, enum.Enum):
    HUMAN = "human"
    ASSISTANT = "assistant"


class QualityGrade(str, enum.Enum):
    """Human translation-quality grade; totally ordered High > Moderate > Low.

    All four comparisons are spelled out: the ``str`` base class would
    otherwise supply lexicographic ones, which disagree with the grade order.
    """

    HIGH = "High"
    MODERATE = "Moderate"
    LOW = "Low"

    @property
    def rank(self) -> int:
        return {"Low": 0, "Moderate": 1, "High": 2}[self.value]

    def __lt__(self, other: object) -> bool:
        if not isinstance(other, QualityGrade):
            return NotImplemented
        return self.rank < other.rank

    def __le__(self, other: object) -> bool:
        if not isinstance(other, QualityGrade):
            return NotImplemented
        return self.rank <= other.rank

    def __gt__(self, other: object) -> bool:
        if not isinstance(other, QualityGrade):
            return NotImplemented
        return self.rank > other.rank

    def __ge__(self, other: object) -> bool:
        if not isinstance(other, QualityGrade):
            return NotImplemented
        return self.rank >= other.rank


GRADES_DESCENDING: tuple[QualityGrade, ...] = (
    QualityGrade.HIGH,
    QualityGrade.MODERATE,
    QualityGrade.LOW,
)

GRADES_ASCENDING: tuple[QualityGrade, ...] = tuple(reversed(GRADES_DESCENDING))


@dataclass(frozen=True)
class LanguageTag:
    """IETF-style language code, e.g. "en" or "fr". Lowercase, non-empty."""

    code: str

    def __post_init__(self) -> None:
        if not self.code:
            raise ValueError("language code must be non-empty")
        if self.code != self.code.lower():
            raise ValueError(f"language code must be lowercase: {self.code!r}")

    def __str__(self) -> str:
        return self.code


@dataclass(frozen=True)
class ChatTurn:
    """One turn of a conversation.

    ``role_label`` is the raw "from" value from the source file; ``speaker``
    is its normalized reading, or None when the label is not a known role.
    ``extra`` carries any other per-turn fields verbatim.
    """

    role_label: str
    text: str
    extra: Mapping[str, Any] = field(default_factory=dict)

    @property
    def speaker(self) -> Optional[Speaker]:
        label = _SPEAKER_BY_LABEL.get(self.role_label)
        return Speaker(label) if label else None

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"from": self.role_label, "value": self.text}
        out.update(self.extra)
        return out

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ChatTurn":
        extra = {k: v for k, v in d.items() if k not in ("from", "value")}
        return cls(role_label=str(d.get("from", "")), text=str(d.get("value", "")), extra=extra)


@dataclass(frozen=True)
class ConversationRecord:
    """One corpus item: opaque id, optional image reference, ordered turns."""

    id: Any
    turns: tuple[ChatTurn, ...]
    image_ref: Optional[str] = None
    extra: Mapping[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"id": self.id}
        if self.image_ref is not None:
            out["image"] = self.image_ref
        out["conversations"] = [t.to_dict() for t in self.turns]
        out.update(self.extra)
        return out

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ConversationRecord":
        turns = tuple(ChatTurn.from_dict(t) for t in d.get("conversations", ()))
        extra = {k: v for k, v in d.items() if k not in ("id", "image", "conversations")}
        return cls(
            id=d.get("id"),
            turns=turns,
            image_ref=d.get("image"),
            extra=extra,
        )

    def first_turn(self, speaker: Speaker) -> Optional[ChatTurn]:
        for turn in self.turns:
            if turn.speaker is speaker:
                return turn
        return None


def validate_record(
    record: ConversationRecord,
    allowed_placeholders: Optional[Iterable[str]] = None,
) -> list[str]:
    """Check a record against the corpus invariants.

    Returns an empty list when the record is well-formed; otherwise one
    human-readable violation per broken rule, naming the offending field.
    Total function: never raises.
    """
    violations: list[str] = []
    if record.id is None or record.id == "":
        violations.append("id must be present and non-empty")
    if not record.turns:
        violations.append("turns must be non-empty")
    allowed = set(allowed_placeholders) if allowed_placeholders is not None else None
    for i, turn in enumerate(record.turns):
        if turn.speaker is None:
            violations.append(
                f"turns[{i}].speaker: unknown role {turn.role_label!r} "
                "(expected 'human' or 'assistant'/'gpt')"
            )
        if not turn.text.strip():
            violations.append(f"turns[{i}].text must be non-empty after trimming")
        if allowed is not None:
            for token in _PLACEHOLDER_PATTERN.findall(turn.text):
                if token not in allowed:
                    violations.append(
                        f"turns[{i}].text contains undeclared placeholder {token!r}"
                    )
    return violations


@dataclass(frozen=True)
class EndpointConfig:
    """Connection settings for one chat-completions endpoint."""

    base_url: str
    model_name: str
    api_key: Optional[str] = None
    timeout: float = 60.0
    max_retries: int = 2
    max_in_flight: int = 4
    temperature: float = 0.0

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
