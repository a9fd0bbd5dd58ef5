"""Translation on top of the inference client: placeholder masking, drift
detection, and round-trip (there-and-back) translation.

LLM translators have two characteristic failure modes this module watches
for: answering the text instead of translating it, and dropping the
interrogative form of a question. Both are surfaced as diagnostic flags and
never mutate the translated text. Inline placeholder tokens such as
``<image>`` are swapped for rare sentinels before the endpoint sees the text
and restored afterwards, so they survive byte-exactly.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence

from .client import ChatRequest, InferenceClient, InferenceError
from .prompts import TranslationPromptSpec, render_system_prompt
from .records import DEFAULT_PLACEHOLDERS

logger = logging.getLogger(__name__)

# Phrases that mark the translator slipping into answering/refusing.
# Configuration, not a taxonomy; extend per deployment language pair.
DEFAULT_REFUSAL_LEXICON: tuple[str, ...] = (
    "i cannot",
    "i can not",
    "i can't",
    "i am unable",
    "i'm unable",
    "i am sorry",
    "i'm sorry",
    "as an ai",
    "je ne peux pas",
    "je ne suis pas en mesure",
    "je suis désolé",
    "en tant qu'ia",
)

DEFAULT_LENGTH_RATIO_THRESHOLD = 3.0


class EmptyPayload(ValueError):
    """Asked to translate an empty string."""


class DriftFlag(str, Enum):
    ANSWERED_INSTEAD_OF_TRANSLATED = "AnsweredInsteadOfTranslated"
    LOST_INTERROGATIVE = "LostInterrogative"
    EMPTY_OUTPUT = "EmptyOutput"
    PLACEHOLDER_DAMAGED = "PlaceholderDamaged"


@dataclass(frozen=True)
class TranslationResult:
    source: str
    translated: str
    drift_flags: frozenset[DriftFlag]
    attempts: int


@dataclass(frozen=True)
class RoundTripResult:
    """Forward translation plus its back-translation to the source language."""

    source: str
    forward: TranslationResult
    backward: TranslationResult


@dataclass(frozen=True)
class PlaceholderMask:
    """Reversible placeholder -> sentinel substitution for one payload."""

    pairs: tuple[tuple[str, str], ...]

    def apply(self, text: str) -> str:
        for placeholder, sentinel in self.pairs:
            text = text.replace(placeholder, sentinel)
        return text

    def restore(self, text: str) -> str:
        for placeholder, sentinel in self.pairs:
            text = text.replace(sentinel, placeholder)
        return text


def make_mask(payload: str, placeholders: Iterable[str] = DEFAULT_PLACEHOLDERS) -> PlaceholderMask:
    """Build a mask whose sentinels are guaranteed absent from the payload.

    Longer placeholders are substituted first so none can eat a prefix of
    another. Placeholders must not contain the sentinel brackets themselves.
    """
    pairs = []
    for i, placeholder in enumerate(sorted(set(placeholders), key=len, reverse=True)):
        sentinel = f"⟦PH{i}⟧"
        salt = 0
        while sentinel in payload:
            salt += 1
            sentinel = f"⟦PH{i}x{salt}⟧"
        pairs.append((placeholder, sentinel))
    return PlaceholderMask(pairs=tuple(pairs))


def _placeholder_counts(text: str, placeholders: Iterable[str]) -> Counter:
    return Counter({p: text.count(p) for p in placeholders if text.count(p)})


def _is_question(source: str, placeholders: Iterable[str]) -> bool:
    # Trailing whitespace and placeholder tokens don't hide the question mark.
    stripped = source.rstrip()
    changed = True
    while changed:
        changed = False
        for p in placeholders:
            if stripped.endswith(p):
                stripped = stripped[: -len(p)].rstrip()
                changed = True
    return stripped.endswith("?")


def detect_drift(
    source: str,
    translated: str,
    placeholders: Iterable[str] = DEFAULT_PLACEHOLDERS,
    refusal_lexicon: Iterable[str] = DEFAULT_REFUSAL_LEXICON,
    length_ratio_threshold: float = DEFAULT_LENGTH_RATIO_THRESHOLD,
) -> frozenset[DriftFlag]:
    """Pure diagnostic comparison of a source text and its translation."""
    placeholders = tuple(placeholders)
    flags: set[DriftFlag] = set()
    if _placeholder_counts(source, placeholders) != _placeholder_counts(translated, placeholders):
        flags.add(DriftFlag.PLACEHOLDER_DAMAGED)
    if not translated:
        flags.add(DriftFlag.EMPTY_OUTPUT)
        return frozenset(flags)
    question = _is_question(source, placeholders)
    if question and "?" not in translated:
        flags.add(DriftFlag.LOST_INTERROGATIVE)
    lowered = translated.lower()
    if any(phrase in lowered for phrase in refusal_lexicon):
        flags.add(DriftFlag.ANSWERED_INSTEAD_OF_TRANSLATED)
    elif question and len(translated) > length_ratio_threshold * len(source):
        flags.add(DriftFlag.ANSWERED_INSTEAD_OF_TRANSLATED)
    return frozenset(flags)


def build_prompt(
    spec: TranslationPromptSpec,
    payload: str,
    mask: Optional[PlaceholderMask] = None,
    temperature: float = 0.0,
    max_output_tokens: int = 1024,
) -> ChatRequest:
    """Turn a payload into the translator request: rendered system prompt,
    payload (placeholder-masked) as the sole user message."""
    if not payload:
        raise EmptyPayload("translation payload must be non-empty")
    if mask is None:
        mask = make_mask(payload, spec.placeholders)
    return ChatRequest.single_user(
        text=mask.apply(payload),
        system_prompt=render_system_prompt(spec),
        temperature=temperature,
        max_output_tokens=max_output_tokens,
    )


class TranslationEngine:
    """Drives one translator endpoint. Stateless given a spec; batch calls
    inherit the client's bounded parallelism and order preservation."""

    def __init__(
        self,
        client: InferenceClient,
        refusal_lexicon: Iterable[str] = DEFAULT_REFUSAL_LEXICON,
        length_ratio_threshold: float = DEFAULT_LENGTH_RATIO_THRESHOLD,
        max_output_tokens: int = 1024,
    ):
        self.client = client
        self.refusal_lexicon = tuple(refusal_lexicon)
        self.length_ratio_threshold = length_ratio_threshold
        self.max_output_tokens = max_output_tokens

    def _result(
        self,
        spec: TranslationPromptSpec,
        payload: str,
        translated: str,
        attempts: int,
    ) -> TranslationResult:
        flags = detect_drift(
            payload,
            translated,
            placeholders=spec.placeholders,
            refusal_lexicon=self.refusal_lexicon,
            length_ratio_threshold=self.length_ratio_threshold,
        )
        return TranslationResult(
            source=payload,
            translated=translated,
            drift_flags=flags,
            attempts=attempts,
        )

    def translate(self, spec: TranslationPromptSpec, payload: str) -> TranslationResult:
        """Translate one payload.

        Endpoint failures that survive the client's retry budget degrade to
        an EmptyOutput-flagged result instead of raising, so batch jobs never
        die on a single stubborn item.
        """
        mask = make_mask(payload, spec.placeholders)
        request = build_prompt(
            spec,
            payload,
            mask=mask,
            temperature=self.client.endpoint.temperature,
            max_output_tokens=self.max_output_tokens,
        )
        try:
            response = self.client.complete(request)
        except InferenceError as exc:
            logger.warning("translation failed after retries: %s", exc)
            return self._result(
                spec, payload, "", attempts=self.client.endpoint.max_retries + 1
            )
        return self._result(
            spec, payload, mask.restore(response.text), attempts=response.attempts
        )

    def translate_many(
        self, spec: TranslationPromptSpec, payloads: Sequence[str]
    ) -> list[TranslationResult]:
        """Batch translate; output order equals input order."""
        masks = [make_mask(p, spec.placeholders) for p in payloads]
        requests = [
            build_prompt(
                spec,
                payload,
                mask=mask,
                temperature=self.client.endpoint.temperature,
                max_output_tokens=self.max_output_tokens,
            )
            for payload, mask in zip(payloads, masks)
        ]
        results = []
        for payload, mask, outcome in zip(
            payloads, masks, self.client.complete_many(requests)
        ):
            if isinstance(outcome, InferenceError):
                logger.warning("translation failed after retries: %s", outcome)
                results.append(
                    self._result(
                        spec, payload, "", attempts=self.client.endpoint.max_retries + 1
                    )
                )
            else:
                results.append(
                    self._result(
                        spec, payload, mask.restore(outcome.text), attempts=outcome.attempts
                    )
                )
        return results

    def round_trip(
        self,
        spec_forward: TranslationPromptSpec,
        spec_backward: TranslationPromptSpec,
        payload: str,
    ) -> RoundTripResult:
        """Translate forward then back; both legs keep their drift flags."""
        _check_directions(spec_forward, spec_backward)
        forward = self.translate(spec_forward, payload)
        backward = self._backward_leg(spec_backward, forward)
        return RoundTripResult(source=payload, forward=forward, backward=backward)

    def round_trip_many(
        self,
        spec_forward: TranslationPromptSpec,
        spec_backward: TranslationPromptSpec,
        payloads: Sequence[str],
    ) -> list[RoundTripResult]:
        _check_directions(spec_forward, spec_backward)
        forwards = self.translate_many(spec_forward, payloads)
        pending = [(i, f.translated) for i, f in enumerate(forwards) if f.translated]
        backwards_by_index = {}
        if pending:
            translated = self.translate_many(spec_backward, [t for _, t in pending])
            backwards_by_index = {i: r for (i, _), r in zip(pending, translated)}
        results = []
        for i, (payload, forward) in enumerate(zip(payloads, forwards)):
            backward = backwards_by_index.get(i)
            if backward is None:
                backward = _empty_backward()
            results.append(RoundTripResult(source=payload, forward=forward, backward=backward))
        return results

    def _backward_leg(
        self, spec_backward: TranslationPromptSpec, forward: TranslationResult
    ) -> TranslationResult:
        if not forward.translated:
            return _empty_backward()
        return self.translate(spec_backward, forward.translated)


def _empty_backward() -> TranslationResult:
    # Forward leg produced nothing; there is nothing to translate back.
    return TranslationResult(
        source="",
        translated="",
        drift_flags=frozenset({DriftFlag.EMPTY_OUTPUT}),
        attempts=1,
    )


def _check_directions(
    spec_forward: TranslationPromptSpec, spec_backward: TranslationPromptSpec
) -> None:
    if spec_forward.target != spec_backward.source:
        raise ValueError(
            f"round-trip direction mismatch: forward targets {spec_forward.target} "
            f"but backward starts from {spec_backward.source}"
        )
