"""HTTP client for chat-completions inference endpoints.

Speaks the common open-source wire shape: POST {base_url}/chat/completions
with ``model``, ``messages``, ``temperature``, ``max_tokens``; the reply text
is read from ``choices[0].message.content``. Used both for the text
translator and for the multimodal VLM (one image content part per request).

Retries transport failures, 429s and 5xx replies with jittered exponential
backoff; a shared semaphore keeps at most ``max_in_flight`` requests
outstanding per endpoint, including across threads.
"""

from __future__ import annotations

import json
import logging
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence, Union

import httpx

from .records import EndpointConfig

logger = logging.getLogger(__name__)

BACKOFF_BASE_SECONDS = 0.5
BACKOFF_JITTER = 0.2  # +/- 20%


class InferenceError(Exception):
    """Base class for endpoint failures."""


class TransportError(InferenceError):
    """Network-level failure (or persistent 5xx) after the retry budget."""


class ProtocolError(InferenceError):
    """The endpoint replied, but not with a parseable chat completion."""


class RateLimited(InferenceError):
    """429-class replies persisted through the whole retry budget."""


class FinishReason(str, Enum):
    COMPLETE = "complete"
    TRUNCATED = "truncated"
    ERROR = "error"


@dataclass(frozen=True)
class TextPart:
    text: str


@dataclass(frozen=True)
class ImagePart:
    """Image payload: either inline base64 bytes with a media type, or a URI."""

    base64_data: Optional[str] = None
    media_type: Optional[str] = None
    uri: Optional[str] = None

    def __post_init__(self) -> None:
        inline = self.base64_data is not None
        if inline and self.media_type is None:
            raise ValueError("inline image payload requires media_type")
        if inline == (self.uri is not None):
            raise ValueError("image payload needs exactly one of base64 data or uri")


ContentPart = Union[TextPart, ImagePart]


@dataclass(frozen=True)
class ChatMessage:
    role: str
    parts: tuple[ContentPart, ...]


@dataclass(frozen=True)
class ChatRequest:
    """One chat completion request. At most one image part across all messages."""

    messages: tuple[ChatMessage, ...]
    system_prompt: Optional[str] = None
    temperature: float = 0.0
    max_output_tokens: int = 1024

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("messages must be non-empty")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be positive")
        n_images = sum(
            isinstance(p, ImagePart) for m in self.messages for p in m.parts
        )
        if n_images > 1:
            raise ValueError("at most one image payload per request")

    @classmethod
    def single_user(
        cls,
        text: str,
        system_prompt: Optional[str] = None,
        image: Optional[ImagePart] = None,
        temperature: float = 0.0,
        max_output_tokens: int = 1024,
    ) -> "ChatRequest":
        parts: tuple[ContentPart, ...] = (TextPart(text),)
        if image is not None:
            parts = parts + (image,)
        return cls(
            messages=(ChatMessage(role="user", parts=parts),),
            system_prompt=system_prompt,
            temperature=temperature,
            max_output_tokens=max_output_tokens,
        )


@dataclass(frozen=True)
class ChatResponse:
    text: str
    finish_reason: FinishReason
    latency_ms: float
    attempts: int = 1


def _part_to_wire(part: ContentPart) -> dict:
    if isinstance(part, TextPart):
        return {"type": "text", "text": part.text}
    if part.uri is not None:
        url = part.uri
    else:
        url = f"data:{part.media_type};base64,{part.base64_data}"
    return {"type": "image_url", "image_url": {"url": url}}


def build_wire_body(endpoint: EndpointConfig, request: ChatRequest) -> bytes:
    """Serialize a request to its wire body. Byte-identical for equal inputs."""
    messages: list[dict] = []
    if request.system_prompt is not None:
        messages.append({"role": "system", "content": request.system_prompt})
    for message in request.messages:
        if len(message.parts) == 1 and isinstance(message.parts[0], TextPart):
            content: object = message.parts[0].text
        else:
            content = [_part_to_wire(p) for p in message.parts]
        messages.append({"role": message.role, "content": content})
    body = {
        "model": endpoint.model_name,
        "messages": messages,
        "temperature": request.temperature,
        "max_tokens": request.max_output_tokens,
    }
    return json.dumps(body, sort_keys=True, ensure_ascii=False, separators=(",", ":")).encode(
        "utf-8"
    )


_FINISH_REASONS = {
    "stop": FinishReason.COMPLETE,
    "complete": FinishReason.COMPLETE,
    "length": FinishReason.TRUNCATED,
    "truncated": FinishReason.TRUNCATED,
}


def _parse_completion(payload: object) -> tuple[str, FinishReason]:
    if not isinstance(payload, dict):
        raise ProtocolError(f"completion body is not an object: {type(payload).__name__}")
    try:
        choice = payload["choices"][0]
        content = choice["message"]["content"]
    except (KeyError, IndexError, TypeError) as exc:
        raise ProtocolError(f"completion body missing choices[0].message.content: {exc}") from exc
    if not isinstance(content, str):
        raise ProtocolError("completion content is not text")
    raw_reason = choice.get("finish_reason")
    reason = _FINISH_REASONS.get(raw_reason, FinishReason.COMPLETE)
    return content.rstrip(), reason


class InferenceClient:
    """Client for one configured endpoint; safe for concurrent use.

    ``transport`` lets tests swap the network layer for an httpx mock;
    ``sleep`` is injectable so backoff schedules can be asserted without
    waiting.
    """

    def __init__(
        self,
        endpoint: EndpointConfig,
        transport: Optional[httpx.BaseTransport] = None,
        sleep: Callable[[float], None] = time.sleep,
        rng: Optional[random.Random] = None,
    ):
        self.endpoint = endpoint
        self._sleep = sleep
        self._rng = rng or random.Random()
        self._in_flight = threading.BoundedSemaphore(endpoint.max_in_flight)
        headers = {"Content-Type": "application/json"}
        if endpoint.api_key:
            headers["Authorization"] = f"Bearer {endpoint.api_key}"
        self._http = httpx.Client(
            base_url=endpoint.base_url.rstrip("/"),
            headers=headers,
            timeout=endpoint.timeout,
            transport=transport,
        )

    def close(self) -> None:
        self._http.close()

    def __enter__(self) -> "InferenceClient":
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.close()

    def _backoff_delay(self, attempt: int) -> float:
        base = BACKOFF_BASE_SECONDS * (2 ** (attempt - 1))
        return base * (1 + self._rng.uniform(-BACKOFF_JITTER, BACKOFF_JITTER))

    def complete(self, request: ChatRequest) -> ChatResponse:
        """Run one chat completion, retrying transient failures.

        Returns the endpoint's first candidate text verbatim apart from
        trailing-whitespace trimming. Truncation is reported through
        ``finish_reason``, not as an error.
        """
        body = build_wire_body(self.endpoint, request)
        max_attempts = self.endpoint.max_retries + 1
        last_error: Optional[InferenceError] = None
        started = time.monotonic()

        for attempt in range(1, max_attempts + 1):
            try:
                with self._in_flight:
                    response = self._http.post("/chat/completions", content=body)
            except httpx.HTTPError as exc:
                last_error = TransportError(f"transport failure: {exc}")
                logger.warning(
                    "attempt %d/%d to %s failed: %s",
                    attempt, max_attempts, self.endpoint.base_url, exc,
                )
            else:
                if response.status_code == 429:
                    last_error = RateLimited(f"rate limited: {response.text[:200]}")
                    logger.warning(
                        "attempt %d/%d rate limited by %s",
                        attempt, max_attempts, self.endpoint.base_url,
                    )
                elif response.status_code >= 500:
                    last_error = TransportError(
                        f"server error {response.status_code}: {response.text[:200]}"
                    )
                    logger.warning(
                        "attempt %d/%d got %d from %s",
                        attempt, max_attempts, response.status_code, self.endpoint.base_url,
                    )
                elif response.status_code >= 400:
                    raise ProtocolError(
                        f"endpoint rejected request ({response.status_code}): "
                        f"{response.text[:200]}"
                    )
                else:
                    try:
                        payload = response.json()
                    except ValueError as exc:
                        raise ProtocolError(f"endpoint reply is not JSON: {exc}") from exc
                    text, reason = _parse_completion(payload)
                    latency_ms = (time.monotonic() - started) * 1000.0
                    return ChatResponse(
                        text=text,
                        finish_reason=reason,
                        latency_ms=latency_ms,
                        attempts=attempt,
                    )
            if attempt < max_attempts:
                self._sleep(self._backoff_delay(attempt))

        assert last_error is not None
        raise last_error

    def complete_many(
        self, requests: Sequence[ChatRequest]
    ) -> list[Union[ChatResponse, InferenceError]]:
        """Run a batch; output order equals input order.

        Per-item failures come back as the raised error in that slot rather
        than aborting the batch. Concurrency is bounded by ``max_in_flight``.
        """
        if not requests:
            return []
        results: list[Union[ChatResponse, InferenceError]] = [None] * len(requests)  # type: ignore[list-item]

        def run_one(index: int, request: ChatRequest) -> None:
            try:
                results[index] = self.complete(request)
            except InferenceError as exc:
                results[index] = exc

        workers = min(self.endpoint.max_in_flight, len(requests))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_one, i, r) for i, r in enumerate(requests)]
            for future in futures:
                future.result()
        return results
