"""Shared test doubles: in-memory chat-completions endpoints.

Every stub goes through httpx.MockTransport, so tests exercise the real wire
path (request serialization, retry loop, in-flight semaphore) with the network
swapped out. Reply functions receive the text of the user message and return
the completion text, which keeps stub behavior readable at the call site.
"""

from __future__ import annotations

import json
import threading
import time
from typing import Callable, Optional

import httpx

from lingua_bridge.client import InferenceClient
from lingua_bridge.records import EndpointConfig


def wire_payload(request: httpx.Request) -> dict:
    return json.loads(request.content.decode("utf-8"))


def user_text(request: httpx.Request) -> str:
    """Text content of the last user message in a captured request."""
    for message in reversed(wire_payload(request)["messages"]):
        if message["role"] == "user":
            content = message["content"]
            if isinstance(content, str):
                return content
            for part in content:
                if part.get("type") == "text":
                    return part["text"]
    raise AssertionError("request carries no user text")


def system_text(request: httpx.Request) -> Optional[str]:
    for message in wire_payload(request)["messages"]:
        if message["role"] == "system":
            return message["content"]
    return None


def completion_response(text: str, finish_reason: str = "stop") -> httpx.Response:
    return httpx.Response(
        200,
        json={
            "choices": [
                {"message": {"content": text}, "finish_reason": finish_reason}
            ]
        },
    )


def make_endpoint(**overrides) -> EndpointConfig:
    defaults = dict(base_url="http://stub.test/v1", model_name="stub-model")
    defaults.update(overrides)
    return EndpointConfig(**defaults)


def make_client(
    reply_fn: Callable[[str], str], **endpoint_overrides
) -> InferenceClient:
    """Client whose endpoint answers ``reply_fn(user_text)`` in-process."""
    transport = httpx.MockTransport(
        lambda request: completion_response(reply_fn(user_text(request)))
    )
    return InferenceClient(make_endpoint(**endpoint_overrides), transport=transport)


class ConcurrencyGauge:
    """Counts concurrent entries; ``high_water`` backs in-flight assertions."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._active = 0
        self.high_water = 0
        self.total = 0

    def __enter__(self) -> "ConcurrencyGauge":
        with self._lock:
            self._active += 1
            self.total += 1
            self.high_water = max(self.high_water, self._active)
        return self

    def __exit__(self, *exc_info: object) -> None:
        with self._lock:
            self._active -= 1


def gauged_client(
    reply_fn: Callable[[str], str],
    gauge: ConcurrencyGauge,
    hold_seconds: float = 0.0,
    **endpoint_overrides,
) -> InferenceClient:
    """Like make_client, but each in-flight request is tracked by ``gauge``.

    ``hold_seconds`` keeps the handler open long enough for overlap to be
    observable when a test needs to prove parallelism happened at all.
    """

    def handler(request: httpx.Request) -> httpx.Response:
        with gauge:
            if hold_seconds:
                time.sleep(hold_seconds)
            return completion_response(reply_fn(user_text(request)))

    return InferenceClient(
        make_endpoint(**endpoint_overrides), transport=httpx.MockTransport(handler)
    )


class InterruptingStub:
    """Endpoint that dies with KeyboardInterrupt after ``limit`` completions.

    Models an operator hitting Ctrl-C partway through a bulk job; the client
    must let the interrupt surface instead of swallowing it as a retry.
    """

    def __init__(self, reply_fn: Callable[[str], str], limit: int) -> None:
        self._reply_fn = reply_fn
        self._limit = limit
        self._lock = threading.Lock()
        self.completed = 0

    def handler(self, request: httpx.Request) -> httpx.Response:
        with self._lock:
            if self.completed >= self._limit:
                raise KeyboardInterrupt("simulated operator interrupt")
            self.completed += 1
        return completion_response(self._reply_fn(user_text(request)))

    def client(self, **endpoint_overrides) -> InferenceClient:
        return InferenceClient(
            make_endpoint(**endpoint_overrides),
            transport=httpx.MockTransport(self.handler),
        )


def tagging_reply(tag: str) -> Callable[[str], str]:
    """Deterministic pseudo-translation: prefix the payload with a marker.

    Keeps sentinels and question marks intact, so drift flags stay quiet and
    placeholder restoration is observable end to end.
    """
    return lambda text: f"[{tag}] {text}"
