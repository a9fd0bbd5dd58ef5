"""Inference client: wire format, retry/backoff policy, bounded fan-out."""

import itertools
import json
import threading

import httpx
import pytest

from lingua_bridge.client import (
    BACKOFF_BASE_SECONDS,
    BACKOFF_JITTER,
    ChatRequest,
    ChatResponse,
    FinishReason,
    ImagePart,
    InferenceClient,
    ProtocolError,
    RateLimited,
    TextPart,
    TransportError,
    build_wire_body,
)

from stubs import (
    ConcurrencyGauge,
    completion_response,
    gauged_client,
    make_client,
    make_endpoint,
    user_text,
    wire_payload,
)


class TestRequestShapes:
    def test_image_part_needs_exactly_one_source(self):
        with pytest.raises(ValueError):
            ImagePart()
        with pytest.raises(ValueError):
            ImagePart(base64_data="aGk=", media_type="image/png", uri="http://x/i.png")
        with pytest.raises(ValueError):
            ImagePart(base64_data="aGk=")  # inline needs a media type

    def test_at_most_one_image_per_request(self):
        from lingua_bridge.client import ChatMessage

        image = ImagePart(uri="http://x/i.png")
        with pytest.raises(ValueError):
            ChatRequest(messages=(ChatMessage("user", (TextPart("x"), image, image)),))
        # a single image is fine
        assert ChatRequest.single_user("hi", image=image).messages

    def test_empty_messages_rejected(self):
        with pytest.raises(ValueError):
            ChatRequest(messages=())


class TestWireBody:
    def test_text_only_uses_plain_string_content(self):
        endpoint = make_endpoint()
        body = json.loads(
            build_wire_body(endpoint, ChatRequest.single_user("Bonjour", system_prompt="sys"))
        )
        assert body["model"] == "stub-model"
        assert body["messages"][0] == {"role": "system", "content": "sys"}
        assert body["messages"][1] == {"role": "user", "content": "Bonjour"}
        assert body["temperature"] == 0.0
        assert body["max_tokens"] == 1024

    def test_image_request_uses_typed_parts(self):
        endpoint = make_endpoint()
        request = ChatRequest.single_user(
            "Что на картинке?",
            image=ImagePart(base64_data="aGVsbG8=", media_type="image/jpeg"),
        )
        body = json.loads(build_wire_body(endpoint, request))
        parts = body["messages"][0]["content"]
        assert parts[0] == {"type": "text", "text": "Что на картинке?"}
        assert parts[1] == {
            "type": "image_url",
            "image_url": {"url": "data:image/jpeg;base64,aGVsbG8="},
        }

    def test_uri_image_passes_through(self):
        endpoint = make_endpoint()
        request = ChatRequest.single_user("x", image=ImagePart(uri="http://img/1.png"))
        body = json.loads(build_wire_body(endpoint, request))
        assert body["messages"][0]["content"][1]["image_url"]["url"] == "http://img/1.png"

    def test_equal_inputs_give_identical_bytes(self):
        endpoint = make_endpoint()
        request = ChatRequest.single_user("même texte", system_prompt="p")
        assert build_wire_body(endpoint, request) == build_wire_body(endpoint, request)
        # non-ascii stays readable on the wire rather than \u-escaped
        assert "même".encode("utf-8") in build_wire_body(endpoint, request)


class TestComplete:
    def test_happy_path(self):
        with make_client(lambda t: f"echo:{t}") as client:
            response = client.complete(ChatRequest.single_user("hi"))
        assert response == ChatResponse(
            text="echo:hi",
            finish_reason=FinishReason.COMPLETE,
            latency_ms=response.latency_ms,
            attempts=1,
        )
        assert response.latency_ms >= 0

    def test_trailing_whitespace_trimmed_only(self):
        with make_client(lambda t: "  keep leading \n") as client:
            response = client.complete(ChatRequest.single_user("x"))
        assert response.text == "  keep leading"

    def test_truncation_is_reported_not_raised(self):
        transport = httpx.MockTransport(
            lambda request: completion_response("partial", finish_reason="length")
        )
        with InferenceClient(make_endpoint(), transport=transport) as client:
            response = client.complete(ChatRequest.single_user("x"))
        assert response.finish_reason is FinishReason.TRUNCATED

    def test_bearer_header_only_when_key_configured(self):
        seen = {}

        def handler(request):
            seen["auth"] = request.headers.get("authorization")
            return completion_response("ok")

        with InferenceClient(
            make_endpoint(api_key="sk-secret"), transport=httpx.MockTransport(handler)
        ) as client:
            client.complete(ChatRequest.single_user("x"))
        assert seen["auth"] == "Bearer sk-secret"

        with InferenceClient(
            make_endpoint(), transport=httpx.MockTransport(handler)
        ) as client:
            client.complete(ChatRequest.single_user("x"))
        assert seen["auth"] is None

    def test_posts_to_chat_completions_under_base_url(self):
        seen = {}

        def handler(request):
            seen["url"] = str(request.url)
            return completion_response("ok")

        with InferenceClient(
            make_endpoint(base_url="http://stub.test/v1/"),
            transport=httpx.MockTransport(handler),
        ) as client:
            client.complete(ChatRequest.single_user("x"))
        assert seen["url"] == "http://stub.test/v1/chat/completions"


class TestRetries:
    def _failing_then_ok(self, failures, status=500):
        counter = itertools.count()

        def handler(request):
            if next(counter) < failures:
                return httpx.Response(status, text="boom")
            return completion_response("recovered")

        return httpx.MockTransport(handler)

    def test_5xx_retried_until_success_and_attempts_counted(self):
        sleeps = []
        client = InferenceClient(
            make_endpoint(max_retries=2),
            transport=self._failing_then_ok(2),
            sleep=sleeps.append,
        )
        response = client.complete(ChatRequest.single_user("x"))
        assert response.text == "recovered"
        assert response.attempts == 3
        assert len(sleeps) == 2

    def test_backoff_doubles_with_bounded_jitter(self):
        sleeps = []
        client = InferenceClient(
            make_endpoint(max_retries=3),
            transport=self._failing_then_ok(3),
            sleep=sleeps.append,
        )
        client.complete(ChatRequest.single_user("x"))
        assert len(sleeps) == 3
        for k, delay in enumerate(sleeps, start=1):
            base = BACKOFF_BASE_SECONDS * 2 ** (k - 1)
            assert base * (1 - BACKOFF_JITTER) <= delay <= base * (1 + BACKOFF_JITTER)

    def test_exhausted_5xx_raises_transport_error(self):
        client = InferenceClient(
            make_endpoint(max_retries=1),
            transport=self._failing_then_ok(99),
            sleep=lambda s: None,
        )
        with pytest.raises(TransportError):
            client.complete(ChatRequest.single_user("x"))

    def test_exhausted_429_raises_rate_limited(self):
        client = InferenceClient(
            make_endpoint(max_retries=1),
            transport=self._failing_then_ok(99, status=429),
            sleep=lambda s: None,
        )
        with pytest.raises(RateLimited):
            client.complete(ChatRequest.single_user("x"))

    def test_connect_errors_retried_then_transport_error(self):
        attempts = []

        def handler(request):
            attempts.append(1)
            raise httpx.ConnectError("refused")

        client = InferenceClient(
            make_endpoint(max_retries=2),
            transport=httpx.MockTransport(handler),
            sleep=lambda s: None,
        )
        with pytest.raises(TransportError):
            client.complete(ChatRequest.single_user("x"))
        assert len(attempts) == 3

    def test_4xx_other_than_429_fails_fast(self):
        attempts = []

        def handler(request):
            attempts.append(1)
            return httpx.Response(400, text="bad request")

        client = InferenceClient(
            make_endpoint(max_retries=5), transport=httpx.MockTransport(handler)
        )
        with pytest.raises(ProtocolError):
            client.complete(ChatRequest.single_user("x"))
        assert len(attempts) == 1  # client errors are not transient

    @pytest.mark.parametrize(
        "payload",
        [
            "not json at all",
            json.dumps({"choices": []}),
            json.dumps({"choices": [{"message": {}}]}),
            json.dumps({"choices": [{"message": {"content": 42}}]}),
            json.dumps([1, 2, 3]),
        ],
    )
    def test_unparseable_reply_is_protocol_error(self, payload):
        transport = httpx.MockTransport(
            lambda request: httpx.Response(
                200, text=payload, headers={"Content-Type": "application/json"}
            )
        )
        client = InferenceClient(make_endpoint(), transport=transport)
        with pytest.raises(ProtocolError):
            client.complete(ChatRequest.single_user("x"))


class TestCompleteMany:
    def test_order_preserved(self):
        with make_client(lambda t: f"<{t}>") as client:
            results = client.complete_many(
                [ChatRequest.single_user(f"n{i}") for i in range(20)]
            )
        assert [r.text for r in results] == [f"<n{i}>" for i in range(20)]

    def test_empty_batch(self):
        with make_client(lambda t: t) as client:
            assert client.complete_many([]) == []

    def test_failures_stay_in_their_slot(self):
        def handler(request):
            if user_text(request) == "poison":
                return httpx.Response(418, text="nope")
            return completion_response("fine")

        client = InferenceClient(
            make_endpoint(max_retries=0), transport=httpx.MockTransport(handler)
        )
        results = client.complete_many(
            [
                ChatRequest.single_user("a"),
                ChatRequest.single_user("poison"),
                ChatRequest.single_user("b"),
            ]
        )
        assert results[0].text == "fine"
        assert isinstance(results[1], ProtocolError)
        assert results[2].text == "fine"

    def test_in_flight_never_exceeds_bound(self):
        gauge = ConcurrencyGauge()
        client = gauged_client(
            lambda t: t, gauge, hold_seconds=0.01, max_in_flight=3
        )
        with client:
            client.complete_many([ChatRequest.single_user(f"{i}") for i in range(24)])
        assert gauge.total == 24
        assert gauge.high_water <= 3
        assert gauge.high_water >= 2  # the pool did actually overlap

    def test_bound_holds_across_threads_sharing_one_client(self):
        gauge = ConcurrencyGauge()
        client = gauged_client(lambda t: t, gauge, hold_seconds=0.01, max_in_flight=2)
        errors = []

        def worker(i):
            try:
                client.complete(ChatRequest.single_user(f"t{i}"))
            except Exception as exc:  # pragma: no cover - diagnostic aid
                errors.append(exc)

        threads = [threading.Thread(target=worker, args=(i,)) for i in range(10)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        client.close()
        assert not errors
        assert gauge.total == 10
        assert gauge.high_water <= 2


def test_request_body_reaches_wire_unmodified():
    captured = {}

    def handler(request):
        captured["body"] = request.content
        return completion_response("ok")

    endpoint = make_endpoint()
    request = ChatRequest.single_user("payload", system_prompt="sys")
    with InferenceClient(endpoint, transport=httpx.MockTransport(handler)) as client:
        client.complete(request)
    assert captured["body"] == build_wire_body(endpoint, request)
    assert wire_payload(httpx.Request("POST", "http://x", content=captured["body"]))
