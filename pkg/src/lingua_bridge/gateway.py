"""HTTP service wrapping the three-stage chat flow (translate in, VLM,
translate out) and the audit REST API used by the annotation front end.

Every chat response carries a trace: the raw text entering and leaving each
stage with its latency and drift flags, because translation drift is the
failure mode worth watching. A stage failure answers 502 and names the stage.
Endpoints are plain synchronous handlers; the framework runs them on worker
threads and the inference clients bound in-flight requests per endpoint.
"""

from __future__ import annotations

import logging
import time
import uuid
from pathlib import Path
from typing import Any, Optional

from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field, model_validator

from .audit import (
    AnnotationStore,
    QualityAnnotation,
    UnknownRecord,
    compute_matrix,
    matrix_to_dict,
)
from .client import ChatRequest, ImagePart, InferenceClient, InferenceError
from .config import GatewayConfig
from .pipeline import AuditSample
from .prompts import (
    TranslationPromptSpec,
    default_prompt_spec,
    load_prompt_spec,
)
from .records import QualityGrade
from .translate import DriftFlag, TranslationEngine, TranslationResult

logger = logging.getLogger(__name__)


class ChatBody(BaseModel):
    text: str = Field(min_length=1)
    image_base64: Optional[str] = None
    image_url: Optional[str] = None
    image_media_type: str = "image/png"
    trace: bool = True

    @model_validator(mode="after")
    def _single_image_source(self) -> "ChatBody":
        if self.image_base64 is not None and self.image_url is not None:
            raise ValueError("provide image_base64 or image_url, not both")
        return self


class TranslateBody(BaseModel):
    text: str = Field(min_length=1)
    source: str
    target: str


class AnnotationBody(BaseModel):
    record_id: str = Field(min_length=1)
    annotator_id: str = Field(min_length=1)
    question_grade: QualityGrade
    answer_grade: QualityGrade
    note: Optional[str] = None


def _stage_error(status: int, stage: str, message: str, trace_id: str) -> HTTPException:
    return HTTPException(
        status_code=status,
        detail={"stage": stage, "message": message, "trace_id": trace_id},
    )


def _translation_to_dict(result: TranslationResult) -> dict:
    return {
        "source": result.source,
        "translated": result.translated,
        "drift_flags": sorted(f.value for f in result.drift_flags),
        "attempts": result.attempts,
    }


def create_app(
    config: Optional[GatewayConfig] = None,
    translator_client: Optional[InferenceClient] = None,
    vlm_client: Optional[InferenceClient] = None,
    spec_in: Optional[TranslationPromptSpec] = None,
    spec_out: Optional[TranslationPromptSpec] = None,
    audit_sample: Optional[AuditSample] = None,
    annotation_store: Optional[AnnotationStore] = None,
    ui_dir: Optional[Path] = None,
) -> FastAPI:
    """Assemble the service. Every collaborator is injectable so tests can
    run the full HTTP surface against stub endpoints."""
    if config is not None:
        translator_client = translator_client or InferenceClient(config.translator)
        vlm_client = vlm_client or InferenceClient(config.vlm)
        if spec_in is None:
            spec_in = (
                load_prompt_spec(config.prompt_in_path)
                if config.prompt_in_path
                else default_prompt_spec(config.target_language, config.pivot_language)
            )
        if spec_out is None:
            spec_out = (
                load_prompt_spec(config.prompt_out_path)
                if config.prompt_out_path
                else default_prompt_spec(config.pivot_language, config.target_language)
            )
        if audit_sample is None and config.audit_sample_path:
            audit_sample = AuditSample.load(config.audit_sample_path)
        if annotation_store is None and audit_sample is not None:
            store_path = config.annotation_store_path or Path("annotations.ndjson")
            annotation_store = AnnotationStore(
                store_path, known_record_ids=audit_sample.record_ids
            )
        ui_dir = ui_dir or config.ui_dir
    if translator_client is None or vlm_client is None:
        raise ValueError("gateway needs translator and VLM clients (or a config)")
    if spec_in is None or spec_out is None:
        raise ValueError("gateway needs prompt specs for both directions")
    if audit_sample is not None and annotation_store is None:
        annotation_store = AnnotationStore(
            Path("annotations.ndjson"), known_record_ids=audit_sample.record_ids
        )

    engine = TranslationEngine(translator_client)
    directions = {
        (str(spec_in.source), str(spec_in.target)): spec_in,
        (str(spec_out.source), str(spec_out.target)): spec_out,
    }
    # Whole-request budget: both translation legs plus the VLM call, with
    # 10% slack. Stage-level timeouts live on the endpoints themselves.
    deadline_seconds = (
        2 * translator_client.endpoint.timeout + vlm_client.endpoint.timeout
    ) * 1.1

    app = FastAPI(title="lingua-bridge gateway")

    def _run_translate_stage(
        name: str, spec: TranslationPromptSpec, text: str, trace_id: str
    ) -> tuple[TranslationResult, dict]:
        started = time.monotonic()
        result = engine.translate(spec, text)
        latency_ms = (time.monotonic() - started) * 1000.0
        flags = sorted(f.value for f in result.drift_flags)
        logger.info(
            "trace=%s stage=%s latency_ms=%.1f drift=%s",
            trace_id, name, latency_ms, ",".join(flags) or "-",
        )
        stage = {
            "name": name,
            "input": text,
            "output": result.translated,
            "latency_ms": latency_ms,
            "drift_flags": flags,
        }
        if DriftFlag.EMPTY_OUTPUT in result.drift_flags:
            raise _stage_error(502, name, "translator produced no output", trace_id)
        return result, stage

    def _check_deadline(started: float, next_stage: str, trace_id: str) -> None:
        if time.monotonic() - started > deadline_seconds:
            raise _stage_error(
                504, next_stage, "request deadline exceeded", trace_id
            )

    @app.post("/v1/pipeline/chat")
    def pipeline_chat(body: ChatBody) -> dict:
        trace_id = str(uuid.uuid4())
        started = time.monotonic()
        stages: list[dict] = []

        result_in, stage = _run_translate_stage(
            "translate_in", spec_in, body.text, trace_id
        )
        stages.append(stage)

        _check_deadline(started, "vlm", trace_id)
        image = None
        if body.image_base64 is not None:
            image = ImagePart(
                base64_data=body.image_base64, media_type=body.image_media_type
            )
        elif body.image_url is not None:
            image = ImagePart(uri=body.image_url)
        request = ChatRequest.single_user(
            text=result_in.translated,
            image=image,
            temperature=vlm_client.endpoint.temperature,
        )
        vlm_started = time.monotonic()
        try:
            completion = vlm_client.complete(request)
        except InferenceError as exc:
            raise _stage_error(502, "vlm", str(exc), trace_id) from exc
        vlm_latency_ms = (time.monotonic() - vlm_started) * 1000.0
        logger.info(
            "trace=%s stage=vlm latency_ms=%.1f drift=-", trace_id, vlm_latency_ms
        )
        stages.append(
            {
                "name": "vlm",
                "input": result_in.translated,
                "output": completion.text,
                "latency_ms": vlm_latency_ms,
                "drift_flags": [],
            }
        )
        if not completion.text:
            raise _stage_error(502, "vlm", "model produced no output", trace_id)

        _check_deadline(started, "translate_out", trace_id)
        result_out, stage = _run_translate_stage(
            "translate_out", spec_out, completion.text, trace_id
        )
        stages.append(stage)

        reply: dict[str, Any] = {"text": result_out.translated}
        if body.trace:
            reply["trace"] = {"id": trace_id, "stages": stages}
        return reply

    @app.post("/v1/translate")
    def translate(body: TranslateBody) -> dict:
        spec = directions.get((body.source, body.target))
        if spec is None:
            supported = sorted(f"{s}->{t}" for s, t in directions)
            raise HTTPException(
                status_code=400,
                detail=f"unsupported direction {body.source}->{body.target}; "
                f"this instance handles {supported}",
            )
        return _translation_to_dict(engine.translate(spec, body.text))

    @app.get("/audit/next")
    def audit_next(annotator: str) -> dict:
        if audit_sample is None:
            raise HTTPException(status_code=404, detail="no audit sample loaded")
        graded = annotation_store.graded_record_ids(annotator)
        pending = [
            item for item in audit_sample.items if item.record_id not in graded
        ]
        if not pending:
            raise HTTPException(status_code=404, detail="audit sample exhausted")
        return {**pending[0].to_dict(), "remaining": len(pending)}

    @app.post("/audit/annotation")
    def audit_annotation(body: AnnotationBody) -> dict:
        if audit_sample is None:
            raise HTTPException(status_code=404, detail="no audit sample loaded")
        annotation = QualityAnnotation(
            record_id=body.record_id,
            annotator_id=body.annotator_id,
            question_grade=body.question_grade,
            answer_grade=body.answer_grade,
            note=body.note,
        )
        try:
            entry_id = annotation_store.record(annotation)
        except UnknownRecord:
            raise HTTPException(
                status_code=404,
                detail=f"record {body.record_id!r} is not in the audit sample",
            ) from None
        return {"id": entry_id}

    @app.get("/audit/matrix")
    def audit_matrix() -> dict:
        annotations = annotation_store.annotations() if annotation_store else []
        if not annotations:
            raise HTTPException(status_code=404, detail="no annotations recorded")
        return matrix_to_dict(compute_matrix(annotations))

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok"}

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
