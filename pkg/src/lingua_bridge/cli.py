"""Operator command line: thin adapters over the library operations.

Every command exits 0 on success; failures print one machine-readable JSON
object to stderr and exit nonzero.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path
from typing import Callable, Optional

import click
import httpx

from .audit import (
    AnnotationStore,
    EmptyInput,
    UnsupportedFormat,
    compute_matrix,
    export_report,
    format_matrix_table,
)
from .bench import (
    BenchmarkItem,
    TaskKind,
    evaluate,
    format_accuracy_table,
    item_prompt,
    load_benchmark,
    outcome_json,
    per_item_csv,
)
from .client import ChatRequest, ImagePart, InferenceClient, InferenceError
from .config import ConfigError, load_config
from .pipeline import (
    InsufficientData,
    JobMode,
    PipelineJob,
    ResumeMismatch,
    TurnSelector,
    checkpoint_path,
    load_dataset,
    run_job,
    sample_for_audit,
    staging_path,
)
from .plans import TrainingMethod, plan_for, save_plan, validate_plan
from .prompts import default_prompt_spec, load_prompt_spec
from .records import SchemaError
from .translate import TranslationEngine

_ERRORS = (
    SchemaError,
    ResumeMismatch,
    InsufficientData,
    ConfigError,
    UnsupportedFormat,
    EmptyInput,
    InferenceError,
    OSError,
    ValueError,
    KeyError,
)


def _guard(fn: Callable) -> Callable:
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except _ERRORS as exc:
            click.echo(
                json.dumps(
                    {"error": type(exc).__name__, "message": str(exc)},
                    ensure_ascii=False,
                ),
                err=True,
            )
            sys.exit(1)

    return wrapper


def _echo_json(data: dict) -> None:
    click.echo(json.dumps(data, ensure_ascii=False, indent=2))


@click.group()
def main() -> None:
    """Multilingual VLM adaptation toolkit."""


@main.command("translate-dataset")
@click.option("--in", "input_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out", "output_path", required=True, type=click.Path(dir_okay=False, path_type=Path))
@click.option("--mode", type=click.Choice(["translate", "roundtrip"]), default="roundtrip", show_default=True)
@click.option("--src", default="en", show_default=True, help="Source language of the dataset text.")
@click.option("--dst", default="fr", show_default=True, help="Language to translate into.")
@click.option("--resume", is_flag=True, help="Continue from existing checkpoint sidecars.")
@click.option("--selector", type=click.Choice([s.value for s in TurnSelector]), default=TurnSelector.BOTH.value, show_default=True)
@click.option("--checkpoint-every", default=64, show_default=True, type=int)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None, help="Service config with the translator endpoint (or set LINGUA_BRIDGE_CONFIG).")
@click.option("--prompt-forward", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None, help="Prompt spec file for src->dst (default: built-in pair).")
@click.option("--prompt-backward", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None, help="Prompt spec file for dst->src (roundtrip only).")
@_guard
def translate_dataset(
    input_path: Path,
    output_path: Path,
    mode: str,
    src: str,
    dst: str,
    resume: bool,
    selector: str,
    checkpoint_every: int,
    config_path: Optional[Path],
    prompt_forward: Optional[Path],
    prompt_backward: Optional[Path],
) -> None:
    """Translate a conversation dataset, with checkpointed resume."""
    if not resume and (checkpoint_path(output_path).exists() or staging_path(output_path).exists()):
        raise ResumeMismatch(
            f"sidecar files for {output_path} already exist; pass --resume to "
            "continue that job or delete them to start over"
        )
    job_mode = JobMode.ROUND_TRIP if mode == "roundtrip" else JobMode.TRANSLATE_ONLY
    spec_forward = (
        load_prompt_spec(prompt_forward) if prompt_forward else default_prompt_spec(src, dst)
    )
    spec_backward = None
    if job_mode is JobMode.ROUND_TRIP:
        spec_backward = (
            load_prompt_spec(prompt_backward)
            if prompt_backward
            else default_prompt_spec(dst, src)
        )
    config = load_config(config_path)
    with InferenceClient(config.translator) as client:
        report = run_job(
            PipelineJob(
                input_path=input_path,
                output_path=output_path,
                spec_forward=spec_forward,
                spec_backward=spec_backward,
                mode=job_mode,
                selector=TurnSelector(selector),
                checkpoint_every=checkpoint_every,
            ),
            TranslationEngine(client),
        )
    _echo_json(report.to_dict())


@main.group()
def audit() -> None:
    """Human translation-quality audit."""


@audit.command("sample")
@click.option("--in", "input_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--n-q", default=200, show_default=True, type=int)
@click.option("--n-a", default=200, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", "output_path", required=True, type=click.Path(dir_okay=False, path_type=Path))
@_guard
def audit_sample(input_path: Path, n_q: int, n_a: int, seed: int, output_path: Path) -> None:
    """Draw a seeded sample of translated records for grading."""
    records = load_dataset(input_path)
    sample = sample_for_audit(records, n_questions=n_q, n_answers=n_a, seed=seed)
    sample.save(output_path)
    _echo_json(
        {"items": len(sample.items), "seed": seed, "output": str(output_path)}
    )


@audit.command("report")
@click.option("--store", "store_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out", "output_dir", required=True, type=click.Path(file_okay=False, path_type=Path))
@click.option("--aggregation", type=click.Choice(["min", "majority"]), default="min", show_default=True)
@_guard
def audit_report(store_path: Path, output_dir: Path, aggregation: str) -> None:
    """Compute the quality matrix from an annotation log and export it."""
    store = AnnotationStore(store_path)
    matrix = compute_matrix(store.annotations(), aggregation=aggregation)
    output_dir.mkdir(parents=True, exist_ok=True)
    (output_dir / "matrix.csv").write_text(export_report(matrix, "csv"), encoding="utf-8")
    (output_dir / "matrix.json").write_text(export_report(matrix, "json"), encoding="utf-8")
    click.echo(format_matrix_table(matrix))


_KIND_BY_FLAG = {
    "mc": TaskKind.MULTIPLE_CHOICE,
    "yesno": TaskKind.YES_NO,
    "open": TaskKind.OPEN_ENDED,
}


@main.command("bench")
@click.option("--items", "items_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--kind", required=True, type=click.Choice(sorted(_KIND_BY_FLAG)))
@click.option("--via", type=click.Choice(["gateway", "endpoint"]), default="endpoint", show_default=True)
@click.option("--out", "output_dir", required=True, type=click.Path(file_okay=False, path_type=Path))
@click.option("--gateway-url", default=None, help="Base URL of a running gateway (--via gateway).")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None, help="Service config with the VLM endpoint (--via endpoint).")
@click.option("--language", default="en", show_default=True, help="Language for answer lexicons and normalization.")
@click.option("--name", "benchmark_name", default=None, help="Benchmark name in reports (default: file stem).")
@click.option("--soft", is_flag=True, help="Soft open-ended scoring: min(matches/3, 1).")
@_guard
def bench(
    items_path: Path,
    kind: str,
    via: str,
    output_dir: Path,
    gateway_url: Optional[str],
    config_path: Optional[Path],
    language: str,
    benchmark_name: Optional[str],
    soft: bool,
) -> None:
    """Run a benchmark through the gateway or a direct endpoint."""
    task_kind = _KIND_BY_FLAG[kind]
    items = load_benchmark(items_path, task_kind)
    benchmark_name = benchmark_name or items_path.stem

    if via == "gateway":
        if not gateway_url:
            raise ValueError("--via gateway needs --gateway-url")
        base = gateway_url.rstrip("/")
        http = httpx.Client(timeout=300.0)

        def answer_fn(item: BenchmarkItem) -> str:
            body: dict = {"text": item_prompt(item), "trace": False}
            if item.image_ref:
                body["image_url"] = item.image_ref
            response = http.post(f"{base}/v1/pipeline/chat", json=body)
            response.raise_for_status()
            return response.json()["text"]

        model_label = "gateway"
        closer = http.close
    else:
        config = load_config(config_path)
        client = InferenceClient(config.vlm)

        def answer_fn(item: BenchmarkItem) -> str:
            image = ImagePart(uri=item.image_ref) if item.image_ref else None
            request = ChatRequest.single_user(
                text=item_prompt(item),
                image=image,
                temperature=client.endpoint.temperature,
            )
            return client.complete(request).text

        model_label = config.vlm.model_name
        closer = client.close

    try:
        outcome = evaluate(
            items,
            answer_fn,
            task_kind,
            benchmark_name=benchmark_name,
            language=language,
            soft_open_ended=soft,
        )
    finally:
        closer()
    output_dir.mkdir(parents=True, exist_ok=True)
    (output_dir / "outcome.json").write_text(outcome_json(outcome), encoding="utf-8")
    (output_dir / "per_item.csv").write_text(per_item_csv(outcome), encoding="utf-8")
    click.echo(format_accuracy_table({model_label: {benchmark_name: outcome.accuracy}}))
    click.echo(json.dumps({"diagnostics": outcome.diagnostics}, ensure_ascii=False))


@main.command("serve")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None, help="Config file (or set LINGUA_BRIDGE_CONFIG).")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8080, show_default=True, type=int)
@_guard
def serve(config_path: Optional[Path], host: str, port: int) -> None:
    """Run the translation gateway service."""
    import uvicorn

    from .gateway import create_app

    app = create_app(load_config(config_path))
    uvicorn.run(app, host=host, port=port)


_METHOD_BY_FLAG = {
    "2": TrainingMethod.EN_PRETRAIN_FR_FINETUNE,
    "3": TrainingMethod.FR_PRETRAIN_FR_FINETUNE,
    "4": TrainingMethod.DOUBLE_FINETUNE,
    **{m.value.lower(): m for m in TrainingMethod},
}


@main.command("plan")
@click.option("--method", "method_flag", required=True, help="2|3|4 or the method name.")
@click.option("--out", "output_path", type=click.Path(dir_okay=False, path_type=Path), default=None)
@_guard
def plan(method_flag: str, output_path: Optional[Path]) -> None:
    """Emit a training plan as JSON."""
    method = _METHOD_BY_FLAG.get(method_flag.lower())
    if method is None:
        raise ValueError(
            f"unknown method {method_flag!r}; use 2, 3, 4 or one of "
            f"{[m.value for m in TrainingMethod]}"
        )
    training_plan = plan_for(method)
    for violation in validate_plan(training_plan):
        click.echo(str(violation), err=True)
    if output_path is not None:
        save_plan(training_plan, output_path)
        _echo_json({"method": method.value, "output": str(output_path)})
    else:
        _echo_json(training_plan.to_dict())


if __name__ == "__main__":
    main()
