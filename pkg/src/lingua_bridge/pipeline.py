"""Bulk dataset translation with checkpointed resume, plus audit sampling.

A job reads a JSON array of conversation records, round-trips the selected
turns through the translation engine, and writes the enriched array back out.
Progress is journaled to a staging JSONL sidecar after every record and a
checkpoint sidecar every ``checkpoint_every`` records, so an interrupted job
resumes where it stopped and produces byte-identical output to an
uninterrupted run. Unknown record fields pass through verbatim.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import time
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Optional, Sequence

from .records import SchemaError, _SPEAKER_BY_LABEL
from .translate import TranslationEngine
from .prompts import TranslationPromptSpec

logger = logging.getLogger(__name__)

# Key written for the forward translation, plus older spellings still found
# in circulating files. Readers try them in this order.
TRANSLATED_VALUE_KEYS: tuple[str, ...] = (
    "value_translated",
    "value_french",
    "french_value",
)
DOUBLE_TRANSLATED_KEY = "value_double_translated"


class ResumeMismatch(RuntimeError):
    """Checkpoint on disk does not belong to the current input file."""


class InsufficientData(ValueError):
    """Corpus has fewer eligible records than the requested sample size."""


class JobMode(str, Enum):
    TRANSLATE_ONLY = "translate_only"
    ROUND_TRIP = "round_trip"


class TurnSelector(str, Enum):
    """Which sides of a conversation get translated."""

    HUMAN = "human"
    ASSISTANT = "assistant"
    BOTH = "both"

    def selects(self, role_label: Any) -> bool:
        speaker = _SPEAKER_BY_LABEL.get(role_label)
        if speaker is None:
            return False
        return self is TurnSelector.BOTH or speaker == self.value


@dataclass(frozen=True)
class PipelineJob:
    input_path: Path
    output_path: Path
    spec_forward: TranslationPromptSpec
    # Backward spec may be None only in TRANSLATE_ONLY mode.
    spec_backward: Optional[TranslationPromptSpec] = None
    mode: JobMode = JobMode.ROUND_TRIP
    selector: TurnSelector = TurnSelector.BOTH
    checkpoint_every: int = 64

    def __post_init__(self) -> None:
        if self.checkpoint_every < 1:
            raise ValueError("checkpoint_every must be >= 1")
        if self.mode is JobMode.ROUND_TRIP and self.spec_backward is None:
            raise ValueError("round-trip jobs need a backward prompt spec")


@dataclass(frozen=True)
class JobReport:
    output_path: Path
    records_total: int
    records_resumed: int
    turns_translated: int
    forward_flag_counts: dict[str, int]
    backward_flag_counts: dict[str, int]
    duration_seconds: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "output_path": str(self.output_path),
            "records_total": self.records_total,
            "records_resumed": self.records_resumed,
            "turns_translated": self.turns_translated,
            "forward_flag_counts": dict(self.forward_flag_counts),
            "backward_flag_counts": dict(self.backward_flag_counts),
            "duration_seconds": self.duration_seconds,
        }


@dataclass(frozen=True)
class Checkpoint:
    content_hash: str
    last_completed_index: int
    forward_flag_counts: dict[str, int] = field(default_factory=dict)
    backward_flag_counts: dict[str, int] = field(default_factory=dict)

    def write(self, path: Path) -> None:
        payload = {
            "content_hash": self.content_hash,
            "last_completed_index": self.last_completed_index,
            "forward_flag_counts": dict(self.forward_flag_counts),
            "backward_flag_counts": dict(self.backward_flag_counts),
        }
        _atomic_write_text(path, json.dumps(payload, ensure_ascii=False, indent=2) + "\n")

    @classmethod
    def load(cls, path: Path) -> "Checkpoint":
        data = json.loads(path.read_text(encoding="utf-8"))
        return cls(
            content_hash=data["content_hash"],
            last_completed_index=data["last_completed_index"],
            forward_flag_counts=dict(data.get("forward_flag_counts", {})),
            backward_flag_counts=dict(data.get("backward_flag_counts", {})),
        )


def staging_path(output_path: Path) -> Path:
    return Path(str(output_path) + ".staging.jsonl")


def checkpoint_path(output_path: Path) -> Path:
    return Path(str(output_path) + ".checkpoint.json")


def report_path(output_path: Path) -> Path:
    return Path(str(output_path) + ".report.json")


def load_dataset(path: Path) -> list[dict]:
    """Read a JSON array of records; shape problems raise SchemaError."""
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(data, list):
        raise SchemaError(f"{path}: expected a JSON array of records")
    validate_dataset(data)
    return data


def validate_dataset(records: Sequence[Any]) -> None:
    """Fail fast, before any endpoint traffic, naming the offending record."""
    for i, record in enumerate(records):
        label = _record_label(record, i)
        if not isinstance(record, dict):
            raise SchemaError(f"record {label}: expected an object")
        conversations = record.get("conversations")
        if not isinstance(conversations, list) or not conversations:
            raise SchemaError(f"record {label}: 'conversations' must be a non-empty list")
        for j, turn in enumerate(conversations):
            if not isinstance(turn, dict):
                raise SchemaError(f"record {label}: turn {j} is not an object")
            if not isinstance(turn.get("from"), str):
                raise SchemaError(f"record {label}: turn {j} is missing 'from'")
            value = turn.get("value")
            if not isinstance(value, str) or not value:
                raise SchemaError(
                    f"record {label}: turn {j} needs a non-empty string 'value'"
                )


def _record_label(record: Any, index: int) -> str:
    if isinstance(record, dict) and "id" in record:
        return repr(record["id"])
    return f"#{index}"


def run_job(job: PipelineJob, engine: TranslationEngine) -> JobReport:
    """Execute (or resume) a translation job. See the module docstring for
    the journaling scheme. KeyboardInterrupt propagates; completed records
    stay journaled and the next call picks up after them."""
    started = time.monotonic()
    raw = job.input_path.read_bytes()
    digest = hashlib.sha256(raw).hexdigest()
    records = json.loads(raw.decode("utf-8"))
    if not isinstance(records, list):
        raise SchemaError(f"{job.input_path}: expected a JSON array of records")
    validate_dataset(records)

    staging = staging_path(job.output_path)
    ckpt_path = checkpoint_path(job.output_path)

    completed: list[dict] = []
    if ckpt_path.exists():
        checkpoint = Checkpoint.load(ckpt_path)
        if checkpoint.content_hash != digest:
            raise ResumeMismatch(
                f"{job.input_path} changed since the checkpoint was written "
                f"(expected sha256 {checkpoint.content_hash}, found {digest}); "
                "delete the sidecar files to start over"
            )
        if staging.exists():
            completed = _load_staging(staging)
        elif checkpoint.last_completed_index >= 0:
            raise ResumeMismatch(
                f"checkpoint {ckpt_path} exists but staging file {staging} is missing"
            )
    else:
        # Fresh job; clear any stray staging file from an older run.
        staging.unlink(missing_ok=True)
        job.output_path.parent.mkdir(parents=True, exist_ok=True)
        Checkpoint(content_hash=digest, last_completed_index=-1).write(ckpt_path)

    if len(completed) > len(records):
        raise ResumeMismatch(
            f"staging file {staging} has {len(completed)} records but the input "
            f"only has {len(records)}"
        )

    forward_counts: Counter = Counter()
    backward_counts: Counter = Counter()
    turns_translated = 0
    for entry in completed:
        records[entry["index"]] = entry["record"]
        forward_counts.update(entry["forward_flags"])
        backward_counts.update(entry["backward_flags"])
        turns_translated += entry["turns"]
    start_index = len(completed)
    if start_index:
        logger.info("resuming %s at record %d/%d", job.output_path, start_index, len(records))

    with staging.open("a", encoding="utf-8") as journal:
        for i in range(start_index, len(records)):
            record = records[i]
            turns = [
                turn
                for turn in record["conversations"]
                if job.selector.selects(turn.get("from"))
            ]
            payloads = [t["value"] for t in turns]
            forward_flags: list[str] = []
            backward_flags: list[str] = []
            if job.mode is JobMode.ROUND_TRIP:
                trips = engine.round_trip_many(
                    job.spec_forward, job.spec_backward, payloads
                ) if turns else []
                for turn, trip in zip(turns, trips):
                    turn[TRANSLATED_VALUE_KEYS[0]] = trip.forward.translated
                    turn[DOUBLE_TRANSLATED_KEY] = trip.backward.translated
                    forward_flags.extend(sorted(f.value for f in trip.forward.drift_flags))
                    backward_flags.extend(sorted(f.value for f in trip.backward.drift_flags))
            else:
                outcomes = engine.translate_many(job.spec_forward, payloads) if turns else []
                for turn, outcome in zip(turns, outcomes):
                    turn[TRANSLATED_VALUE_KEYS[0]] = outcome.translated
                    forward_flags.extend(sorted(f.value for f in outcome.drift_flags))
            entry = {
                "index": i,
                "record": record,
                "forward_flags": forward_flags,
                "backward_flags": backward_flags,
                "turns": len(turns),
            }
            journal.write(json.dumps(entry, ensure_ascii=False) + "\n")
            journal.flush()
            forward_counts.update(forward_flags)
            backward_counts.update(backward_flags)
            turns_translated += len(turns)
            if (i + 1) % job.checkpoint_every == 0:
                Checkpoint(
                    content_hash=digest,
                    last_completed_index=i,
                    forward_flag_counts=dict(forward_counts),
                    backward_flag_counts=dict(backward_counts),
                ).write(ckpt_path)

    _atomic_write_text(
        job.output_path, json.dumps(records, ensure_ascii=False, indent=2) + "\n"
    )
    staging.unlink(missing_ok=True)
    ckpt_path.unlink(missing_ok=True)
    report = JobReport(
        output_path=job.output_path,
        records_total=len(records),
        records_resumed=start_index,
        turns_translated=turns_translated,
        forward_flag_counts=dict(forward_counts),
        backward_flag_counts=dict(backward_counts),
        duration_seconds=time.monotonic() - started,
    )
    _atomic_write_text(
        report_path(job.output_path),
        json.dumps(report.to_dict(), ensure_ascii=False, indent=2) + "\n",
    )
    return report


def _load_staging(path: Path) -> list[dict]:
    entries: list[dict] = []
    lines = [line for line in path.read_text(encoding="utf-8").split("\n") if line]
    for n, line in enumerate(lines):
        try:
            entry = json.loads(line)
        except json.JSONDecodeError:
            # A crash can leave a torn final line; everything before it counts.
            if n == len(lines) - 1:
                logger.warning("dropping torn trailing line in %s", path)
                break
            raise ResumeMismatch(f"staging file {path} is corrupt at line {n}") from None
        entries.append(entry)
    for position, entry in enumerate(entries):
        if entry.get("index") != position:
            raise ResumeMismatch(
                f"staging file {path} is not contiguous at line {position}"
            )
    return entries


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


# --- audit sampling -------------------------------------------------------


@dataclass(frozen=True)
class TextTriple:
    """Source text with its translation and back-translation."""

    source: str
    translated: str
    double_translated: str

    def to_dict(self) -> dict[str, str]:
        return {
            "source": self.source,
            "translated": self.translated,
            "double_translated": self.double_translated,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TextTriple":
        return cls(
            source=data["source"],
            translated=data["translated"],
            double_translated=data["double_translated"],
        )


@dataclass(frozen=True)
class AuditItem:
    """One sampled record: both sides of its first exchange, ready to grade."""

    record_id: str
    question: TextTriple
    answer: TextTriple

    def to_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "question": self.question.to_dict(),
            "answer": self.answer.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AuditItem":
        try:
            return cls(
                record_id=str(data["record_id"]),
                question=TextTriple.from_dict(data["question"]),
                answer=TextTriple.from_dict(data["answer"]),
            )
        except KeyError as exc:
            raise SchemaError(f"audit item is missing field {exc}") from exc


@dataclass(frozen=True)
class AuditSample:
    """A seeded draw of records for the human quality audit."""

    items: tuple[AuditItem, ...]
    n_questions: int
    n_answers: int
    seed: int

    @property
    def record_ids(self) -> tuple[str, ...]:
        return tuple(item.record_id for item in self.items)

    def to_dict(self) -> dict:
        return {
            "n_questions": self.n_questions,
            "n_answers": self.n_answers,
            "seed": self.seed,
            "items": [item.to_dict() for item in self.items],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AuditSample":
        try:
            return cls(
                items=tuple(AuditItem.from_dict(d) for d in data["items"]),
                n_questions=data["n_questions"],
                n_answers=data["n_answers"],
                seed=data["seed"],
            )
        except KeyError as exc:
            raise SchemaError(f"audit sample is missing field {exc}") from exc

    def save(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        _atomic_write_text(
            path, json.dumps(self.to_dict(), ensure_ascii=False, indent=2) + "\n"
        )

    @classmethod
    def load(cls, path: Path) -> "AuditSample":
        return cls.from_dict(json.loads(path.read_text(encoding="utf-8")))


def _turn_triple(turn: Optional[dict]) -> Optional[TextTriple]:
    if turn is None:
        return None
    source = turn.get("value")
    translated = next(
        (turn[key] for key in TRANSLATED_VALUE_KEYS if key in turn), None
    )
    double = turn.get(DOUBLE_TRANSLATED_KEY)
    if isinstance(source, str) and isinstance(translated, str) and isinstance(double, str):
        return TextTriple(source, translated, double)
    return None


def _first_turn(record: dict, speaker: str) -> Optional[dict]:
    for turn in record.get("conversations", []):
        if isinstance(turn, dict) and _SPEAKER_BY_LABEL.get(turn.get("from")) == speaker:
            return turn
    return None


def sample_for_audit(
    records: Sequence[dict],
    n_questions: int,
    n_answers: int,
    seed: int,
) -> AuditSample:
    """Draw a seeded uniform sample of records for human quality grading.

    The question side of an item is the record's first human turn, the
    answer side its first assistant turn; a record is eligible only when
    both turns carry a full translated triple. max(n_questions, n_answers)
    records are drawn without replacement and every drawn item exposes both
    sides, so the joint grade matrix stays well-defined.
    """
    if n_questions < 1 or n_answers < 1:
        raise ValueError("sample sizes must be positive")
    eligible: list[AuditItem] = []
    for i, record in enumerate(records):
        question = _turn_triple(_first_turn(record, "human"))
        answer = _turn_triple(_first_turn(record, "assistant"))
        if question is None or answer is None:
            continue
        eligible.append(AuditItem(str(record.get("id", i)), question, answer))
    k = max(n_questions, n_answers)
    if k > len(eligible):
        raise InsufficientData(
            f"asked for {k} records but only {len(eligible)} have translated "
            "triples on both sides"
        )
    chosen = random.Random(seed).sample(eligible, k)
    return AuditSample(
        items=tuple(chosen),
        n_questions=n_questions,
        n_answers=n_answers,
        seed=seed,
    )
