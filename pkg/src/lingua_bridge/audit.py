"""Human translation-quality audit: durable grade storage and the joint
quality statistics (per-side histograms, 3×3 joint matrix, usable-pair share).

Annotations are appended to a newline-delimited JSON log and derived state is
rebuilt on load, so the raw human record stays auditable. A re-submission by
the same annotator for the same record supersedes the earlier grade but never
erases it from the log.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import threading
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Optional

from .records import GRADES_ASCENDING, QualityGrade

logger = logging.getLogger(__name__)


class UnknownRecord(KeyError):
    """Annotation names a record that is not part of the audit sample."""


class EmptyInput(ValueError):
    """Statistics were requested over zero annotations."""


class UnsupportedFormat(ValueError):
    """export_report was asked for a format it does not produce."""


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass(frozen=True)
class QualityAnnotation:
    """One annotator's grade pair for one sampled record."""

    record_id: str
    annotator_id: str
    question_grade: QualityGrade
    answer_grade: QualityGrade
    timestamp: str = field(default_factory=_utc_now)
    note: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.record_id:
            raise ValueError("record_id must be non-empty")
        if not self.annotator_id:
            raise ValueError("annotator_id must be non-empty")

    def to_dict(self) -> dict:
        data = {
            "record_id": self.record_id,
            "annotator_id": self.annotator_id,
            "question_grade": self.question_grade.value,
            "answer_grade": self.answer_grade.value,
            "timestamp": self.timestamp,
        }
        if self.note is not None:
            data["note"] = self.note
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "QualityAnnotation":
        return cls(
            record_id=str(data["record_id"]),
            annotator_id=str(data["annotator_id"]),
            question_grade=QualityGrade(data["question_grade"]),
            answer_grade=QualityGrade(data["answer_grade"]),
            timestamp=data.get("timestamp", ""),
            note=data.get("note"),
        )


class AnnotationStore:
    """Append-only annotation log bound to one file.

    Writes are serialized by a lock; reads see a consistent snapshot. When
    ``known_record_ids`` is given, grades for any other record are refused.
    """

    def __init__(
        self,
        path: Path,
        known_record_ids: Optional[Iterable[str]] = None,
    ):
        self.path = Path(path)
        self._known = (
            {str(r) for r in known_record_ids} if known_record_ids is not None else None
        )
        self._lock = threading.Lock()
        self._entries: list[tuple[int, QualityAnnotation]] = []
        self._latest: dict[tuple[str, str], tuple[int, QualityAnnotation]] = {}
        self._next_id = 1
        if self.path.exists():
            self._load()

    def _load(self) -> None:
        lines = [
            line
            for line in self.path.read_text(encoding="utf-8").split("\n")
            if line
        ]
        for n, line in enumerate(lines):
            try:
                data = json.loads(line)
            except json.JSONDecodeError:
                if n == len(lines) - 1:
                    logger.warning("dropping torn trailing line in %s", self.path)
                    break
                raise
            entry_id = int(data["id"])
            annotation = QualityAnnotation.from_dict(data)
            self._apply(entry_id, annotation)
            self._next_id = max(self._next_id, entry_id + 1)

    def _apply(self, entry_id: int, annotation: QualityAnnotation) -> None:
        key = (annotation.record_id, annotation.annotator_id)
        previous = self._latest.get(key)
        if previous is not None:
            logger.info(
                "annotation %d supersedes %d for record %s by %s",
                entry_id,
                previous[0],
                annotation.record_id,
                annotation.annotator_id,
            )
        self._entries.append((entry_id, annotation))
        self._latest[key] = (entry_id, annotation)

    def record(self, annotation: QualityAnnotation) -> int:
        """Persist one annotation; returns its stored id. Latest submission
        per (record, annotator) wins; earlier ones stay in the log."""
        with self._lock:
            if self._known is not None and annotation.record_id not in self._known:
                raise UnknownRecord(annotation.record_id)
            entry_id = self._next_id
            self._next_id += 1
            line = json.dumps(
                {"id": entry_id, **annotation.to_dict()}, ensure_ascii=False
            )
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as handle:
                handle.write(line + "\n")
                handle.flush()
            self._apply(entry_id, annotation)
            return entry_id

    def annotations(self) -> list[QualityAnnotation]:
        """Effective annotations: latest per (record, annotator), in first-
        submission order."""
        with self._lock:
            seen: dict[tuple[str, str], QualityAnnotation] = {}
            for _, annotation in self._entries:
                seen[(annotation.record_id, annotation.annotator_id)] = annotation
            return list(seen.values())

    def history(self, record_id: str, annotator_id: str) -> list[QualityAnnotation]:
        with self._lock:
            return [
                annotation
                for _, annotation in self._entries
                if annotation.record_id == record_id
                and annotation.annotator_id == annotator_id
            ]

    def get(self, record_id: str, annotator_id: str) -> Optional[QualityAnnotation]:
        with self._lock:
            entry = self._latest.get((record_id, annotator_id))
            return entry[1] if entry else None

    def graded_record_ids(self, annotator_id: str) -> set[str]:
        with self._lock:
            return {
                record_id
                for (record_id, by), _ in self._latest.items()
                if by == annotator_id
            }

    def __len__(self) -> int:
        with self._lock:
            return len(self._latest)


def record_annotation(store: AnnotationStore, annotation: QualityAnnotation) -> int:
    return store.record(annotation)


@dataclass(frozen=True)
class QualityMatrix:
    """Joint distribution of (question grade, answer grade) over records.

    Counts are exact integers; fractions are derived on access so they always
    agree with the counts.
    """

    counts: dict[tuple[QualityGrade, QualityGrade], int]
    n: int

    def __post_init__(self) -> None:
        if self.n <= 0:
            raise ValueError("matrix needs at least one graded record")
        if sum(self.counts.values()) != self.n:
            raise ValueError("joint counts must sum to n")

    def count(self, question: QualityGrade, answer: QualityGrade) -> int:
        return self.counts.get((question, answer), 0)

    def fraction(self, question: QualityGrade, answer: QualityGrade) -> float:
        return self.count(question, answer) / self.n

    def question_count(self, grade: QualityGrade) -> int:
        return sum(self.count(grade, a) for a in QualityGrade)

    def answer_count(self, grade: QualityGrade) -> int:
        return sum(self.count(q, grade) for q in QualityGrade)

    @property
    def question_marginal(self) -> dict[QualityGrade, float]:
        return {g: self.question_count(g) / self.n for g in GRADES_ASCENDING}

    @property
    def answer_marginal(self) -> dict[QualityGrade, float]:
        return {g: self.answer_count(g) / self.n for g in GRADES_ASCENDING}

    @property
    def usable_fraction(self) -> float:
        return self.fraction(QualityGrade.HIGH, QualityGrade.HIGH)


def unsuitable_fraction(matrix: QualityMatrix) -> float:
    """Share of pairs not graded High on both sides."""
    return 1.0 - matrix.usable_fraction


AGGREGATIONS = ("min", "majority")


def _aggregate(grades: list[QualityGrade], aggregation: str) -> QualityGrade:
    if aggregation == "min":
        return min(grades)
    # majority; ties break toward the lower grade (pessimistic)
    tally = Counter(grades)
    return max(tally.items(), key=lambda kv: (kv[1], -kv[0].rank))[0]


def compute_matrix(
    annotations: Iterable[QualityAnnotation],
    aggregation: str = "min",
) -> QualityMatrix:
    """Fold annotations into the joint quality matrix.

    Each record contributes one (question, answer) cell. When several
    annotators graded the same record, their grades are combined per side:
    minimum grade by default, or per-grade majority with ties broken toward
    the lower grade.
    """
    if aggregation not in AGGREGATIONS:
        raise ValueError(f"aggregation must be one of {AGGREGATIONS}")
    annotations = list(annotations)
    if not annotations:
        raise EmptyInput("no annotations to aggregate")
    by_record: dict[str, list[QualityAnnotation]] = defaultdict(list)
    for annotation in annotations:
        by_record[annotation.record_id].append(annotation)
    counts = {(q, a): 0 for q in QualityGrade for a in QualityGrade}
    for record_annotations in by_record.values():
        question = _aggregate(
            [a.question_grade for a in record_annotations], aggregation
        )
        answer = _aggregate([a.answer_grade for a in record_annotations], aggregation)
        counts[(question, answer)] += 1
    return QualityMatrix(counts=counts, n=len(by_record))


def matrix_to_dict(matrix: QualityMatrix) -> dict:
    """Plot-ready JSON shape; also the wire form served by the audit API."""
    return {
        "n": matrix.n,
        "joint_counts": {
            q.value: {a.value: matrix.count(q, a) for a in GRADES_ASCENDING}
            for q in GRADES_ASCENDING
        },
        "joint_fractions": {
            q.value: {a.value: matrix.fraction(q, a) for a in GRADES_ASCENDING}
            for q in GRADES_ASCENDING
        },
        "question_histogram": {
            g.value: {
                "count": matrix.question_count(g),
                "fraction": matrix.question_marginal[g],
            }
            for g in GRADES_ASCENDING
        },
        "answer_histogram": {
            g.value: {
                "count": matrix.answer_count(g),
                "fraction": matrix.answer_marginal[g],
            }
            for g in GRADES_ASCENDING
        },
        "usable_fraction": matrix.usable_fraction,
        "unsuitable_fraction": unsuitable_fraction(matrix),
    }


def export_report(matrix: QualityMatrix, format: str) -> str:
    """Render the matrix as a flat CSV (grade_q,grade_a,count) or as the
    JSON bundle from matrix_to_dict. Numbers are taken straight from the
    matrix, never recomputed."""
    if format == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["grade_q", "grade_a", "count"])
        for q in GRADES_ASCENDING:
            for a in GRADES_ASCENDING:
                writer.writerow([q.value, a.value, matrix.count(q, a)])
        return buffer.getvalue()
    if format == "json":
        return json.dumps(matrix_to_dict(matrix), ensure_ascii=False, indent=2) + "\n"
    raise UnsupportedFormat(f"unknown report format: {format!r}")


def format_matrix_table(matrix: QualityMatrix) -> str:
    """Whole-percent text rendering of the joint matrix plus headline shares."""
    label_width = max(len(g.value) for g in QualityGrade)
    header = " " * (label_width + 2) + "  ".join(
        f"A-{g.value:<{label_width}}" for g in GRADES_ASCENDING
    )
    lines = [header]
    for q in GRADES_ASCENDING:
        cells = "  ".join(
            f"{matrix.fraction(q, a) * 100:>{label_width + 2}.0f}"
            for a in GRADES_ASCENDING
        )
        lines.append(f"Q-{q.value:<{label_width}}{cells}")
    lines.append("")
    lines.append(f"pairs graded: {matrix.n}")
    lines.append(f"usable (High/High): {matrix.usable_fraction * 100:.0f}%")
    lines.append(f"unsuitable: {unsuitable_fraction(matrix) * 100:.0f}%")
    return "\n".join(lines)
