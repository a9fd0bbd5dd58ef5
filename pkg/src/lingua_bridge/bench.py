"""VQA benchmark harness: load items, collect model answers, parse, score.

Parsing is deliberately rule-based and documented per operation, because the
numbers it produces feed accuracy comparisons: an unparseable answer is a
value (Unparsed), never an exception, and it scores as incorrect while being
tracked in the diagnostics.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import re
import unicodedata
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Optional, Sequence, Union

from .records import SchemaError
from .translate import DEFAULT_REFUSAL_LEXICON

logger = logging.getLogger(__name__)


class TaskKind(str, Enum):
    MULTIPLE_CHOICE = "MultipleChoice"
    YES_NO = "YesNo"
    OPEN_ENDED = "OpenEnded"


class ParseFailure(Enum):
    """Marker for model output no rule could interpret."""

    UNPARSED = "Unparsed"

    def __repr__(self) -> str:
        return self.value


UNPARSED = ParseFailure.UNPARSED

# First-token lexicons per language. "si" is the French affirmative used to
# contradict a negative question; it still means yes.
YESNO_LEXICONS: dict[str, tuple[frozenset[str], frozenset[str]]] = {
    "en": (frozenset({"yes"}), frozenset({"no"})),
    "fr": (frozenset({"oui", "si"}), frozenset({"non"})),
}

# Articles dropped by the open-ended normalizer, per language.
ARTICLES: dict[str, frozenset[str]] = {
    "en": frozenset({"a", "an", "the"}),
    "fr": frozenset({"le", "la", "les", "l", "un", "une", "des"}),
}

_OPTION_LETTERS = "ABCDE"
_TOKEN_TRIM = ".,;:!?()[]\"'«»"


class Verdict(str, Enum):
    CORRECT = "correct"
    INCORRECT = "incorrect"
    PARTIAL = "partial"
    UNPARSED = "unparsed"
    ERROR = "error"


@dataclass(frozen=True)
class BenchmarkItem:
    id: str
    question: str
    task_kind: TaskKind
    gold: Any
    choices: tuple[str, ...] = ()
    image_ref: Optional[str] = None

    def __post_init__(self) -> None:
        if self.task_kind is TaskKind.MULTIPLE_CHOICE:
            if not 2 <= len(self.choices) <= 5:
                raise ValueError("MultipleChoice items need 2-5 choices")
            if not isinstance(self.gold, int) or not 0 <= self.gold < len(self.choices):
                raise ValueError("gold must be a choice index in range")
        elif self.task_kind is TaskKind.YES_NO:
            if not isinstance(self.gold, bool):
                raise ValueError("gold must be a boolean")
        else:
            if (
                not isinstance(self.gold, tuple)
                or not self.gold
                or not all(isinstance(r, str) for r in self.gold)
            ):
                raise ValueError("gold must be a non-empty tuple of reference answers")


@dataclass(frozen=True)
class ItemVerdict:
    item_id: str
    raw_text: Optional[str]
    parsed: Any
    verdict: Verdict
    score: float
    error: Optional[str] = None

    def to_dict(self) -> dict:
        parsed = self.parsed
        if isinstance(parsed, ParseFailure):
            parsed = parsed.value
        return {
            "item_id": self.item_id,
            "raw_text": self.raw_text,
            "parsed": parsed,
            "verdict": self.verdict.value,
            "score": self.score,
            "error": self.error,
        }


@dataclass(frozen=True)
class EvalOutcome:
    benchmark_name: str
    task_kind: TaskKind
    n: int
    accuracy: float  # percent in [0, 100]
    per_item: tuple[ItemVerdict, ...]
    diagnostics: dict[str, float]
    scoring_mode: str = "exact"

    def to_dict(self) -> dict:
        return {
            "benchmark_name": self.benchmark_name,
            "task_kind": self.task_kind.value,
            "n": self.n,
            "accuracy": round(self.accuracy, 2),
            "scoring_mode": self.scoring_mode,
            "diagnostics": dict(self.diagnostics),
            "per_item": [v.to_dict() for v in self.per_item],
        }


# --- loading ---------------------------------------------------------------


def load_benchmark(path: Path, kind: Union[TaskKind, str]) -> list[BenchmarkItem]:
    """Read a JSON-lines benchmark file of the given task kind.

    Every line is one item: {"id", "question", "gold", "choices"?,
    "image_ref"?, "task_kind"?}. A per-line task_kind must match `kind`.
    YesNo gold accepts booleans or the strings "yes"/"no".
    """
    kind = TaskKind(kind)
    items: list[BenchmarkItem] = []
    seen_ids: set[str] = set()
    with Path(path).open("r", encoding="utf-8") as handle:
        for index, line in enumerate(handle):
            line = line.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"item {index}: not valid JSON: {exc}") from exc
            try:
                item = _item_from_dict(data, kind)
            except (KeyError, TypeError, ValueError) as exc:
                raise SchemaError(f"item {index}: {exc}") from exc
            if item.id in seen_ids:
                raise SchemaError(f"item {index}: duplicate id {item.id!r}")
            seen_ids.add(item.id)
            items.append(item)
    return items


def _item_from_dict(data: Mapping[str, Any], kind: TaskKind) -> BenchmarkItem:
    if not isinstance(data, Mapping):
        raise ValueError("expected an object")
    line_kind = data.get("task_kind")
    if line_kind is not None and TaskKind(line_kind) is not kind:
        raise ValueError(f"task_kind {line_kind!r} does not match requested {kind.value!r}")
    if "id" not in data:
        raise KeyError("'id'")
    question = data.get("question")
    if not isinstance(question, str) or not question:
        raise ValueError("'question' must be a non-empty string")
    gold = data.get("gold")
    if kind is TaskKind.YES_NO:
        gold = _coerce_yesno_gold(gold)
    elif kind is TaskKind.OPEN_ENDED:
        if not isinstance(gold, list):
            raise ValueError("'gold' must be a list of reference answers")
        gold = tuple(gold)
    return BenchmarkItem(
        id=str(data["id"]),
        question=question,
        task_kind=kind,
        gold=gold,
        choices=tuple(data.get("choices") or ()),
        image_ref=data.get("image_ref"),
    )


def _coerce_yesno_gold(gold: Any) -> bool:
    if isinstance(gold, bool):
        return gold
    if isinstance(gold, str) and gold.lower() in ("yes", "no"):
        return gold.lower() == "yes"
    raise ValueError("'gold' must be a boolean or 'yes'/'no'")


# --- converters from common public formats ---------------------------------
#
# Each converter maps one record of a well-known public benchmark dump to the
# native JSONL schema above. They convert shape only; no text is altered.


def convert_scienceqa(record: Mapping[str, Any], record_id: str) -> dict:
    """ScienceQA-style record: {"question", "choices": [...], "answer": index,
    optional "image"} → MultipleChoice item."""
    return {
        "id": record_id,
        "task_kind": TaskKind.MULTIPLE_CHOICE.value,
        "question": record["question"],
        "choices": list(record["choices"]),
        "gold": int(record["answer"]),
        "image_ref": record.get("image"),
    }


def convert_pope(record: Mapping[str, Any]) -> dict:
    """POPE-style record: {"question_id", "text", "label": "yes"/"no",
    optional "image"} → YesNo item."""
    return {
        "id": str(record["question_id"]),
        "task_kind": TaskKind.YES_NO.value,
        "question": record["text"],
        "gold": record["label"],
        "image_ref": record.get("image"),
    }


def convert_textvqa(record: Mapping[str, Any]) -> dict:
    """TextVQA-style record: {"question_id", "question", "answers": [ten
    human answers], optional "image_id"} → OpenEnded item keeping answer
    multiplicity (soft scoring depends on it)."""
    return {
        "id": str(record["question_id"]),
        "task_kind": TaskKind.OPEN_ENDED.value,
        "question": record["question"],
        "gold": list(record["answers"]),
        "image_ref": record.get("image_id"),
    }


def item_prompt(item: BenchmarkItem) -> str:
    """Prompt text sent to the model: the question, with lettered options
    appended for multiple choice unless the question already lists options
    on their own lines."""
    if item.task_kind is not TaskKind.MULTIPLE_CHOICE:
        return item.question
    if re.search(r"(?m)^[A-Ea-e][.)] ", item.question):
        return item.question
    lines = [item.question]
    lines.extend(
        f"{letter}. {choice}" for letter, choice in zip(_OPTION_LETTERS, item.choices)
    )
    return "\n".join(lines)


# --- answer parsing --------------------------------------------------------


def _tokens(raw: str) -> list[str]:
    return [t.strip(_TOKEN_TRIM) for t in raw.split()]


def _normalize_containment(text: str) -> str:
    folded = text.lower()
    folded = re.sub(r"[^\w\s]", " ", folded, flags=re.UNICODE)
    return " ".join(folded.split())


def parse_choice(raw: str, choices: Sequence[str]) -> Union[int, ParseFailure]:
    """Map raw model text to a choice index.

    Precedence: (1) an option letter A-E, case-insensitive, either as the
    first token or as the single distinct isolated letter anywhere, tolerant
    of surrounding punctuation; (2) unique containment of exactly one
    normalized choice text at token boundaries; (3) Unparsed.
    """
    if not choices:
        raise ValueError("choices must be non-empty")
    tokens = _tokens(raw)

    def letter_index(token: str) -> Optional[int]:
        if len(token) == 1 and token.upper() in _OPTION_LETTERS:
            index = _OPTION_LETTERS.index(token.upper())
            if index < len(choices):
                return index
        return None

    if tokens:
        first = letter_index(tokens[0])
        if first is not None:
            return first
    isolated = {i for t in tokens if (i := letter_index(t)) is not None}
    if len(isolated) == 1:
        return next(iter(isolated))

    normalized_raw = f" {_normalize_containment(raw)} "
    contained = [
        i
        for i, choice in enumerate(choices)
        if f" {_normalize_containment(choice)} " in normalized_raw
    ]
    if len(contained) == 1:
        return contained[0]
    return UNPARSED


def parse_yesno(raw: str, language: str = "en") -> Union[bool, ParseFailure]:
    """Map raw model text to a yes/no boolean.

    First token is checked against the language lexicon after lowercasing
    and punctuation stripping; failing that, the whole text must contain
    lexemes from exactly one side of the lexicon.
    """
    try:
        positives, negatives = YESNO_LEXICONS[language]
    except KeyError:
        raise ValueError(
            f"no yes/no lexicon for language {language!r}; "
            f"known: {sorted(YESNO_LEXICONS)}"
        ) from None
    tokens = [t.lower() for t in _tokens(raw)]
    if tokens:
        if tokens[0] in positives:
            return True
        if tokens[0] in negatives:
            return False
    has_positive = any(t in positives for t in tokens)
    has_negative = any(t in negatives for t in tokens)
    if has_positive and not has_negative:
        return True
    if has_negative and not has_positive:
        return False
    return UNPARSED


def _fold_diacritics(text: str) -> str:
    decomposed = unicodedata.normalize("NFD", text)
    return "".join(c for c in decomposed if not unicodedata.combining(c))


def normalize_answer(text: str, language: str = "en", fold_diacritics: bool = False) -> str:
    """Open-ended comparison form: lowercase, punctuation (apostrophes
    included) to spaces, language articles dropped, whitespace collapsed.
    Diacritics are kept unless folding is requested; they carry meaning."""
    folded = text.lower()
    if fold_diacritics:
        folded = _fold_diacritics(folded)
    folded = re.sub(r"[^\w\s]", " ", folded, flags=re.UNICODE)
    articles = ARTICLES.get(language, frozenset())
    words = [w for w in folded.split() if w not in articles]
    return " ".join(words)


def score_open_ended(
    raw: str,
    references: Sequence[str],
    language: str = "en",
    fold_diacritics: bool = False,
    soft: bool = False,
) -> float:
    """Score an open-ended answer against reference answers.

    Default: normalized exact match against any reference, giving 0 or 1.
    Soft mode: min(matching references / 3, 1), where references are counted
    with multiplicity (the usual ten-annotator VQA convention).
    """
    if not references:
        raise ValueError("references must be non-empty")
    needle = normalize_answer(raw, language, fold_diacritics)
    matches = sum(
        1
        for ref in references
        if normalize_answer(ref, language, fold_diacritics) == needle
    )
    if soft:
        return min(matches / 3.0, 1.0)
    return 1.0 if matches else 0.0


# --- evaluation ------------------------------------------------------------


def evaluate(
    items: Sequence[BenchmarkItem],
    answer_fn: Callable[[BenchmarkItem], str],
    kind: Union[TaskKind, str],
    benchmark_name: str = "benchmark",
    language: str = "en",
    fold_diacritics: bool = False,
    soft_open_ended: bool = False,
    refusal_lexicon: Iterable[str] = DEFAULT_REFUSAL_LEXICON,
    max_in_flight: int = 4,
) -> EvalOutcome:
    """Collect answers for every item, parse and score them.

    answer_fn calls fan out over a bounded thread pool; a raised exception
    marks only its own item (verdict=error, scored 0). Scoring itself is a
    pure fold in input order. Accuracy is 100 * (sum of item scores) / n; in
    exact mode every score is 0 or 1 so this equals the correct-item share.
    """
    kind = TaskKind(kind)
    for item in items:
        if item.task_kind is not kind:
            raise ValueError(f"item {item.id!r} is {item.task_kind.value}, not {kind.value}")
    if not items:
        raise ValueError("no items to evaluate")

    refusal_lexicon = tuple(refusal_lexicon)
    raw_texts: list[Optional[str]] = [None] * len(items)
    errors: list[Optional[str]] = [None] * len(items)

    def ask(index: int) -> None:
        try:
            raw_texts[index] = answer_fn(items[index])
        except Exception as exc:  # answer_fn is caller code; isolate failures
            logger.warning("answer_fn failed on item %s: %s", items[index].id, exc)
            errors[index] = f"{type(exc).__name__}: {exc}"

    workers = max(1, min(max_in_flight, len(items)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(ask, range(len(items))))

    verdicts: list[ItemVerdict] = []
    yes_count = 0
    unparsed_count = 0
    refusal_count = 0
    error_count = 0
    for item, raw, error in zip(items, raw_texts, errors):
        if error is not None:
            error_count += 1
            verdicts.append(
                ItemVerdict(item.id, None, None, Verdict.ERROR, 0.0, error=error)
            )
            continue
        assert raw is not None
        if any(phrase in raw.lower() for phrase in refusal_lexicon):
            refusal_count += 1
        parsed: Any
        score: float
        if kind is TaskKind.MULTIPLE_CHOICE:
            parsed = parse_choice(raw, item.choices)
            score = 1.0 if parsed == item.gold else 0.0
        elif kind is TaskKind.YES_NO:
            parsed = parse_yesno(raw, language)
            if parsed is True:
                yes_count += 1
            score = 1.0 if parsed == item.gold else 0.0
        else:
            score = score_open_ended(
                raw, item.gold, language, fold_diacritics, soft_open_ended
            )
            parsed = normalize_answer(raw, language, fold_diacritics)
        if isinstance(parsed, ParseFailure):
            unparsed_count += 1
            verdict = Verdict.UNPARSED
        elif score >= 1.0:
            verdict = Verdict.CORRECT
        elif score > 0.0:
            verdict = Verdict.PARTIAL
        else:
            verdict = Verdict.INCORRECT
        verdicts.append(ItemVerdict(item.id, raw, parsed, verdict, score))

    n = len(items)
    diagnostics: dict[str, float] = {
        "unparsed_rate": unparsed_count / n,
        "refusal_rate": refusal_count / n,
        "error_rate": error_count / n,
    }
    if kind is TaskKind.YES_NO:
        diagnostics["yes_rate"] = yes_count / n
    return EvalOutcome(
        benchmark_name=benchmark_name,
        task_kind=kind,
        n=n,
        accuracy=100.0 * sum(v.score for v in verdicts) / n,
        per_item=tuple(verdicts),
        diagnostics=diagnostics,
        scoring_mode="soft" if (kind is TaskKind.OPEN_ENDED and soft_open_ended) else "exact",
    )


# --- reporting -------------------------------------------------------------


def per_item_csv(outcome: EvalOutcome) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["item_id", "raw_text", "parsed", "verdict", "score", "error"])
    for v in outcome.per_item:
        d = v.to_dict()
        writer.writerow(
            [d["item_id"], d["raw_text"], d["parsed"], d["verdict"], d["score"], d["error"]]
        )
    return buffer.getvalue()


def outcome_json(outcome: EvalOutcome) -> str:
    return json.dumps(outcome.to_dict(), ensure_ascii=False, indent=2) + "\n"


def format_accuracy_table(rows: Mapping[str, Mapping[str, float]]) -> str:
    """Model × benchmark accuracy grid with 2-decimal cells."""
    benchmarks: list[str] = []
    for per_bench in rows.values():
        for name in per_bench:
            if name not in benchmarks:
                benchmarks.append(name)
    model_width = max([len("model")] + [len(m) for m in rows])
    widths = [max(len(b), 6) for b in benchmarks]
    header = "  ".join(
        [f"{'model':<{model_width}}"]
        + [f"{b:>{w}}" for b, w in zip(benchmarks, widths)]
    )
    lines = [header]
    for model, per_bench in rows.items():
        cells = [
            f"{per_bench[b]:>{w}.2f}" if b in per_bench else " " * w
            for b, w in zip(benchmarks, widths)
        ]
        lines.append("  ".join([f"{model:<{model_width}}"] + cells))
    return "\n".join(lines)
