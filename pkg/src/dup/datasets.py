"""Benchmark loading: ten known datasets plus custom files, one Problem record.

Public mirrors of these benchmarks disagree on field names, so each known
dataset carries a small field map; a manifest file can override any of it.
Input formats are line-delimited JSON and whole-file JSON arrays (plus the
common {"examples": [...]} wrapper object).
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Any

from .exceptions import DatasetFormatError, InvalidInputError
from .grading import NormalizedAnswer
from .prompts import AnswerType

log = logging.getLogger(__name__)

__all__ = [
    "Problem",
    "FieldMap",
    "DatasetSpec",
    "DATASET_SPECS",
    "canonical_dataset_id",
    "load_dataset",
    "load_manifest",
    "parse_gold_answer",
]

GOLD_DELIMITER = "#### "

_WRAPPER_KEYS = ("examples", "data", "instances", "questions", "rows")


@dataclass(frozen=True)
class FieldMap:
    """Where to find each Problem field inside a raw record.

    Paths are dot-separated for nested records. Multiple question paths are
    joined with a single space (body + question style files).
    """

    question: tuple[str, ...] = ("question",)
    answer: str = "answer"
    id: str | None = None
    options: str | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "FieldMap":
        question = data.get("question", ("question",))
        if isinstance(question, str):
            question = (question,)
        return cls(
            question=tuple(question),
            answer=data.get("answer", "answer"),
            id=data.get("id"),
            options=data.get("options"),
        )


@dataclass(frozen=True)
class DatasetSpec:
    answer_type: AnswerType
    expected_count: int | None = None
    field_map: FieldMap = field(default_factory=FieldMap)


DATASET_SPECS: dict[str, DatasetSpec] = {
    "gsm8k": DatasetSpec(AnswerType.NUMBER, 1319),
    "multiarith": DatasetSpec(
        AnswerType.NUMBER, 600, FieldMap(question=("sQuestion",), answer="lSolutions", id="iIndex")
    ),
    "addsub": DatasetSpec(
        AnswerType.NUMBER, 395, FieldMap(question=("sQuestion",), answer="lSolutions", id="iIndex")
    ),
    "svamp": DatasetSpec(
        AnswerType.NUMBER, 1000, FieldMap(question=("Body", "Question"), answer="Answer", id="ID")
    ),
    "singleeq": DatasetSpec(
        AnswerType.NUMBER, 508, FieldMap(question=("sQuestion",), answer="lSolutions", id="iIndex")
    ),
    "aqua": DatasetSpec(
        AnswerType.OPTION, 254, FieldMap(question=("question",), answer="correct", options="options")
    ),
    "last_letters": DatasetSpec(AnswerType.STRING, 500),
    "coin_flip": DatasetSpec(AnswerType.YES_NO, 500),
    "strategyqa": DatasetSpec(AnswerType.YES_NO, 2290, FieldMap(id="qid")),
    "csqa": DatasetSpec(
        AnswerType.OPTION,
        1221,
        FieldMap(question=("question.stem",), answer="answerKey", options="question.choices", id="id"),
    ),
}


@dataclass(frozen=True)
class Problem:
    """One benchmark item in unified form."""

    id: str
    dataset: str
    question: str
    gold_raw: str
    gold: NormalizedAnswer
    answer_type: AnswerType
    options: tuple[tuple[str, str], ...] | None = None

    def __post_init__(self):
        if not self.question:
            raise InvalidInputError("question must be non-empty")
        if self.gold.kind is not self.answer_type:
            raise InvalidInputError("gold kind must match answer_type")
        if self.answer_type is AnswerType.OPTION:
            if self.options is None or len(self.options) < 2:
                raise InvalidInputError("option problems need at least 2 options")
            letters = [letter for letter, _ in self.options]
            if len(set(letters)) != len(letters):
                raise InvalidInputError("option letters must be distinct")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "dataset": self.dataset,
            "question": self.question,
            "gold_raw": self.gold_raw,
            "gold": self.gold.to_dict(),
            "answer_type": self.answer_type.value,
            "options": [list(pair) for pair in self.options] if self.options else None,
        }


def canonical_dataset_id(name: str) -> str:
    return re.sub(r"[\s\-]+", "_", name.strip().lower())


def parse_gold_answer(raw: str, answer_type: AnswerType) -> NormalizedAnswer:
    """Parse a gold label string per its answer type.

    NUMBER honours the "#### " delimiter convention (token after the final
    delimiter, commas stripped); OPTION accepts a single letter A-E with
    optional decoration; YES_NO accepts yes/no/true/false; STRING trims and
    lowercases.
    """
    if not raw:
        raise DatasetFormatError("empty gold answer")
    text = raw.strip()
    if answer_type is AnswerType.NUMBER:
        if GOLD_DELIMITER in text:
            text = text.rsplit(GOLD_DELIMITER, 1)[1].strip()
            text = text.split()[0] if text.split() else ""
        token = text.replace(",", "").rstrip(".")
        try:
            if "/" in token:
                numerator, denominator = token.split("/", 1)
                value = Decimal(numerator) / Decimal(denominator)
            else:
                value = Decimal(token)
        except (InvalidOperation, ValueError, ZeroDivisionError) as exc:
            raise DatasetFormatError(f"gold is not a number: {raw!r}") from exc
        return NormalizedAnswer(kind=AnswerType.NUMBER, number=value)
    if answer_type is AnswerType.OPTION:
        letters = re.findall(r"[A-Ea-e]", text)
        if len(text.strip("()[]. ")) != 1 or not letters:
            raise DatasetFormatError(f"gold is not a single option letter: {raw!r}")
        return NormalizedAnswer(kind=AnswerType.OPTION, option=letters[0].upper())
    if answer_type is AnswerType.YES_NO:
        lowered = text.lower().strip(".")
        mapping = {"yes": "yes", "true": "yes", "no": "no", "false": "no"}
        if lowered not in mapping:
            raise DatasetFormatError(f"gold is not yes/no: {raw!r}")
        return NormalizedAnswer(kind=AnswerType.YES_NO, yes_no=mapping[lowered])
    value = text.lower()
    if not value:
        raise DatasetFormatError("empty string gold")
    return NormalizedAnswer(kind=AnswerType.STRING, string=value)


def _resolve_path(record: dict, path: str) -> Any:
    value: Any = record
    for part in path.split("."):
        if not isinstance(value, dict) or part not in value:
            raise KeyError(path)
        value = value[part]
    return value


def _raw_to_text(value: Any) -> str:
    if isinstance(value, list):
        if not value:
            raise ValueError("empty answer list")
        value = value[0]
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float) and value == int(value):
        return str(int(value))
    return str(value)


def _parse_options(value: Any) -> tuple[tuple[str, str], ...]:
    pairs: list[tuple[str, str]] = []
    for item in value:
        if isinstance(item, dict):  # {"label": "A", "text": "..."}
            pairs.append((str(item["label"]).upper(), str(item["text"])))
        else:  # "A)21" / "A) 21"
            text = str(item)
            letter, _, rest = text.partition(")")
            pairs.append((letter.strip("( ").upper(), rest.strip()))
    return tuple(pairs)


def _format_choices(options: tuple[tuple[str, str], ...]) -> str:
    return "Answer Choices: " + " ".join(f"({letter}) {text}" for letter, text in options)


def _read_records(path: Path) -> list[tuple[int, dict]]:
    """Return (record_number, record) pairs; record_number is 1-based."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DatasetFormatError(f"cannot read dataset file {path}: {exc}") from exc
    stripped = text.strip()
    if not stripped:
        return []
    if stripped[0] == "[":
        try:
            items = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise DatasetFormatError(f"invalid JSON array in {path}: {exc}") from exc
        return [(i + 1, item) for i, item in enumerate(items)]
    # A wrapper object can be compact enough to parse as one JSONL line, so
    # check for it before the line-delimited pass.
    try:
        whole = json.loads(stripped)
    except json.JSONDecodeError:
        whole = None
    if isinstance(whole, dict):
        for key in _WRAPPER_KEYS:
            if isinstance(whole.get(key), list):
                return [(i + 1, item) for i, item in enumerate(whole[key])]
    records: list[tuple[int, dict]] = []
    bad_line: tuple[int, json.JSONDecodeError] | None = None
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            records.append((line_no, json.loads(line)))
        except json.JSONDecodeError as exc:
            bad_line = (line_no, exc)
            break
    if bad_line is None:
        return records
    # Not line-delimited: maybe a single wrapper object {"examples": [...]}.
    try:
        obj = json.loads(stripped)
    except json.JSONDecodeError:
        line_no, exc = bad_line
        raise DatasetFormatError(f"{path}:{line_no}: invalid JSON: {exc}") from exc
    if isinstance(obj, dict):
        for key in _WRAPPER_KEYS:
            if isinstance(obj.get(key), list):
                return [(i + 1, item) for i, item in enumerate(obj[key])]
    raise DatasetFormatError(f"{path}: JSON object has no recognizable record list")


def load_dataset(
    path: str | Path,
    dataset: str,
    answer_type: AnswerType | None = None,
    field_map: FieldMap | None = None,
) -> list[Problem]:
    """Load a dataset file into Problems, in file order.

    `dataset` must be a known identifier or any other name with an explicit
    `answer_type`. For known datasets the loaded count is checked against
    the expected test-set size; a mismatch logs a warning (public mirrors
    drift) but never fails the load.
    """
    dataset_id = canonical_dataset_id(dataset)
    spec = DATASET_SPECS.get(dataset_id)
    if spec is None and answer_type is None:
        raise DatasetFormatError(
            f"unknown dataset {dataset!r}; pass an explicit answer_type for custom data"
        )
    resolved_type = answer_type or spec.answer_type
    resolved_map = field_map or (spec.field_map if spec else FieldMap())

    problems: list[Problem] = []
    for record_no, record in _read_records(Path(path)):
        if not isinstance(record, dict):
            raise DatasetFormatError(f"{path}:{record_no}: record is not an object")
        try:
            question_parts = [str(_resolve_path(record, p)).strip() for p in resolved_map.question]
            question = " ".join(part for part in question_parts if part)
            gold_raw = _raw_to_text(_resolve_path(record, resolved_map.answer))
        except (KeyError, ValueError) as exc:
            raise DatasetFormatError(f"{path}:{record_no}: missing field {exc}") from exc
        options = None
        if resolved_map.options is not None:
            try:
                options = _parse_options(_resolve_path(record, resolved_map.options))
            except (KeyError, TypeError) as exc:
                raise DatasetFormatError(f"{path}:{record_no}: bad options: {exc}") from exc
            if options and _format_choices(options) not in question:
                question = f"{question}\n{_format_choices(options)}"
        if resolved_map.id is not None:
            try:
                problem_id = str(_resolve_path(record, resolved_map.id))
            except KeyError:
                problem_id = f"{dataset_id}-{record_no:05d}"
        else:
            problem_id = f"{dataset_id}-{record_no:05d}"
        try:
            gold = parse_gold_answer(gold_raw, resolved_type)
        except DatasetFormatError as exc:
            raise DatasetFormatError(f"{path}:{record_no}: {exc}") from exc
        problems.append(
            Problem(
                id=problem_id,
                dataset=dataset_id,
                question=question,
                gold_raw=gold_raw,
                gold=gold,
                answer_type=resolved_type,
                options=options,
            )
        )

    log.info("loaded %d problems from %s (%s)", len(problems), path, dataset_id)
    if spec is not None and spec.expected_count is not None and len(problems) != spec.expected_count:
        log.warning(
            "%s: expected %d problems, loaded %d (public mirrors drift; continuing)",
            dataset_id,
            spec.expected_count,
            len(problems),
        )
    return problems


def load_manifest(path: str | Path) -> dict[str, dict]:
    """Read a manifest mapping dataset id -> {path, answer_type?, field_map?}.

    Paths are resolved relative to the manifest file's directory.
    """
    manifest_path = Path(path)
    try:
        data = json.loads(manifest_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DatasetFormatError(f"cannot read manifest {path}: {exc}") from exc
    entries = data.get("datasets", data)
    if not isinstance(entries, dict):
        raise DatasetFormatError(f"manifest {path}: expected an object of datasets")
    resolved: dict[str, dict] = {}
    for name, entry in entries.items():
        if not isinstance(entry, dict) or "path" not in entry:
            raise DatasetFormatError(f"manifest {path}: entry {name!r} needs a 'path'")
        entry = dict(entry)
        entry["path"] = str((manifest_path.parent / entry["path"]).resolve())
        resolved[canonical_dataset_id(name)] = entry
    return resolved


def load_from_manifest(manifest: dict[str, dict], dataset: str) -> list[Problem]:
    """Load one dataset through manifest settings."""
    dataset_id = canonical_dataset_id(dataset)
    if dataset_id not in manifest:
        raise DatasetFormatError(f"dataset {dataset!r} not in manifest")
    entry = manifest[dataset_id]
    answer_type = AnswerType(entry["answer_type"]) if "answer_type" in entry else None
    field_map = FieldMap.from_dict(entry["field_map"]) if "field_map" in entry else None
    return load_dataset(entry["path"], dataset_id, answer_type=answer_type, field_map=field_map)
