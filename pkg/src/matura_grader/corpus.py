"""Exam corpus and rubric loading.

One JSON file per exam (schema below), one JSON file per text-type rubric.
Records are validated on load — structural problems and grades inconsistent
with the grading arithmetic are reported per file and excluded — and the
resulting corpus is immutable.

Exam schema::

    {"id": str, "year": int, "pack": str,
     "tasks": [{"text_type": str, "body": str}, {...}],
     "gold": {"task1": {"content": 1-5, "structure": 1-5,
                        "language_norms": 1-5, "style_expression": 1-5},
              "task2": {...},
              "k1": int, "k2": int, "k3_1": int, "k3_2": int, "k3": int,
              "final": int | "fail"}}

Rubric schema::

    {"text_type": str, "summary": str,
     "dimensions": {"content": {"1": str, "2": str, "3": str, "4": str}, ...}}
"""

from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

from .grading import DIMENSIONS, FAIL, HALF_TO_BETTER, VALID_GRADES, ExamOutcome, aggregate

TEXT_TYPES = (
    "Discussion Essay",
    "Commentary",
    "Letter to the Editor",
    "Opinion Speech",
    "Text Analysis",
    "Literary Interpretation",
    "Summary",
)

_HYPHEN_BREAK = re.compile(r"(?<=\w)-\n(?=\w)")
_PARAGRAPH_SPLIT = re.compile(r"\n\s*\n")


def normalize_text(raw: str) -> str:
    """Whitespace/control-character normalization applied to every task body.

    Collapses whitespace runs to single spaces, joins soft line-break
    hyphenation ("wor-\\nt" -> "wort"), strips control characters, and keeps
    paragraph breaks as single blank lines. Idempotent.
    """
    text = raw.replace("\r\n", "\n").replace("\r", "\n")
    text = "".join(ch for ch in text if ch == "\n" or unicodedata.category(ch) != "Cc")
    text = _HYPHEN_BREAK.sub("", text)
    paragraphs = [" ".join(p.split()) for p in _PARAGRAPH_SPLIT.split(text)]
    return "\n\n".join(p for p in paragraphs if p)


@dataclass(frozen=True)
class TaskText:
    text_type: str
    body: str
    word_count: int


@dataclass(frozen=True)
class TaskGrades:
    content: int
    structure: int
    language_norms: int
    style_expression: int

    def as_dict(self) -> dict[str, int]:
        return {dim: getattr(self, dim) for dim in DIMENSIONS}


@dataclass(frozen=True)
class GoldGrades:
    task1: TaskGrades
    task2: TaskGrades
    k1: int
    k2: int
    k3_1: int
    k3_2: int
    k3: int
    final: int | str  # 1..5 or FAIL

    def sub_dimensions(self) -> dict[str, dict[str, int]]:
        return {"task1": self.task1.as_dict(), "task2": self.task2.as_dict()}

    def final_as_grade(self) -> int:
        return 5 if self.final == FAIL else int(self.final)


@dataclass(frozen=True)
class ExamRecord:
    id: str
    year: int
    pack: str
    tasks: tuple[TaskText, TaskText]
    gold: GoldGrades

    def task(self, position: int) -> TaskText:
        """Task text at position 1 or 2."""
        return self.tasks[position - 1]

    def recomputed_outcome(self, half: str = HALF_TO_BETTER) -> ExamOutcome:
        return aggregate(self.gold.sub_dimensions(), half)


@dataclass(frozen=True)
class CorpusError:
    file: str
    reason: str


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    violations: tuple[str, ...] = ()


@dataclass(frozen=True)
class Corpus:
    records: tuple[ExamRecord, ...]
    errors: tuple[CorpusError, ...] = ()

    @cached_property
    def by_id(self) -> dict[str, ExamRecord]:
        return {r.id: r for r in self.records}

    def __len__(self) -> int:
        return len(self.records)

    def get(self, exam_id: str) -> ExamRecord:
        try:
            return self.by_id[exam_id]
        except KeyError:
            raise KeyError(f"no exam with id {exam_id!r}") from None

    def pool(self, year: int, pack: str) -> tuple[ExamRecord, ...]:
        """All exams of one (year, pack) task pack, in id order."""
        return tuple(sorted((r for r in self.records if r.year == year and r.pack == pack), key=lambda r: r.id))

    def packs(self) -> tuple[tuple[int, str], ...]:
        return tuple(sorted({(r.year, r.pack) for r in self.records}))

    def to_json(self) -> str:
        """Canonical serialization; byte-stable across reloads of one directory."""
        payload = [_record_to_dict(r) for r in self.records]
        return json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=1)


def _record_to_dict(r: ExamRecord) -> dict:
    return {
        "id": r.id,
        "year": r.year,
        "pack": r.pack,
        "tasks": [{"text_type": t.text_type, "body": t.body} for t in r.tasks],
        "gold": {
            "task1": r.gold.task1.as_dict(),
            "task2": r.gold.task2.as_dict(),
            "k1": r.gold.k1,
            "k2": r.gold.k2,
            "k3_1": r.gold.k3_1,
            "k3_2": r.gold.k3_2,
            "k3": r.gold.k3,
            "final": r.gold.final,
        },
    }


def _require(data: dict, key: str, kind: type, where: str) -> object:
    if key not in data:
        raise ValueError(f"missing field {where}{key}")
    value = data[key]
    if kind is int and (not isinstance(value, int) or isinstance(value, bool)):
        raise ValueError(f"field {where}{key} must be an integer, got {value!r}")
    if kind is not int and not isinstance(value, kind):
        raise ValueError(f"field {where}{key} must be {kind.__name__}, got {type(value).__name__}")
    return value


def _parse_task_grades(data: dict, where: str) -> TaskGrades:
    return TaskGrades(**{dim: _require(data, dim, int, where) for dim in DIMENSIONS})


def parse_record(data: dict) -> ExamRecord:
    """Structural parse of one exam JSON document. Raises ValueError."""
    exam_id = _require(data, "id", str, "")
    year = _require(data, "year", int, "")
    pack = _require(data, "pack", str, "")
    tasks_raw = _require(data, "tasks", list, "")
    if len(tasks_raw) != 2:
        raise ValueError(f"expected exactly 2 tasks, got {len(tasks_raw)}")
    tasks = []
    for i, task in enumerate(tasks_raw, start=1):
        if not isinstance(task, dict):
            raise ValueError(f"tasks[{i}] must be an object")
        text_type = _require(task, "text_type", str, f"tasks[{i}].")
        body = normalize_text(_require(task, "body", str, f"tasks[{i}]."))
        tasks.append(TaskText(text_type=text_type, body=body, word_count=len(body.split())))
    gold_raw = _require(data, "gold", dict, "")
    final = gold_raw.get("final")
    if final is None:
        raise ValueError("missing field gold.final")
    if final != FAIL and (not isinstance(final, int) or isinstance(final, bool)):
        raise ValueError(f'field gold.final must be an integer or "{FAIL}", got {final!r}')
    gold = GoldGrades(
        task1=_parse_task_grades(_require(gold_raw, "task1", dict, "gold."), "gold.task1."),
        task2=_parse_task_grades(_require(gold_raw, "task2", dict, "gold."), "gold.task2."),
        k1=_require(gold_raw, "k1", int, "gold."),
        k2=_require(gold_raw, "k2", int, "gold."),
        k3_1=_require(gold_raw, "k3_1", int, "gold."),
        k3_2=_require(gold_raw, "k3_2", int, "gold."),
        k3=_require(gold_raw, "k3", int, "gold."),
        final=final,
    )
    return ExamRecord(id=exam_id, year=year, pack=pack, tasks=(tasks[0], tasks[1]), gold=gold)


def validate_record(record: ExamRecord, half: str = HALF_TO_BETTER) -> ValidationResult:
    """Content validation: grade ranges, text types, stored-aggregate consistency.

    Violations are data, not exceptions.
    """
    violations: list[str] = []
    for position in (1, 2):
        task = record.task(position)
        if task.text_type not in TEXT_TYPES:
            violations.append(f"unknown text_type for task {position}: {task.text_type!r}")
        if not task.body:
            violations.append(f"task {position} body is empty after normalization")
        grades = getattr(record.gold, f"task{position}")
        for dim in DIMENSIONS:
            value = getattr(grades, dim)
            if value not in VALID_GRADES:
                violations.append(f"grade out of range: task{position}.{dim} = {value}")
    for name in ("k1", "k2", "k3_1", "k3_2", "k3"):
        value = getattr(record.gold, name)
        if value not in VALID_GRADES:
            violations.append(f"grade out of range: {name} = {value}")
    if record.gold.final != FAIL and record.gold.final not in VALID_GRADES:
        violations.append(f"grade out of range: final = {record.gold.final}")
    if violations:
        return ValidationResult(False, tuple(violations))

    expected = aggregate(record.gold.sub_dimensions(), half)
    stored = (record.gold.k1, record.gold.k2, record.gold.k3_1, record.gold.k3_2, record.gold.k3)
    recomputed = (
        expected.sections.k1,
        expected.sections.k2,
        expected.sections.k3_1,
        expected.sections.k3_2,
        expected.sections.k3,
    )
    for name, got, want in zip(("k1", "k2", "k3_1", "k3_2", "k3"), stored, recomputed):
        if got != want:
            violations.append(f"stored {name} inconsistent with recomputation (expected {want}, stored {got})")
    if record.gold.final != expected.final:
        violations.append(
            f"stored final inconsistent with recomputation (expected {expected.final}, stored {record.gold.final})"
        )
    return ValidationResult(not violations, tuple(violations))


def load_corpus(path: str | Path, trust_stored_grades: bool = False, half: str = HALF_TO_BETTER) -> Corpus:
    """Load every ``*.json`` exam file under ``path``.

    Invalid files become error entries instead of records; with
    ``trust_stored_grades`` records whose stored aggregates disagree with
    recomputation are kept as stored.
    """
    directory = Path(path)
    if not directory.is_dir():
        raise FileNotFoundError(f"corpus directory not found: {directory}")
    records: list[ExamRecord] = []
    errors: list[CorpusError] = []
    seen: set[str] = set()
    for file in sorted(directory.glob("*.json")):
        try:
            data = json.loads(file.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            errors.append(CorpusError(file.name, f"unreadable JSON: {exc}"))
            continue
        try:
            record = parse_record(data)
        except ValueError as exc:
            errors.append(CorpusError(file.name, str(exc)))
            continue
        if record.id in seen:
            errors.append(CorpusError(file.name, f"duplicate exam id {record.id!r}"))
            continue
        result = validate_record(record, half)
        if not result.ok:
            consistency_only = all("inconsistent with recomputation" in v for v in result.violations)
            if not (trust_stored_grades and consistency_only):
                errors.append(CorpusError(file.name, "; ".join(result.violations)))
                continue
        seen.add(record.id)
        records.append(record)
    return Corpus(records=tuple(records), errors=tuple(errors))


@dataclass(frozen=True)
class RubricSet:
    """Grade descriptors per text type: type -> dimension -> grade (1..4) -> text.

    Grade 5 has no descriptor; it marks failure to meet the grade-4 bar.
    """

    summaries: dict[str, str] = field(default_factory=dict)
    descriptors: dict[str, dict[str, dict[int, str]]] = field(default_factory=dict)

    def summary(self, text_type: str) -> str:
        if text_type not in self.summaries:
            raise KeyError(f"no rubric for text type {text_type!r}")
        return self.summaries[text_type]

    def descriptor(self, text_type: str, dimension: str, grade: int) -> str:
        try:
            return self.descriptors[text_type][dimension][grade]
        except KeyError:
            raise KeyError(f"no rubric descriptor for ({text_type!r}, {dimension!r}, grade {grade})") from None

    def covers(self, text_type: str) -> bool:
        return text_type in self.descriptors and all(
            grade in self.descriptors[text_type].get(dim, {}) for dim in DIMENSIONS for grade in (1, 2, 3, 4)
        )


def load_rubrics(path: str | Path) -> RubricSet:
    """Load all rubric JSON files in a directory into one RubricSet."""
    directory = Path(path)
    if not directory.is_dir():
        raise FileNotFoundError(f"rubric directory not found: {directory}")
    summaries: dict[str, str] = {}
    descriptors: dict[str, dict[str, dict[int, str]]] = {}
    for file in sorted(directory.glob("*.json")):
        data = json.loads(file.read_text(encoding="utf-8"))
        text_type = _require(data, "text_type", str, "")
        if text_type not in TEXT_TYPES:
            raise ValueError(f"{file.name}: unknown text_type {text_type!r}")
        summaries[text_type] = _require(data, "summary", str, "")
        dims_raw = _require(data, "dimensions", dict, "")
        dims: dict[str, dict[int, str]] = {}
        for dim in DIMENSIONS:
            if dim not in dims_raw:
                raise ValueError(f"{file.name}: missing rubric dimension {dim!r}")
            table = {}
            for grade in (1, 2, 3, 4):
                key = str(grade)
                if key not in dims_raw[dim]:
                    raise ValueError(f"{file.name}: missing descriptor for ({text_type}, {dim}, grade {grade})")
                table[grade] = dims_raw[dim][key]
            dims[dim] = table
        descriptors[text_type] = dims
    return RubricSet(summaries=summaries, descriptors=descriptors)
