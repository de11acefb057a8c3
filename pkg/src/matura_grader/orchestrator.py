"""Conversation building and turn driving.

Zero-shot scripts put reference texts (with their gold grades) and the
candidate's two tasks into a single user message. Few-shot scripts walk the
model through calibration rounds — guess the grades of a reference text,
receive the true grades — in a configurable grade order before the
candidate is presented. The candidate's own gold grades never enter any
outbound message.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace

from .clients import ChatClient, ChatTransportError
from .corpus import ExamRecord, RubricSet
from .grading import DIMENSIONS, HALF_TO_BETTER, ExamOutcome, aggregate
from .prompts import (
    build_system_prompt,
    context_intro,
    reformat_instruction,
    render_calibration_message,
    render_candidate_block,
    render_context_blocks,
    render_reveal_gold,
)
from .retrieval import ContextSelection

logger = logging.getLogger(__name__)

ZERO_SHOT = "zero_shot"
FEW_SHOT = "few_shot"
FEW_SHOT_COT = "few_shot_cot"

# Presentation order of calibration grade levels.
ORDERING_BASE = "base"
ORDERING_INVERTED = "inverted"
ORDERING_MIXED_15243 = "mixed15243"
ORDERING_MIXED_153 = "mixed153"

_MIXED_SEQUENCES = {
    ORDERING_MIXED_15243: (1, 5, 2, 4, 3),
    ORDERING_MIXED_153: (1, 5, 3),
}

ORDERING_SCHEMES = (ORDERING_BASE, ORDERING_INVERTED, ORDERING_MIXED_15243, ORDERING_MIXED_153)

CHARS_PER_TOKEN = 4


def ordering_sequence(scheme: str, levels: set[int]) -> tuple[int, ...]:
    """The grade sequence a scheme prescribes for the available levels."""
    if scheme == ORDERING_BASE:
        return tuple(sorted(levels))
    if scheme == ORDERING_INVERTED:
        return tuple(sorted(levels, reverse=True))
    if scheme in _MIXED_SEQUENCES:
        return tuple(g for g in _MIXED_SEQUENCES[scheme] if g in levels)
    raise ValueError(f"unknown ordering scheme {scheme!r}")


@dataclass(frozen=True)
class StaticUser:
    content: str


@dataclass(frozen=True)
class CalibrationUser:
    content: str
    exam_id: str
    grade_level: int
    positions: tuple[int, ...]


@dataclass(frozen=True)
class AwaitModelGuess:
    pass


@dataclass(frozen=True)
class RevealGold:
    content: str
    exam_id: str


@dataclass(frozen=True)
class CandidateUser:
    content: str


Turn = StaticUser | CalibrationUser | AwaitModelGuess | RevealGold | CandidateUser


@dataclass(frozen=True)
class ConversationScript:
    system: str
    turns: tuple[Turn, ...]
    mode: str
    candidate_id: str
    dropped_context: int = 0

    def outbound_texts(self) -> tuple[str, ...]:
        """Everything this script can send to the model (for leakage checks)."""
        return (self.system,) + tuple(
            turn.content for turn in self.turns if not isinstance(turn, AwaitModelGuess)
        )


@dataclass(frozen=True)
class CalibrationItem:
    """One calibration round: a reference exam shown at a grade level,
    covering both tasks or a single one."""

    exam: ExamRecord
    level: int
    positions: tuple[int, ...] = (1, 2)


def _estimated_tokens(*texts: str) -> int:
    return sum(len(t) for t in texts) // CHARS_PER_TOKEN


def build_zero_shot(
    candidate: ExamRecord,
    ctx: ContextSelection,
    rubric: RubricSet,
    token_budget: int | None = None,
) -> ConversationScript:
    """System prompt plus one user message: references, then the candidate.

    When the rendered script would exceed the token budget (estimated at 4
    characters per token), reference texts are dropped from the end of the
    context list until it fits; drops are logged and recorded.
    """
    system = build_system_prompt(rubric, (candidate.task(1).text_type, candidate.task(2).text_type))
    entries = list(ctx.entries)
    dropped = 0

    def user_message() -> str:
        blocks = render_context_blocks(replace(ctx, entries=tuple(entries)), candidate)
        parts = ([context_intro()] + blocks) if blocks else []
        parts.append(render_candidate_block(candidate))
        return "\n\n".join(parts)

    content = user_message()
    if token_budget is not None:
        while entries and _estimated_tokens(system, content) > token_budget:
            entries.pop()
            dropped += 1
            content = user_message()
        if dropped:
            logger.warning(
                "dropped %d context text(s) for %s to fit the %d-token budget",
                dropped,
                candidate.id,
                token_budget,
            )
    return ConversationScript(
        system=system,
        turns=(CandidateUser(content),),
        mode=ZERO_SHOT,
        candidate_id=candidate.id,
        dropped_context=dropped,
    )


def build_few_shot_script(
    calib: list[CalibrationItem],
    scheme: str,
    candidate: ExamRecord,
    rubric: RubricSet,
    cot: bool = False,
    token_budget: int | None = None,
) -> ConversationScript:
    """Calibration rounds in scheme order, then the candidate.

    Items that cover different task subsets are grouped (all task-1 rounds
    before all task-2 rounds); each group follows the scheme's grade order.
    """
    if not calib:
        raise ValueError("few-shot script needs at least one calibration exam")
    system = build_system_prompt(
        rubric, (candidate.task(1).text_type, candidate.task(2).text_type), cot=cot
    )

    groups: dict[tuple[int, ...], list[CalibrationItem]] = {}
    for item in calib:
        groups.setdefault(item.positions, []).append(item)

    turns: list[Turn] = []
    index = 0
    for positions, items in groups.items():
        sequence = ordering_sequence(scheme, {item.level for item in items})
        for level in sequence:
            for item in items:
                if item.level != level:
                    continue
                index += 1
                turns.append(
                    CalibrationUser(
                        content=render_calibration_message(index, item.exam, positions),
                        exam_id=item.exam.id,
                        grade_level=item.level,
                        positions=positions,
                    )
                )
                turns.append(AwaitModelGuess())
                turns.append(RevealGold(content=render_reveal_gold(item.exam, positions), exam_id=item.exam.id))
    turns.append(CandidateUser(render_candidate_block(candidate)))

    script = ConversationScript(
        system=system,
        turns=tuple(turns),
        mode=FEW_SHOT_COT if cot else FEW_SHOT,
        candidate_id=candidate.id,
    )
    if token_budget is not None:
        estimate = _estimated_tokens(*script.outbound_texts())
        if estimate > token_budget:
            logger.warning(
                "few-shot script for %s estimated at %d tokens exceeds budget %d; calibration rounds are kept",
                candidate.id,
                estimate,
                token_budget,
            )
    return script


@dataclass(frozen=True)
class ModelAssessment:
    task1: dict[str, int] | None
    task2: dict[str, int] | None
    feedback: dict[str, str] = field(default_factory=dict)
    raw: str = ""
    valid: bool = False
    failure_reason: str | None = None

    def sub_dimensions(self) -> dict[str, dict[str, int]]:
        if not self.valid:
            raise ValueError(f"assessment is not valid: {self.failure_reason}")
        return {"task1": dict(self.task1), "task2": dict(self.task2)}


def serialize_assessment(assessment: ModelAssessment) -> str:
    """Inverse of parse_assessment for valid assessments."""
    sheet = {
        task: {**grades, "feedback": assessment.feedback.get(task, "")}
        for task, grades in (("task1", assessment.task1), ("task2", assessment.task2))
    }
    return json.dumps(sheet, ensure_ascii=False)


def _first_json_object(raw: str) -> dict | None:
    decoder = json.JSONDecoder()
    for start, char in enumerate(raw):
        if char != "{":
            continue
        try:
            obj, _ = decoder.raw_decode(raw[start:])
        except json.JSONDecodeError:
            continue
        if isinstance(obj, dict):
            return obj
    return None


def parse_assessment(raw: str) -> ModelAssessment:
    """Extract and validate the grade sheet from a model response.

    Surrounding prose and code fences are tolerated: the first parseable
    JSON object wins. Invalidity is recorded, not raised.
    """
    data = _first_json_object(raw)
    if data is None:
        return ModelAssessment(None, None, raw=raw, failure_reason="no JSON object found")

    violations: list[str] = []
    grades: dict[str, dict[str, int]] = {}
    feedback: dict[str, str] = {}
    for task in ("task1", "task2"):
        block = data.get(task)
        if not isinstance(block, dict):
            violations.append(f"missing {task}")
            continue
        task_grades = {}
        for dim in DIMENSIONS:
            value = block.get(dim)
            if value is None:
                violations.append(f"missing grade: {task}.{dim}")
            elif not isinstance(value, int) or isinstance(value, bool):
                violations.append(f"grade not an integer: {task}.{dim}")
            elif not 1 <= value <= 5:
                violations.append(f"grade out of range: {task}.{dim}")
            else:
                task_grades[dim] = value
        note = block.get("feedback", "")
        if not isinstance(note, str):
            violations.append(f"feedback must be a string: {task}.feedback")
            note = ""
        grades[task] = task_grades
        feedback[task] = note

    if violations:
        return ModelAssessment(
            grades.get("task1"), grades.get("task2"), feedback=feedback, raw=raw,
            failure_reason="; ".join(violations),
        )
    return ModelAssessment(grades["task1"], grades["task2"], feedback=feedback, raw=raw, valid=True)


@dataclass(frozen=True)
class GradeOutcome:
    exam_id: str
    assessment: ModelAssessment | None
    derived: ExamOutcome | None
    transcript: tuple[dict[str, str], ...]
    guesses: tuple[str, ...] = ()
    attempts: int = 0
    error: str | None = None

    @property
    def valid(self) -> bool:
        return self.error is None and self.assessment is not None and self.assessment.valid


def grade_candidate(
    client: ChatClient,
    script: ConversationScript,
    retries: int = 0,
    half: str = HALF_TO_BETTER,
) -> GradeOutcome:
    """Drive one conversation through the client and parse the result.

    Calibration guesses are recorded verbatim; an unparseable final answer
    is retried with a reformat instruction up to ``retries`` times and
    otherwise counted as invalid. Transport failures yield an errored
    outcome with the partial transcript.
    """
    messages: list[dict[str, str]] = [{"role": "system", "content": script.system}]
    guesses: list[str] = []
    attempts = 0

    def call() -> str:
        reply = client.chat(messages, exam_id=script.candidate_id)
        messages.append({"role": "assistant", "content": reply})
        return reply

    try:
        for turn in script.turns:
            if isinstance(turn, AwaitModelGuess):
                guesses.append(call())
            else:
                messages.append({"role": "user", "content": turn.content})
        attempts = 1
        assessment = parse_assessment(call())
        while not assessment.valid and attempts <= retries:
            messages.append({"role": "user", "content": reformat_instruction()})
            attempts += 1
            assessment = parse_assessment(call())
    except ChatTransportError as exc:
        return GradeOutcome(
            exam_id=script.candidate_id,
            assessment=None,
            derived=None,
            transcript=tuple(messages),
            guesses=tuple(guesses),
            attempts=attempts,
            error=str(exc),
        )

    derived = aggregate(assessment.sub_dimensions(), half) if assessment.valid else None
    return GradeOutcome(
        exam_id=script.candidate_id,
        assessment=assessment,
        derived=derived,
        transcript=tuple(messages),
        guesses=tuple(guesses),
        attempts=attempts,
    )
