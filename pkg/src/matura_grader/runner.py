"""Experiment engine: corpus in, graded outcomes and report artifacts out.

Resolves the configured technique into per-candidate context selections and
conversation scripts, drives the chat client over every exam (optionally in
parallel), and writes metrics, confusion matrices, per-candidate transcripts
and predictions into the output directory. With mock clients the whole run
is deterministic in (config, corpus, seed).
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .clients import ALWAYS_GRADE, ChatClient, HttpChatClient, MockChatClient
from .config import ExperimentConfig, config_hash, technique_label
from .corpus import Corpus, ExamRecord, RubricSet, load_corpus, load_rubrics
from .grading import FAIL, aggregate
from .metrics import EvaluationReport, build_report
from .orchestrator import (
    CalibrationItem,
    ConversationScript,
    GradeOutcome,
    build_few_shot_script,
    build_zero_shot,
    grade_candidate,
)
from .reporting import emit_report
from .retrieval import (
    BASELINE,
    BEST_AVERAGE_WORST,
    MOST_SIMILAR,
    RANGE_OF_EXAMPLES,
    ContextSelection,
    ContextStrategy,
    FallbackEmbedder,
    RemoteEmbedder,
    TaskTextIndex,
    build_context,
    select_grade_exemplars,
)

logger = logging.getLogger(__name__)

BEST_WORST_LEVELS = (1, 3, 5)
ALL_GRADE_LEVELS = (1, 2, 3, 4, 5)


@dataclass(frozen=True)
class TechniquePlan:
    """How one technique maps onto context building and scripting."""

    label: str
    zero_shot: bool
    strategy: ContextStrategy | None = None  # zero-shot context
    calibration_groups: tuple[tuple[tuple[int, ...], tuple[int, ...]], ...] = ()  # (positions, levels)
    cot: bool = False


def technique_plan(cfg: ExperimentConfig) -> TechniquePlan:
    label = technique_label(cfg)
    noise = {"noise_count": cfg.noise_count, "noise_seed": cfg.noise_seed}
    if cfg.technique == "baseline":
        return TechniquePlan(label, zero_shot=True, strategy=ContextStrategy(BASELINE, **noise))
    if cfg.technique == "rag_best_avg_worst":
        return TechniquePlan(label, zero_shot=True, strategy=ContextStrategy(BEST_AVERAGE_WORST, **noise))
    if cfg.technique == "rag_most_similar":
        return TechniquePlan(label, zero_shot=True, strategy=ContextStrategy(MOST_SIMILAR, k=cfg.k, **noise))
    if cfg.technique == "rag_range":
        return TechniquePlan(label, zero_shot=True, strategy=ContextStrategy(RANGE_OF_EXAMPLES, n=cfg.n, **noise))
    if cfg.technique == "few_all_grades":
        return TechniquePlan(label, zero_shot=False, calibration_groups=(((1, 2), ALL_GRADE_LEVELS),))
    if cfg.technique == "few_best_worst":
        return TechniquePlan(label, zero_shot=False, calibration_groups=(((1, 2), BEST_WORST_LEVELS),))
    if cfg.technique == "few_mixed":
        return TechniquePlan(
            label,
            zero_shot=False,
            calibration_groups=(((1,), BEST_WORST_LEVELS), ((2,), ALL_GRADE_LEVELS)),
        )
    if cfg.technique == "cot_best_worst":
        return TechniquePlan(label, zero_shot=False, calibration_groups=(((1, 2), BEST_WORST_LEVELS),), cot=True)
    raise ValueError(f"unknown technique {cfg.technique!r}")


def _needs_index(plan: TechniquePlan) -> bool:
    return plan.zero_shot and plan.strategy.variant in (MOST_SIMILAR, RANGE_OF_EXAMPLES)


def make_embedder(cfg: ExperimentConfig):
    if cfg.embedding_fallback:
        return FallbackEmbedder(cfg.embedding_dim)
    return RemoteEmbedder(cfg.embedding_base_url, cfg.embedding_model, timeout=cfg.timeout)


def make_client(cfg: ExperimentConfig, corpus: Corpus) -> ChatClient:
    if cfg.client_kind == "http":
        return HttpChatClient(
            cfg.client_base_url, cfg.client_model, temperature=cfg.temperature, seed=cfg.seed, timeout=cfg.timeout
        )
    policy, _, parameter = cfg.client_policy.partition(":")
    if policy == ALWAYS_GRADE:
        return MockChatClient(ALWAYS_GRADE, grade=int(parameter or 3))
    return MockChatClient(policy, corpus=corpus)


def load_exemplar_manifest(path: str) -> dict[tuple[int, str], dict[int, str]]:
    """Curated exemplar ids: {"<year>/<pack>": {"1": id, ..., "5": id}}."""
    if not path:
        return {}
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    manifest: dict[tuple[int, str], dict[int, str]] = {}
    for key, levels in data.items():
        year, _, pack = key.partition("/")
        manifest[(int(year), pack)] = {int(level): exam_id for level, exam_id in levels.items()}
    return manifest


def calibration_items(
    corpus: Corpus,
    candidate: ExamRecord,
    plan: TechniquePlan,
    manifest: dict[tuple[int, str], dict[int, str]] | None = None,
) -> list[CalibrationItem]:
    pack_manifest = (manifest or {}).get((candidate.year, candidate.pack))
    items: list[CalibrationItem] = []
    for positions, levels in plan.calibration_groups:
        exemplars = select_grade_exemplars(
            corpus,
            candidate.year,
            candidate.pack,
            levels=levels,
            exclude_id=candidate.id,
            manifest=pack_manifest,
            task_position=positions[0] if len(positions) == 1 else None,
        )
        items.extend(CalibrationItem(exam=record, level=level, positions=positions) for level, record in exemplars)
    return items


def build_candidate_script(
    cfg: ExperimentConfig,
    corpus: Corpus,
    index: TaskTextIndex | None,
    rubrics: RubricSet,
    candidate: ExamRecord,
    plan: TechniquePlan,
    manifest: dict[tuple[int, str], dict[int, str]] | None = None,
) -> tuple[ConversationScript, ContextSelection | None, list[CalibrationItem]]:
    if plan.zero_shot:
        selection = build_context(corpus, index, candidate, plan.strategy)
        script = build_zero_shot(candidate, selection, rubrics, token_budget=cfg.token_budget)
        return script, selection, []
    items = calibration_items(corpus, candidate, plan, manifest)
    script = build_few_shot_script(
        items, cfg.ordering, candidate, rubrics, cot=plan.cot, token_budget=cfg.token_budget
    )
    return script, None, items


def _outcome_record(outcome: GradeOutcome) -> dict:
    assessment = None
    if outcome.assessment is not None:
        assessment = {
            "task1": outcome.assessment.task1,
            "task2": outcome.assessment.task2,
            "feedback": outcome.assessment.feedback,
            "failure_reason": outcome.assessment.failure_reason,
        }
    derived_final = None
    if outcome.derived is not None:
        derived_final = outcome.derived.final if outcome.derived.final == FAIL else int(outcome.derived.final)
    return {
        "id": outcome.exam_id,
        "valid": outcome.valid,
        "error": outcome.error,
        "attempts": outcome.attempts,
        "assessment": assessment,
        "derived_final": derived_final,
    }


def run_experiment(
    cfg: ExperimentConfig,
    client: ChatClient | None = None,
    embedder=None,
    write_artifacts: bool = True,
) -> EvaluationReport:
    """Execute one technique over the whole corpus.

    ``client``/``embedder`` can be injected (tests, fixtures); otherwise they
    are built from the configuration. A failing candidate never aborts the
    run; it is recorded as errored.
    """
    corpus = load_corpus(cfg.corpus_path, trust_stored_grades=cfg.trust_stored_grades, half=cfg.round_half)
    if not corpus.records:
        raise RuntimeError(f"no usable exams in {cfg.corpus_path}")
    for error in corpus.errors:
        logger.warning("corpus: skipped %s (%s)", error.file, error.reason)
    rubrics = load_rubrics(cfg.rubric_path)

    plan = technique_plan(cfg)
    manifest = load_exemplar_manifest(cfg.exemplars_path)
    index = None
    if _needs_index(plan):
        index = TaskTextIndex.build(corpus, embedder or make_embedder(cfg))

    if client is None:
        client = make_client(cfg, corpus)
    if isinstance(client, HttpChatClient):
        client.preflight()

    candidates = sorted(corpus.records, key=lambda r: r.id)
    started = datetime.now(timezone.utc)

    def grade_one(candidate: ExamRecord) -> GradeOutcome:
        try:
            script, _, _ = build_candidate_script(cfg, corpus, index, rubrics, candidate, plan, manifest)
            return grade_candidate(client, script, retries=cfg.retries, half=cfg.round_half)
        except Exception as exc:  # crash isolation: one candidate must not sink the run
            logger.exception("candidate %s failed", candidate.id)
            return GradeOutcome(candidate.id, None, None, transcript=(), error=f"internal: {exc}")

    if cfg.parallelism > 1:
        with ThreadPoolExecutor(max_workers=cfg.parallelism) as pool:
            outcomes = list(pool.map(grade_one, candidates))
    else:
        outcomes = [grade_one(candidate) for candidate in candidates]
    outcomes.sort(key=lambda o: o.exam_id)

    report = build_report(plan.label, outcomes, corpus, half=cfg.round_half)
    if write_artifacts:
        _write_artifacts(cfg, report, outcomes, client, started)
    return report


def _write_artifacts(
    cfg: ExperimentConfig,
    report: EvaluationReport,
    outcomes: list[GradeOutcome],
    client: ChatClient,
    started: datetime,
) -> None:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    digest = config_hash(cfg)
    emit_report(report, out, config_hash=digest)

    with (out / "predictions.jsonl").open("w", encoding="utf-8") as handle:
        for outcome in outcomes:
            handle.write(json.dumps(_outcome_record(outcome), ensure_ascii=False, sort_keys=True) + "\n")

    transcripts = out / "transcripts"
    transcripts.mkdir(exist_ok=True)
    for outcome in outcomes:
        payload = {
            "exam_id": outcome.exam_id,
            "messages": list(outcome.transcript),
            "guesses": list(outcome.guesses),
            "attempts": outcome.attempts,
            "error": outcome.error,
        }
        (transcripts / f"{outcome.exam_id}.json").write_text(
            json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=1) + "\n", encoding="utf-8"
        )

    meta = {
        "technique": report.technique,
        "config_hash": digest,
        "config": dict(cfg.raw_items()),
        "client": client.identity(),
        "started": started.isoformat(),
        "finished": datetime.now(timezone.utc).isoformat(),
        "n": report.n,
        "invalid_count": report.invalid_count,
        "errored": list(report.errored),
        "transcripts": "transcripts/",
    }
    (out / "run_meta.json").write_text(
        json.dumps(meta, ensure_ascii=False, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )


def rescore_predictions(
    predictions_path: str | Path, corpus: Corpus, technique: str = "rescored", half: str = "better"
) -> EvaluationReport:
    """Rebuild an EvaluationReport from a stored predictions.jsonl file."""
    from .orchestrator import ModelAssessment

    outcomes: list[GradeOutcome] = []
    for line in Path(predictions_path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        data = json.loads(line)
        assessment = None
        derived = None
        if data.get("assessment"):
            block = data["assessment"]
            valid = data.get("valid", False) and not data.get("error")
            assessment = ModelAssessment(
                task1=block.get("task1"),
                task2=block.get("task2"),
                feedback=block.get("feedback") or {},
                raw="",
                valid=valid,
                failure_reason=block.get("failure_reason"),
            )
            if valid:
                derived = aggregate(assessment.sub_dimensions(), half)
        outcomes.append(
            GradeOutcome(
                exam_id=data["id"],
                assessment=assessment,
                derived=derived,
                transcript=(),
                attempts=data.get("attempts", 0),
                error=data.get("error"),
            )
        )
    return build_report(technique, outcomes, corpus, half=half)
