"""Context selection for a candidate exam.

A corpus-backed similarity index (exact full scan, the corpus is ~100 texts)
plus the three reference-selection strategies: the pack's best/most-average/
worst exams as a fixed context, the most similar texts by embedding cosine,
and descending-similarity selection until every final grade is covered n
times. Noise documents of random German words can be appended to any
selection.

Embeddings come from a remote HTTP endpoint or from a deterministic
hash-based fallback so the whole pipeline runs offline.
"""

from __future__ import annotations

import hashlib
import math
import random
import re
import zlib
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path

import requests

from .corpus import Corpus, ExamRecord, normalize_text
from .grading import DIMENSIONS

FALLBACK_DIM = 128

_TOKEN = re.compile(r"\w+", re.UNICODE)


class EmbeddingError(RuntimeError):
    pass


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]
    source: str  # "remote_model" | "deterministic_fallback"


def cosine_similarity(a, b) -> float:
    """Cosine of two equal-length vectors; errors on zero norm."""
    va = a.values if isinstance(a, EmbeddingVector) else tuple(a)
    vb = b.values if isinstance(b, EmbeddingVector) else tuple(b)
    if len(va) != len(vb):
        raise ValueError(f"vector length mismatch: {len(va)} vs {len(vb)}")
    dot = sum(x * y for x, y in zip(va, vb))
    norm_a = math.sqrt(sum(x * x for x in va))
    norm_b = math.sqrt(sum(y * y for y in vb))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ValueError("cosine similarity undefined for zero-norm vector")
    return dot / (norm_a * norm_b)


class FallbackEmbedder:
    """Deterministic offline embedder: hashed bag-of-token counts.

    Same text always maps to the same vector; token overlap shows up as
    cosine similarity, which is all the selection strategies need.
    """

    source = "deterministic_fallback"

    def __init__(self, dim: int = FALLBACK_DIM):
        if dim < 1:
            raise ValueError("embedding dimension must be >= 1")
        self.dim = dim

    def embed(self, text: str) -> EmbeddingVector:
        tokens = _TOKEN.findall(normalize_text(text).lower())
        if not tokens:
            raise EmbeddingError("cannot embed empty text")
        counts = [0.0] * self.dim
        for token in tokens:
            digest = hashlib.sha256(token.encode("utf-8")).digest()
            counts[int.from_bytes(digest[:4], "big") % self.dim] += 1.0
        return EmbeddingVector(tuple(counts), self.source)


class RemoteEmbedder:
    """Client for a ``POST {base_url}/api/embed`` embedding endpoint."""

    source = "remote_model"

    def __init__(self, base_url: str, model: str, timeout: float = 60.0):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.timeout = timeout

    def embed(self, text: str) -> EmbeddingVector:
        normalized = normalize_text(text)
        if not normalized:
            raise EmbeddingError("cannot embed empty text")
        endpoint = f"{self.base_url}/api/embed"
        try:
            response = requests.post(
                endpoint, json={"model": self.model, "input": normalized}, timeout=self.timeout
            )
        except requests.RequestException as exc:
            raise EmbeddingError(f"embedding endpoint unreachable: {endpoint} ({exc})") from exc
        if response.status_code != 200:
            raise EmbeddingError(f"embedding endpoint error: {endpoint} returned {response.status_code}")
        values = response.json()["embeddings"][0]
        return EmbeddingVector(tuple(float(v) for v in values), self.source)


class TaskTextIndex:
    """Immutable similarity index over task texts, one pool per
    (year, pack, task position). Queries are exact full scans."""

    def __init__(self, embedder, pools: dict[tuple[int, str, int], tuple[tuple[ExamRecord, EmbeddingVector], ...]]):
        self._embedder = embedder
        self._pools = pools

    @classmethod
    def build(cls, corpus: Corpus, embedder) -> "TaskTextIndex":
        pools: dict[tuple[int, str, int], list[tuple[ExamRecord, EmbeddingVector]]] = {}
        for record in sorted(corpus.records, key=lambda r: r.id):
            for position in (1, 2):
                key = (record.year, record.pack, position)
                pools.setdefault(key, []).append((record, embedder.embed(record.task(position).body)))
        return cls(embedder, {key: tuple(entries) for key, entries in pools.items()})

    def pool_size(self, year: int, pack: str, position: int) -> int:
        return len(self._pools.get((year, pack, position), ()))

    def query(
        self, year: int, pack: str, position: int, candidate: ExamRecord
    ) -> list[tuple[ExamRecord, float]]:
        """All pool texts ranked by similarity to the candidate's task text,
        candidate excluded; ties broken by id."""
        pool = self._pools.get((year, pack, position), ())
        query_vector = None
        for record, vector in pool:
            if record.id == candidate.id:
                query_vector = vector
                break
        if query_vector is None:
            query_vector = self._embedder.embed(candidate.task(position).body)
        ranked = [
            (record, cosine_similarity(query_vector, vector))
            for record, vector in pool
            if record.id != candidate.id
        ]
        ranked.sort(key=lambda item: (-item[1], item[0].id))
        return ranked


@dataclass(frozen=True)
class ContextEntry:
    exam_id: str
    task_position: int | None  # None for noise documents
    body: str
    gold: dict[str, int] | None  # the 4 dimension grades of that task
    final_grade: int | None
    similarity: float | None
    is_noise: bool = False


@dataclass(frozen=True)
class ContextSelection:
    entries: tuple[ContextEntry, ...] = ()
    warnings: tuple[str, ...] = ()
    # per task position: final grade -> kept count (RangeOfExamples only)
    coverage: dict[int, dict[int, int]] | None = None

    def reference_ids(self) -> tuple[str, ...]:
        seen: list[str] = []
        for entry in self.entries:
            if not entry.is_noise and entry.exam_id not in seen:
                seen.append(entry.exam_id)
        return tuple(seen)


BASELINE = "baseline"
BEST_AVERAGE_WORST = "best_average_worst"
MOST_SIMILAR = "most_similar"
RANGE_OF_EXAMPLES = "range_of_examples"
ALL_GRADES = "all_grades"
MIXED_PER_TASK = "mixed_per_task"

_VARIANTS = (BASELINE, BEST_AVERAGE_WORST, MOST_SIMILAR, RANGE_OF_EXAMPLES, ALL_GRADES, MIXED_PER_TASK)


@dataclass(frozen=True)
class ContextStrategy:
    variant: str
    k: int = 1
    n: int = 1
    task1: "ContextStrategy | None" = None
    task2: "ContextStrategy | None" = None
    noise_count: int = 0
    noise_seed: int = 0

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise ValueError(f"unknown context strategy {self.variant!r}")
        if self.k < 1 or self.n < 1:
            raise ValueError("strategy parameters k and n must be >= 1")
        if self.noise_count < 0:
            raise ValueError("noise_count must be >= 0")
        if self.variant == MIXED_PER_TASK:
            if self.task1 is None or self.task2 is None:
                raise ValueError("mixed_per_task needs task1 and task2 sub-strategies")
            if MIXED_PER_TASK in (self.task1.variant, self.task2.variant):
                raise ValueError("mixed_per_task must not nest mixed_per_task")


def _entry_for(record: ExamRecord, position: int, similarity: float | None) -> ContextEntry:
    grades = getattr(record.gold, f"task{position}")
    return ContextEntry(
        exam_id=record.id,
        task_position=position,
        body=record.task(position).body,
        gold=grades.as_dict(),
        final_grade=record.gold.final_as_grade(),
        similarity=similarity,
    )


def _sub_dimension_sum(record: ExamRecord) -> int:
    return sum(sum(getattr(record.gold, task).as_dict().values()) for task in ("task1", "task2"))


def select_best_average_worst(
    corpus: Corpus,
    year: int,
    pack: str,
    exclude_id: str | None = None,
    positions: tuple[int, ...] = (1, 2),
) -> ContextSelection:
    """The pack's best, most-average and worst exams as fixed context.

    Best/worst by final grade with sub-dimension-sum then id tie-breaks;
    most-average minimizes L1 distance to the pack's per-dimension means.
    The three picks are distinct. Without ``exclude_id`` the result is the
    same for every candidate of the (year, pack).
    """
    pool = corpus.pool(year, pack)
    eligible = [r for r in pool if r.id != exclude_id]
    if len(eligible) < 3:
        raise ValueError(f"need at least 3 exams in pack ({year}, {pack!r}), have {len(eligible)}")

    best = min(eligible, key=lambda r: (r.gold.final_as_grade(), _sub_dimension_sum(r), r.id))
    remaining = [r for r in eligible if r.id != best.id]
    worst = min(remaining, key=lambda r: (-r.gold.final_as_grade(), -_sub_dimension_sum(r), r.id))
    remaining = [r for r in remaining if r.id != worst.id]

    # Pack means are computed over the full pool so the notion of "average"
    # does not shift with the excluded candidate.
    means: dict[tuple[str, str], float] = {}
    for task in ("task1", "task2"):
        for dim in DIMENSIONS:
            means[(task, dim)] = sum(getattr(getattr(r.gold, task), dim) for r in pool) / len(pool)

    def l1_to_means(record: ExamRecord) -> float:
        return sum(
            abs(getattr(getattr(record.gold, task), dim) - means[(task, dim)])
            for task in ("task1", "task2")
            for dim in DIMENSIONS
        )

    average = min(remaining, key=lambda r: (l1_to_means(r), r.id))

    entries = tuple(
        _entry_for(record, position, None)
        for position in positions
        for record in (best, average, worst)
    )
    return ContextSelection(entries=entries)


def select_most_similar(
    index: TaskTextIndex, candidate: ExamRecord, k: int, positions: tuple[int, ...] = (1, 2)
) -> ContextSelection:
    """Top-k most similar pool texts per task, candidate excluded."""
    if k < 1:
        raise ValueError("k must be >= 1")
    entries: list[ContextEntry] = []
    warnings: list[str] = []
    for position in positions:
        ranked = index.query(candidate.year, candidate.pack, position, candidate)
        if len(ranked) < k:
            warnings.append(f"task {position}: pool has only {len(ranked)} texts, requested {k}")
        entries.extend(_entry_for(record, position, similarity) for record, similarity in ranked[:k])
    return ContextSelection(entries=tuple(entries), warnings=tuple(warnings))


def select_range_of_examples(
    index: TaskTextIndex, candidate: ExamRecord, n: int, positions: tuple[int, ...] = (1, 2)
) -> ContextSelection:
    """Scan pool texts by descending similarity, keeping a text only while
    its final grade is still needed, until every grade 1..5 is covered n
    times or the pool runs out. Under-coverage lands in the coverage report."""
    if n < 1:
        raise ValueError("n must be >= 1")
    entries: list[ContextEntry] = []
    coverage: dict[int, dict[int, int]] = {}
    for position in positions:
        counts = {grade: 0 for grade in (1, 2, 3, 4, 5)}
        for record, similarity in index.query(candidate.year, candidate.pack, position, candidate):
            grade = record.gold.final_as_grade()
            if counts[grade] >= n:
                continue
            counts[grade] += 1
            entries.append(_entry_for(record, position, similarity))
            if all(count >= n for count in counts.values()):
                break
        coverage[position] = counts
    return ContextSelection(entries=tuple(entries), coverage=coverage)


def select_grade_exemplars(
    corpus: Corpus,
    year: int,
    pack: str,
    levels: tuple[int, ...],
    exclude_id: str | None = None,
    manifest: dict[int, str] | None = None,
    task_position: int | None = None,
) -> list[tuple[int, ExamRecord]]:
    """One reference exam per requested grade level.

    A curated manifest (level -> exam id) wins when it provides a usable id;
    otherwise the exam whose grade vector is L1-closest to the uniform
    vector (g, ..., g) is chosen — over all 8 sub-dimensions, or over the 4
    of ``task_position``. Picks are distinct across levels.
    """
    pool = corpus.pool(year, pack)
    eligible = {r.id: r for r in pool if r.id != exclude_id}

    def distance(record: ExamRecord, grade: int) -> int:
        if task_position is None:
            tasks = ("task1", "task2")
        else:
            tasks = (f"task{task_position}",)
        return sum(abs(getattr(getattr(record.gold, task), dim) - grade) for task in tasks for dim in DIMENSIONS)

    picked: list[tuple[int, ExamRecord]] = []
    taken: set[str] = set()
    for level in levels:
        manifest_id = (manifest or {}).get(level)
        if manifest_id and manifest_id in eligible and manifest_id not in taken:
            record = eligible[manifest_id]
        else:
            candidates = [r for r in eligible.values() if r.id not in taken]
            if not candidates:
                break
            record = min(candidates, key=lambda r: (distance(r, level), r.id))
        taken.add(record.id)
        picked.append((level, record))
    return picked


@lru_cache(maxsize=1)
def word_list() -> tuple[str, ...]:
    path = Path(__file__).parent / "data" / "german_words.txt"
    return tuple(w for w in path.read_text(encoding="utf-8").split() if w)


def random_word_text(rng: random.Random, min_words: int = 120, max_words: int = 200) -> str:
    """A document made up of random German words."""
    words = word_list()
    return " ".join(rng.choice(words) for _ in range(rng.randint(min_words, max_words)))


def inject_noise(selection: ContextSelection, count: int, seed: int) -> ContextSelection:
    """Append ``count`` random-word noise documents; deterministic in seed."""
    if count < 0:
        raise ValueError("noise count must be >= 0")
    if count == 0:
        return selection
    rng = random.Random(seed)
    noise = tuple(
        ContextEntry(
            exam_id=f"noise-{i + 1}",
            task_position=None,
            body=random_word_text(rng),
            gold=None,
            final_grade=None,
            similarity=None,
            is_noise=True,
        )
        for i in range(count)
    )
    return replace(selection, entries=selection.entries + noise)


def _single_task_selection(
    corpus: Corpus, index: TaskTextIndex, candidate: ExamRecord, strategy: ContextStrategy, position: int
) -> ContextSelection:
    return _select(corpus, index, candidate, strategy, positions=(position,))


def _select(
    corpus: Corpus,
    index: TaskTextIndex,
    candidate: ExamRecord,
    strategy: ContextStrategy,
    positions: tuple[int, ...],
) -> ContextSelection:
    if strategy.variant == BASELINE:
        return ContextSelection()
    if strategy.variant == BEST_AVERAGE_WORST:
        return select_best_average_worst(
            corpus, candidate.year, candidate.pack, exclude_id=candidate.id, positions=positions
        )
    if strategy.variant == MOST_SIMILAR:
        return select_most_similar(index, candidate, strategy.k, positions=positions)
    if strategy.variant == RANGE_OF_EXAMPLES:
        return select_range_of_examples(index, candidate, strategy.n, positions=positions)
    if strategy.variant == ALL_GRADES:
        entries = []
        for position in positions:
            exemplars = select_grade_exemplars(
                corpus,
                candidate.year,
                candidate.pack,
                levels=(1, 2, 3, 4, 5),
                exclude_id=candidate.id,
                task_position=position if len(positions) == 1 else None,
            )
            entries.extend(_entry_for(record, position, None) for _, record in exemplars)
        return ContextSelection(entries=tuple(entries))
    raise ValueError(f"strategy {strategy.variant!r} cannot be built directly")


def build_context(
    corpus: Corpus, index: TaskTextIndex, candidate: ExamRecord, strategy: ContextStrategy
) -> ContextSelection:
    """Resolve a strategy into the candidate's ContextSelection.

    The candidate itself never appears in its own selection; noise seeds are
    varied per candidate so repeated runs stay deterministic."""
    if strategy.variant == MIXED_PER_TASK:
        first = _single_task_selection(corpus, index, candidate, strategy.task1, 1)
        second = _single_task_selection(corpus, index, candidate, strategy.task2, 2)
        coverage = None
        if first.coverage or second.coverage:
            coverage = {**(first.coverage or {}), **(second.coverage or {})}
        selection = ContextSelection(
            entries=first.entries + second.entries,
            warnings=first.warnings + second.warnings,
            coverage=coverage,
        )
    else:
        selection = _select(corpus, index, candidate, strategy, positions=(1, 2))
    if strategy.noise_count:
        seed = strategy.noise_seed ^ zlib.crc32(candidate.id.encode("utf-8"))
        selection = inject_noise(selection, strategy.noise_count, seed)
    return selection
