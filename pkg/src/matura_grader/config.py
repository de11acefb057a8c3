"""Experiment configuration.

Flat ``key = value`` text files, ``#`` comments. Every key has a documented
default; the canonical serialization of the effective configuration is
hashed into each report so results stay traceable to exact settings.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

TECHNIQUES = (
    "baseline",
    "rag_best_avg_worst",
    "rag_most_similar",
    "rag_range",
    "few_all_grades",
    "few_best_worst",
    "few_mixed",
    "cot_best_worst",
)

ORDERINGS = ("base", "inverted", "mixed15243", "mixed153")

# key -> (default, help)
DEFAULTS: dict[str, tuple[str, str]] = {
    "corpus.path": ("corpus", "directory with one exam JSON file per exam"),
    "corpus.trust_stored_grades": ("false", "keep records whose stored aggregates disagree with recomputation"),
    "corpus.exemplars": ("", "optional JSON manifest of curated exemplar ids per grade level"),
    "rubric.path": ("rubrics", "directory with one rubric JSON file per text type"),
    "technique": ("baseline", f"one of {', '.join(TECHNIQUES)}"),
    "technique.k": ("1", "reference count per task for rag_most_similar"),
    "technique.n": ("1", "per-grade coverage for rag_range"),
    "ordering": ("base", f"calibration grade order, one of {', '.join(ORDERINGS)}"),
    "client.kind": ("mock", "http or mock"),
    "client.base_url": ("http://localhost:11434", "chat endpoint base URL (http client)"),
    "client.model": ("llama3", "chat model name (http client)"),
    "client.policy": ("echo_gold", "mock policy: echo_gold, always_grade:<g>, keyword_heuristic"),
    "client.temperature": ("0.0", "sampling temperature"),
    "client.seed": ("0", "sampling seed, where the endpoint supports it"),
    "client.retries": ("0", "reformat retries after an unparseable answer"),
    "client.timeout": ("120.0", "HTTP timeout in seconds"),
    "embedding.base_url": ("http://localhost:11434", "embedding endpoint base URL"),
    "embedding.model": ("", "embedding model name (remote mode)"),
    "embedding.fallback": ("true", "use the deterministic offline embedder"),
    "embedding.dim": ("128", "fallback embedding dimension"),
    "noise.count": ("0", "random-word noise documents appended to each context"),
    "noise.seed": ("0", "noise generator seed"),
    "grading.round_half": ("better", "rounding of exact .5 averages: better or worse"),
    "runner.parallelism": ("1", "concurrently graded candidates"),
    "runner.token_budget": ("100000", "approximate token budget per script (4 chars/token)"),
    "output.dir": ("out", "directory for report artifacts and transcripts"),
}


class ConfigError(ValueError):
    pass


def parse_config_text(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; unknown keys are errors."""
    values: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {stripped!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key not in DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        values[key] = value.strip()
    return values


def _as_bool(value: str, key: str) -> bool:
    lowered = value.lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"{key} must be a boolean, got {value!r}")


def _as_int(value: str, key: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {value!r}") from None


def _as_float(value: str, key: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"{key} must be a number, got {value!r}") from None


@dataclass(frozen=True)
class ExperimentConfig:
    corpus_path: str
    trust_stored_grades: bool
    exemplars_path: str
    rubric_path: str
    technique: str
    k: int
    n: int
    ordering: str
    client_kind: str
    client_base_url: str
    client_model: str
    client_policy: str
    temperature: float
    seed: int
    retries: int
    timeout: float
    embedding_base_url: str
    embedding_model: str
    embedding_fallback: bool
    embedding_dim: int
    noise_count: int
    noise_seed: int
    round_half: str
    parallelism: int
    token_budget: int
    output_dir: str

    def raw_items(self) -> list[tuple[str, str]]:
        """The effective configuration as canonical flat key/value pairs."""
        mapping = {
            "corpus.path": self.corpus_path,
            "corpus.trust_stored_grades": str(self.trust_stored_grades).lower(),
            "corpus.exemplars": self.exemplars_path,
            "rubric.path": self.rubric_path,
            "technique": self.technique,
            "technique.k": str(self.k),
            "technique.n": str(self.n),
            "ordering": self.ordering,
            "client.kind": self.client_kind,
            "client.base_url": self.client_base_url,
            "client.model": self.client_model,
            "client.policy": self.client_policy,
            "client.temperature": repr(self.temperature),
            "client.seed": str(self.seed),
            "client.retries": str(self.retries),
            "client.timeout": repr(self.timeout),
            "embedding.base_url": self.embedding_base_url,
            "embedding.model": self.embedding_model,
            "embedding.fallback": str(self.embedding_fallback).lower(),
            "embedding.dim": str(self.embedding_dim),
            "noise.count": str(self.noise_count),
            "noise.seed": str(self.noise_seed),
            "grading.round_half": self.round_half,
            "runner.parallelism": str(self.parallelism),
            "runner.token_budget": str(self.token_budget),
            "output.dir": self.output_dir,
        }
        return sorted(mapping.items())


def config_from_values(values: dict[str, str]) -> ExperimentConfig:
    merged = {key: default for key, (default, _) in DEFAULTS.items()}
    merged.update(values)

    technique = merged["technique"]
    if technique not in TECHNIQUES:
        raise ConfigError(f"unknown technique {technique!r}; expected one of {', '.join(TECHNIQUES)}")
    ordering = merged["ordering"]
    if ordering not in ORDERINGS:
        raise ConfigError(f"unknown ordering {ordering!r}; expected one of {', '.join(ORDERINGS)}")
    client_kind = merged["client.kind"]
    if client_kind not in ("http", "mock"):
        raise ConfigError(f"client.kind must be http or mock, got {client_kind!r}")
    round_half = merged["grading.round_half"]
    if round_half not in ("better", "worse"):
        raise ConfigError(f"grading.round_half must be better or worse, got {round_half!r}")

    cfg = ExperimentConfig(
        corpus_path=merged["corpus.path"],
        trust_stored_grades=_as_bool(merged["corpus.trust_stored_grades"], "corpus.trust_stored_grades"),
        exemplars_path=merged["corpus.exemplars"],
        rubric_path=merged["rubric.path"],
        technique=technique,
        k=_as_int(merged["technique.k"], "technique.k"),
        n=_as_int(merged["technique.n"], "technique.n"),
        ordering=ordering,
        client_kind=client_kind,
        client_base_url=merged["client.base_url"],
        client_model=merged["client.model"],
        client_policy=merged["client.policy"],
        temperature=_as_float(merged["client.temperature"], "client.temperature"),
        seed=_as_int(merged["client.seed"], "client.seed"),
        retries=_as_int(merged["client.retries"], "client.retries"),
        timeout=_as_float(merged["client.timeout"], "client.timeout"),
        embedding_base_url=merged["embedding.base_url"],
        embedding_model=merged["embedding.model"],
        embedding_fallback=_as_bool(merged["embedding.fallback"], "embedding.fallback"),
        embedding_dim=_as_int(merged["embedding.dim"], "embedding.dim"),
        noise_count=_as_int(merged["noise.count"], "noise.count"),
        noise_seed=_as_int(merged["noise.seed"], "noise.seed"),
        round_half=round_half,
        parallelism=_as_int(merged["runner.parallelism"], "runner.parallelism"),
        token_budget=_as_int(merged["runner.token_budget"], "runner.token_budget"),
        output_dir=merged["output.dir"],
    )
    if cfg.k < 1:
        raise ConfigError("technique.k must be >= 1")
    if cfg.n < 1:
        raise ConfigError("technique.n must be >= 1")
    if cfg.retries < 0:
        raise ConfigError("client.retries must be >= 0")
    if cfg.noise_count < 0:
        raise ConfigError("noise.count must be >= 0")
    if cfg.parallelism < 1:
        raise ConfigError("runner.parallelism must be >= 1")
    if cfg.embedding_dim < 1:
        raise ConfigError("embedding.dim must be >= 1")
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    file = Path(path)
    if not file.is_file():
        raise ConfigError(f"config file not found: {file}")
    return config_from_values(parse_config_text(file.read_text(encoding="utf-8")))


def config_hash(cfg: ExperimentConfig) -> str:
    canonical = "\n".join(f"{key} = {value}" for key, value in cfg.raw_items())
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def format_defaults() -> str:
    lines = []
    for key, (default, help_text) in DEFAULTS.items():
        lines.append(f"# {help_text}")
        lines.append(f"{key} = {default}")
        lines.append("")
    return "\n".join(lines).rstrip() + "\n"


def technique_label(cfg: ExperimentConfig) -> str:
    """Report row label for a technique configuration."""
    if cfg.technique == "baseline":
        return "baseline"
    if cfg.technique == "rag_most_similar":
        return f"RAG-{cfg.k}-best"
    if cfg.technique == "rag_range":
        return f"RAG-{5 * cfg.n}-grade"
    if cfg.technique == "rag_best_avg_worst":
        return "RAG-best-worst"
    if cfg.technique == "few_all_grades":
        return "Few-all-grades"
    if cfg.technique == "few_best_worst":
        return "Few-best-worst"
    if cfg.technique == "few_mixed":
        return "Few-mixed"
    return "CoT-best-worst"
