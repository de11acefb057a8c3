"""Austrian A-level grading arithmetic.

Eight sub-dimension grades (2 tasks x content/structure/language_norms/
style_expression, 1 best .. 5 worst) are folded into section grades K1, K2,
K3/1, K3/2, K3 and a final grade. A section grade of 5 fails the whole exam.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

FAIL = "fail"

VALID_GRADES = (1, 2, 3, 4, 5)

# Rounding of exact .5 averages: toward the better (lower) grade by default,
# toward the worse grade when configured.
HALF_TO_BETTER = "better"
HALF_TO_WORSE = "worse"

DIMENSIONS = ("content", "structure", "language_norms", "style_expression")


@dataclass(frozen=True)
class SectionScores:
    k1: int
    k2: int
    k3_1: int
    k3_2: int
    k3: int


@dataclass(frozen=True)
class ExamOutcome:
    sections: SectionScores
    final: int | str  # 1..4 or FAIL
    fail_reason: str | None = None

    @property
    def failed(self) -> bool:
        return self.final == FAIL

    def final_as_grade(self) -> int:
        """Final grade with FAIL mapped to 5, for metric purposes."""
        return 5 if self.final == FAIL else int(self.final)


def _check_grade(value: int, name: str = "grade") -> int:
    if not isinstance(value, int) or isinstance(value, bool) or value not in VALID_GRADES:
        raise ValueError(f"{name} must be an integer in 1..5, got {value!r}")
    return value


def round_grade(x: float, half: str = HALF_TO_BETTER) -> int:
    """Round a rational average in [1, 5] to the nearest whole grade.

    Exact halves go toward the better grade (the lower number) unless
    ``half`` is HALF_TO_WORSE.
    """
    if not 1 <= x <= 5:
        raise ValueError(f"average out of range [1, 5]: {x!r}")
    if half not in (HALF_TO_BETTER, HALF_TO_WORSE):
        raise ValueError(f"unknown half-rounding mode: {half!r}")
    lower = math.floor(x)
    upper = math.ceil(x)
    if lower == upper:
        return int(x)
    # Averages here come from halves and thirds of small integers, so an
    # exact .5 is representable and a strict comparison is safe.
    frac = x - lower
    if frac < 0.5:
        return lower
    if frac > 0.5:
        return upper
    return lower if half == HALF_TO_BETTER else upper


def section_grade(dim_a: int, dim_b: int, half: str = HALF_TO_BETTER) -> int:
    """Combine the two dimension grades of one section into its grade."""
    _check_grade(dim_a, "dim_a")
    _check_grade(dim_b, "dim_b")
    return round_grade((dim_a + dim_b) / 2, half)


def combine_k3(k3_1: int, k3_2: int, half: str = HALF_TO_BETTER) -> int:
    """Combine the per-task K3 halves.

    A 5 in one half is tolerated as long as the combined average still
    rounds to 4 or better; (5, 5) stays 5.
    """
    _check_grade(k3_1, "k3_1")
    _check_grade(k3_2, "k3_2")
    return round_grade((k3_1 + k3_2) / 2, half)


def final_grade(k1: int, k2: int, k3: int, half: str = HALF_TO_BETTER) -> tuple[int | str, str | None]:
    """Final grade from the three section grades.

    Any section at 5 fails the exam; the returned reason names the failing
    section(s). Otherwise the final grade is the rounded section average.
    """
    _check_grade(k1, "k1")
    _check_grade(k2, "k2")
    _check_grade(k3, "k3")
    failing = [name for name, value in (("k1", k1), ("k2", k2), ("k3", k3)) if value == 5]
    if failing:
        return FAIL, ", ".join(failing)
    return round_grade((k1 + k2 + k3) / 3, half), None


def aggregate(sub: dict[str, dict[str, int]], half: str = HALF_TO_BETTER) -> ExamOutcome:
    """Fold the 8 sub-dimension grades into sections and the final grade.

    ``sub`` maps "task1"/"task2" to the four dimension grades. A 5 in a
    single sub-dimension does not fail the exam by itself; only section
    grades of 5 do.
    """
    for task in ("task1", "task2"):
        if task not in sub:
            raise ValueError(f"missing grades for {task}")
        for dim in DIMENSIONS:
            if dim not in sub[task]:
                raise ValueError(f"missing grade for {task}.{dim}")
            _check_grade(sub[task][dim], f"{task}.{dim}")

    t1, t2 = sub["task1"], sub["task2"]
    k1 = section_grade(t1["content"], t1["structure"], half)
    k2 = section_grade(t2["content"], t2["structure"], half)
    k3_1 = section_grade(t1["style_expression"], t1["language_norms"], half)
    k3_2 = section_grade(t2["style_expression"], t2["language_norms"], half)
    k3 = combine_k3(k3_1, k3_2, half)
    final, reason = final_grade(k1, k2, k3, half)
    return ExamOutcome(SectionScores(k1, k2, k3_1, k3_2, k3), final, reason)
