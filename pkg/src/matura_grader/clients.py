"""Chat-completion clients.

``HttpChatClient`` speaks the ``POST {base_url}/api/chat`` protocol of
common local inference servers. The mock clients make the whole grading
pipeline runnable and deterministic offline; ``exam_id`` is passed along
with each conversation so the echo_gold policy can look up the right gold
sheet without the grades ever entering a prompt.
"""

from __future__ import annotations

import json
import re
import threading
from collections import deque

import requests

from .corpus import Corpus
from .grading import DIMENSIONS


class ChatTransportError(RuntimeError):
    pass


class ChatClient:
    """Interface: ``chat(messages, exam_id=None) -> str`` (assistant text)."""

    def chat(self, messages: list[dict[str, str]], exam_id: str | None = None) -> str:
        raise NotImplementedError

    def identity(self) -> str:
        raise NotImplementedError


class HttpChatClient(ChatClient):
    def __init__(
        self,
        base_url: str,
        model: str,
        temperature: float = 0.0,
        seed: int = 0,
        timeout: float = 120.0,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.temperature = temperature
        self.seed = seed
        self.timeout = timeout

    def preflight(self) -> None:
        """Fail fast when the server is not reachable at all."""
        try:
            requests.get(self.base_url, timeout=min(self.timeout, 10.0))
        except requests.RequestException as exc:
            raise ChatTransportError(f"chat endpoint unreachable: {self.base_url} ({exc})") from exc

    def chat(self, messages: list[dict[str, str]], exam_id: str | None = None) -> str:
        payload = {
            "model": self.model,
            "messages": messages,
            "stream": False,
            "options": {"temperature": self.temperature, "seed": self.seed},
        }
        endpoint = f"{self.base_url}/api/chat"
        try:
            response = requests.post(endpoint, json=payload, timeout=self.timeout)
        except requests.RequestException as exc:
            raise ChatTransportError(f"chat request failed: {endpoint} ({exc})") from exc
        if response.status_code != 200:
            raise ChatTransportError(f"chat endpoint error: {endpoint} returned {response.status_code}")
        return response.json()["message"]["content"]

    def identity(self) -> str:
        return f"http:{self.base_url}:{self.model}"


def assessment_json(task1: dict[str, int], task2: dict[str, int], feedback: str = "Automatische Testbewertung.") -> str:
    """A well-formed grade sheet in the required output schema."""
    sheet = {
        "task1": {**{dim: task1[dim] for dim in DIMENSIONS}, "feedback": feedback},
        "task2": {**{dim: task2[dim] for dim in DIMENSIONS}, "feedback": feedback},
    }
    return json.dumps(sheet, ensure_ascii=False)


# Connectives whose presence the keyword policy rewards.
_KEYWORDS = (
    "jedoch",
    "außerdem",
    "dennoch",
    "zudem",
    "allerdings",
    "folglich",
    "einerseits",
    "andererseits",
    "beispielsweise",
    "zusammenfassend",
)

ALWAYS_GRADE = "always_grade"
ECHO_GOLD = "echo_gold"
KEYWORD_HEURISTIC = "keyword_heuristic"


class MockChatClient(ChatClient):
    """Deterministic offline stand-in for a chat model.

    Policies:
      always_grade(g)   every dimension of every exam gets grade g
      echo_gold         returns the candidate's gold sheet (needs a corpus)
      keyword_heuristic grades by counting connective keywords in the last
                        user message
    """

    def __init__(self, policy: str, grade: int = 3, corpus: Corpus | None = None):
        if policy not in (ALWAYS_GRADE, ECHO_GOLD, KEYWORD_HEURISTIC):
            raise ValueError(f"unknown mock policy {policy!r}")
        if policy == ALWAYS_GRADE and grade not in (1, 2, 3, 4, 5):
            raise ValueError(f"always_grade needs a grade in 1..5, got {grade}")
        if policy == ECHO_GOLD and corpus is None:
            raise ValueError("echo_gold needs a corpus to look gold grades up in")
        self.policy = policy
        self.grade = grade
        self.corpus = corpus

    def chat(self, messages: list[dict[str, str]], exam_id: str | None = None) -> str:
        if self.policy == ALWAYS_GRADE:
            uniform = {dim: self.grade for dim in DIMENSIONS}
            return assessment_json(uniform, uniform)
        if self.policy == ECHO_GOLD:
            if exam_id is None:
                raise ValueError("echo_gold needs the exam id of the conversation")
            record = self.corpus.get(exam_id)
            return assessment_json(record.gold.task1.as_dict(), record.gold.task2.as_dict())
        last_user = next((m["content"] for m in reversed(messages) if m["role"] == "user"), "")
        words = set(re.findall(r"\w+", last_user.lower()))
        hits = sum(1 for keyword in _KEYWORDS if keyword in words)
        grade = max(1, min(5, 5 - hits))
        uniform = {dim: grade for dim in DIMENSIONS}
        return assessment_json(uniform, uniform)

    def identity(self) -> str:
        if self.policy == ALWAYS_GRADE:
            return f"mock:always_grade:{self.grade}"
        return f"mock:{self.policy}"


class ScriptedChatClient(ChatClient):
    """Replays a fixed sequence of responses; repeats the last one when
    exhausted. Thread-safe so parallel runs stay well-defined."""

    def __init__(self, responses: list[str]):
        if not responses:
            raise ValueError("need at least one scripted response")
        self._responses = deque(responses)
        self._last = responses[-1]
        self._lock = threading.Lock()

    def chat(self, messages: list[dict[str, str]], exam_id: str | None = None) -> str:
        with self._lock:
            if self._responses:
                self._last = self._responses.popleft()
            return self._last

    def identity(self) -> str:
        return "scripted"
