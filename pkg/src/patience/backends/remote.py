"""HTTP chat-completion backend.

Talks to a chat-completion-style endpoint with JSON bodies and renders every
operation through the shipped prompt assets.  Numeric operations demand a
fenced, line-oriented ``id: number`` block; a reply that fails strict parsing
triggers one stricter reprompt, then keyed number extraction marks the result
repaired.  Each operation issues at most ``max_retries + 1`` HTTP requests in
total (reprompts included) with no sleeps in between, so a call never blocks
longer than ``timeout * (max_retries + 1)``.
"""

from __future__ import annotations

import os
import re
import threading
from typing import Mapping, Sequence

import requests

from ..errors import BackendError
from ..kb import DiseaseEntry
from ..prob import CandidateQuestion, DiseaseDistribution
from .base import (
    BackendConfig,
    ElicitationResult,
    Exchange,
    GeneratorBackend,
    PatientLike,
    PromptLibrary,
    dialogue_text,
)

_FENCE = re.compile(r"```[a-zA-Z]*\n?(.*?)```", re.DOTALL)
_PAIR_LINE = re.compile(
    r"^\s*`?(?P<key>[A-Za-z0-9_.-]+)`?\s*[:=]\s*"
    r"(?P<value>[-+]?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)\s*$"
)
_PAIR_ANYWHERE = re.compile(
    r"`?(?P<key>[A-Za-z0-9_.-]+)`?\s*[:=]\s*"
    r"(?P<value>[-+]?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)"
)
_NUMBERED_ITEM = re.compile(r"^\s*(\d+)\s*[.)]\s*(.+?)\s*$")


def _fenced_body(text: str) -> str:
    match = _FENCE.search(text)
    return match.group(1) if match else text


def _strict_pairs(text: str, keys: Sequence[str]) -> dict[str, float] | None:
    """Parse a block of ``key: number`` lines; None when any required key is
    missing, any value is negative, or a non-empty line has another shape."""
    values: dict[str, float] = {}
    for line in _fenced_body(text).splitlines():
        if not line.strip():
            continue
        match = _PAIR_LINE.match(line)
        if match is None:
            return None
        values[match.group("key")] = float(match.group("value"))
    if any(key not in values for key in keys):
        return None
    if any(values[key] < 0 for key in keys):
        return None
    return values


def _repair_pairs(texts: Sequence[str], keys: Sequence[str]) -> dict[str, float] | None:
    """Keyed number extraction across raw replies, newest first; negatives
    clamp to zero.  None when any key stays missing."""
    values: dict[str, float] = {}
    for text in texts:
        for match in _PAIR_ANYWHERE.finditer(text):
            key = match.group("key")
            if key in keys and key not in values:
                values[key] = max(float(match.group("value")), 0.0)
    if any(key not in values for key in keys):
        return None
    return values


def _numbered_items(text: str) -> list[str]:
    items = []
    for line in _fenced_body(text).splitlines():
        match = _NUMBERED_ITEM.match(line)
        if match:
            items.append(match.group(2).strip())
    return items


def _dedupe(items: Sequence[str]) -> list[str]:
    seen = set()
    out = []
    for item in items:
        key = " ".join(item.split()).casefold()
        if key and key not in seen:
            seen.add(key)
            out.append(item)
    return out


class _Budget:
    """Request allowance for one logical operation."""

    def __init__(self, attempts: int):
        self.remaining = attempts
        self.spent = 0

    def take(self) -> None:
        self.remaining -= 1
        self.spent += 1


class RemoteBackend(GeneratorBackend):
    """Chat-completion HTTP client; see module docstring for the contract."""

    def __init__(self, config: BackendConfig, prompts: PromptLibrary | None = None):
        super().__init__(config)
        self.prompts = prompts or PromptLibrary.load()
        self._gate = threading.BoundedSemaphore(config.max_concurrency)

    # -- transport -------------------------------------------------------

    def _headers(self) -> dict[str, str]:
        headers = {}
        key = os.environ.get(self.config.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _complete(self, prompt: str, temperature: float, budget: _Budget) -> str:
        body = {
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": temperature,
            "seed": self.config.seed,
        }
        last_error = "no attempts made"
        while budget.remaining > 0:
            budget.take()
            try:
                with self._gate:
                    response = requests.post(
                        self.config.endpoint,
                        json=body,
                        headers=self._headers(),
                        timeout=self.config.timeout,
                    )
            except requests.RequestException as exc:
                last_error = f"{type(exc).__name__}: {exc}"
                continue
            if response.status_code != 200:
                last_error = f"HTTP {response.status_code}"
                continue
            try:
                content = response.json()["choices"][0]["message"]["content"]
            except (ValueError, LookupError, TypeError):
                last_error = "malformed completion payload"
                continue
            if not str(content).strip():
                last_error = "empty generation"
                continue
            return str(content)
        raise BackendError(
            f"backend unavailable after {budget.spent} attempts ({last_error})"
        )

    def _budget(self) -> _Budget:
        return _Budget(self.config.max_retries + 1)

    def _pairs_with_repair(
        self, prompt: str, keys: Sequence[str]
    ) -> tuple[dict[str, float], str, bool, int]:
        """Run the strict -> reprompt -> repair ladder for one numeric block."""
        budget = self._budget()
        first = self._complete(prompt, self.config.temperature, budget)
        values = _strict_pairs(first, keys)
        if values is not None:
            return values, first, False, budget.spent
        texts = [first]
        if budget.remaining > 0:
            stricter = prompt + "\n\n" + self.prompts.get("reprompt_strict").template
            second = self._complete(stricter, self.config.temperature, budget)
            values = _strict_pairs(second, keys)
            if values is not None:
                return values, second, False, budget.spent
            texts.insert(0, second)
        repaired = _repair_pairs(texts, keys)
        if repaired is None:
            raise BackendError(
                f"unparseable numeric block after repair (keys: {list(keys)})"
            )
        return repaired, texts[0], True, budget.spent

    # -- operations ------------------------------------------------------

    def extract_symptom_text(self, dialogue: Sequence[Exchange]) -> ElicitationResult:
        prompt = self.prompts.get("extract_symptoms").render(
            dialogue=dialogue_text(dialogue)
        )
        budget = self._budget()
        text = self._complete(prompt, self.config.temperature, budget)
        return ElicitationResult(
            value=_fenced_body(text).strip(),
            raw_text=text,
            attempt_count=budget.spent,
        )

    def elicit_distribution(
        self,
        gamma_text: str,
        dialogue: Sequence[Exchange],
        candidate_disease_ids: Sequence[str],
    ) -> ElicitationResult:
        if not candidate_disease_ids:
            raise BackendError("elicit_distribution needs at least one candidate")
        prompt = self.prompts.get("elicit_distribution").render(
            gamma=gamma_text,
            dialogue=dialogue_text(dialogue),
            candidates="\n".join(candidate_disease_ids),
        )
        keys = list(candidate_disease_ids) + ["other"]
        values, raw, repaired, attempts = self._pairs_with_repair(prompt, keys)
        weights = {disease: values[disease] for disease in candidate_disease_ids}
        other = values["other"]
        if sum(weights.values()) + other <= 0:
            raise BackendError("all-zero weight vector from backend")
        return ElicitationResult(
            value=(weights, other),
            raw_text=raw,
            repaired=repaired,
            attempt_count=attempts,
        )

    def generate_questions(
        self,
        upsilon_text: str,
        dialogue: Sequence[Exchange],
        dist: DiseaseDistribution,
        k: int,
    ) -> ElicitationResult:
        if k < 1:
            raise BackendError("k must be at least 1")
        ranked = sorted(dist.entries.items(), key=lambda kv: (-kv[1], kv[0]))
        dist_lines = [f"{disease}: {prob:.4f}" for disease, prob in ranked]
        dist_lines.append(f"other: {dist.other_mass:.4f}")
        prompt = self.prompts.get("generate_questions").render(
            k=k,
            upsilon=upsilon_text,
            dialogue=dialogue_text(dialogue),
            distribution="\n".join(dist_lines),
        )
        budget = self._budget()
        text = self._complete(prompt, self.config.temperature, budget)
        items = _dedupe(_numbered_items(text))
        if not items and budget.remaining > 0:
            stricter = prompt + "\n\n" + self.prompts.get("reprompt_strict").template
            text = self._complete(stricter, self.config.temperature, budget)
            items = _dedupe(_numbered_items(text))
        if not items:
            raise BackendError("empty question pool after retries")
        questions = []
        for index, item in enumerate(items[:k]):
            question_text, _, rationale = item.partition("|")
            questions.append(
                CandidateQuestion(
                    id=index,
                    text=question_text.strip(),
                    rationale=rationale.strip(),
                )
            )
        return ElicitationResult(
            value=questions, raw_text=text, attempt_count=budget.spent
        )

    def simulate_responses(
        self,
        question: CandidateQuestion,
        dialogue: Sequence[Exchange],
        l_max: int = 5,
    ) -> ElicitationResult:
        prompt = self.prompts.get("simulate_responses").render(
            l_max=l_max,
            dialogue=dialogue_text(dialogue),
            question=question.text,
        )
        budget = self._budget()
        text = self._complete(prompt, self.config.temperature, budget)
        items = _dedupe(_numbered_items(text))
        if len(items) < 2 and budget.remaining > 0:
            stricter = prompt + "\n\n" + self.prompts.get("reprompt_strict").template
            text = self._complete(stricter, self.config.temperature, budget)
            items = _dedupe(_numbered_items(text))
        if len(items) < 2:
            raise BackendError("fewer than 2 distinct responses after retries")
        return ElicitationResult(
            value=items[:l_max], raw_text=text, attempt_count=budget.spent
        )

    def elicit_likelihood_row(
        self,
        question: CandidateQuestion,
        responses: Sequence[str],
        disease: DiseaseEntry,
        dialogue: Sequence[Exchange],
    ) -> ElicitationResult:
        if not disease.context:
            raise BackendError(f"disease {disease.id} has no guideline context")
        if not responses:
            raise BackendError("likelihood row needs at least one response")
        listed = "\n".join(f"{i + 1}. {text}" for i, text in enumerate(responses))
        prompt = self.prompts.get("elicit_likelihood_row").render(
            disease_name=disease.name,
            disease_context=disease.context,
            dialogue=dialogue_text(dialogue),
            question=question.text,
            responses=listed,
        )
        keys = [str(i + 1) for i in range(len(responses))]
        values, raw, repaired, attempts = self._pairs_with_repair(prompt, keys)
        row = []
        clamped = False
        for key in keys:
            value = values[key]
            bounded = min(max(value, 0.0), 1.0)
            clamped = clamped or bounded != value
            row.append(bounded)
        return ElicitationResult(
            value=row,
            raw_text=raw,
            repaired=repaired or clamped,
            attempt_count=attempts,
        )

    def humanize_question(self, question_text: str) -> ElicitationResult:
        prompt = self.prompts.get("humanize_question").render(question=question_text)
        budget = self._budget()
        text = self._complete(prompt, self.config.temperature, budget)
        return ElicitationResult(
            value=" ".join(_fenced_body(text).split()),
            raw_text=text,
            attempt_count=budget.spent,
        )

    def respond_as_patient(
        self,
        profile: PatientLike,
        question_text: str,
        dialogue: Sequence[Exchange],
    ) -> ElicitationResult:
        persona_method = getattr(profile, "persona_text", None)
        if callable(persona_method):
            persona = persona_method()
        else:
            persona = f"Opening statement: {profile.opening_statement}"
        facts = "\n".join(
            f"- {topic}: {answer}" for topic, answer in sorted(profile.facts.items())
        )
        prompt = self.prompts.get("patient_persona").render(
            persona=persona,
            facts=facts or "- (none)",
            question=question_text,
        )
        budget = self._budget()
        text = self._complete(prompt, self.config.patient_temperature, budget)
        return ElicitationResult(
            value=_fenced_body(text).strip(),
            raw_text=text,
            attempt_count=budget.spent,
        )
