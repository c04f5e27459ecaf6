"""Generator-backend boundary.

Every step of a consultation that needs generative behavior (symptom
extraction, distribution elicitation, question generation, response
simulation, likelihood elicitation, human-friendly rephrasing, persona
responses) is an operation of :class:`GeneratorBackend`.  Two implementations
exist: a deterministic scripted backend for tests and benchmarks, and an HTTP
chat-completion client for live services.

Dialogues are passed to backends as a sequence of (question, answer) text
pairs, the opening exchange first.
"""

from __future__ import annotations

import string
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass
from importlib import resources
from typing import Any, Mapping, Protocol, Sequence

from ..errors import BackendError
from ..kb import DiseaseEntry
from ..prob import CandidateQuestion, DiseaseDistribution

Exchange = tuple[str, str]  # (question text, patient answer)


def dialogue_text(dialogue: Sequence[Exchange]) -> str:
    """Render a dialogue as alternating speaker-tagged lines."""
    lines = []
    for question, answer in dialogue:
        lines.append(f"Doctor: {question}")
        lines.append(f"Patient: {answer}")
    return "\n".join(lines)


def patient_utterances(dialogue: Sequence[Exchange]) -> list[str]:
    return [answer for _, answer in dialogue]


class PatientLike(Protocol):
    """What a backend needs from a simulated-patient profile."""

    case_id: str
    opening_statement: str
    facts: Mapping[str, str]


@dataclass(frozen=True)
class BackendConfig:
    """Construction-time settings shared by all backend kinds."""

    kind: str = "scripted"
    script_dir: str = ""
    strict: bool = False
    endpoint: str = ""
    model_name: str = "default"
    temperature: float = 0.0
    patient_temperature: float = 0.7  # persona replies may vary; math calls must not
    timeout: float = 30.0
    max_retries: int = 2
    max_concurrency: int = 4
    api_key_env: str = "PATIENCE_API_KEY"
    seed: int = 0

    def validate(self) -> None:
        if self.kind not in ("scripted", "remote"):
            raise BackendError(f"unknown backend kind: {self.kind!r}")
        if self.kind == "remote" and not self.endpoint:
            raise BackendError("remote backend requires an endpoint")
        if self.kind == "scripted" and not self.script_dir:
            raise BackendError("scripted backend requires a script bundle directory")
        if self.temperature < 0 or self.patient_temperature < 0:
            raise BackendError("temperature must be non-negative")
        if self.timeout <= 0:
            raise BackendError("timeout must be positive")
        if self.max_retries < 0:
            raise BackendError("max_retries must be non-negative")
        if self.max_concurrency < 1:
            raise BackendError("max_concurrency must be at least 1")


@dataclass(frozen=True)
class ElicitationResult:
    """One backend answer plus its audit trail.

    ``raw_text`` is the verbatim generator output (or the scripted lookup it
    replayed); ``repaired`` marks values recovered by structured repair or
    clamping rather than strict parsing; ``attempt_count`` counts requests
    made, including reprompts and retries.
    """

    value: Any
    raw_text: str
    repaired: bool = False
    attempt_count: int = 1


@dataclass(frozen=True)
class PromptAsset:
    """A named instruction template with placeholder slots."""

    id: str
    template: str
    notes: str = ""

    def placeholders(self) -> set[str]:
        return {
            name
            for _, name, _, _ in string.Formatter().parse(self.template)
            if name is not None
        }

    def render(self, **values: Any) -> str:
        missing = self.placeholders() - set(values)
        if missing:
            raise BackendError(
                f"prompt asset {self.id!r} missing values for {sorted(missing)}"
            )
        return self.template.format(**values)


class PromptLibrary:
    """Loads the instruction templates shipped under ``assets/prompts``.

    Each ``<id>.txt`` file holds optional leading ``# notes:`` lines followed
    by the template body.
    """

    def __init__(self, assets: dict[str, PromptAsset]):
        self._assets = assets

    @classmethod
    def load(cls) -> "PromptLibrary":
        root = resources.files("patience").joinpath("assets/prompts")
        assets: dict[str, PromptAsset] = {}
        for entry in sorted(root.iterdir(), key=lambda e: e.name):
            if not entry.name.endswith(".txt"):
                continue
            asset_id = entry.name[: -len(".txt")]
            notes_lines = []
            body_lines = []
            for line in entry.read_text(encoding="utf-8").splitlines():
                if line.startswith("# notes:"):
                    notes_lines.append(line[len("# notes:") :].strip())
                else:
                    body_lines.append(line)
            assets[asset_id] = PromptAsset(
                id=asset_id,
                template="\n".join(body_lines).strip("\n"),
                notes=" ".join(notes_lines),
            )
        if not assets:
            raise BackendError("no prompt assets found")
        return cls(assets)

    def get(self, asset_id: str) -> PromptAsset:
        asset = self._assets.get(asset_id)
        if asset is None:
            raise BackendError(f"unknown prompt asset: {asset_id!r}")
        return asset

    def ids(self) -> list[str]:
        return sorted(self._assets)


class GeneratorBackend(ABC):
    """Abstract generator interface; all operations return ElicitationResults."""

    def __init__(self, config: BackendConfig):
        config.validate()
        self.config = config

    @abstractmethod
    def extract_symptom_text(self, dialogue: Sequence[Exchange]) -> ElicitationResult:
        """Summarize the dialogue's symptom content as short free text."""

    @abstractmethod
    def elicit_distribution(
        self,
        gamma_text: str,
        dialogue: Sequence[Exchange],
        candidate_disease_ids: Sequence[str],
    ) -> ElicitationResult:
        """Weights per candidate disease plus an explicit residual weight.

        value is (weights: dict[str, float], other_weight: float); weights are
        raw non-negative numbers, not yet normalized.
        """

    @abstractmethod
    def generate_questions(
        self,
        upsilon_text: str,
        dialogue: Sequence[Exchange],
        dist: DiseaseDistribution,
        k: int,
    ) -> ElicitationResult:
        """At most k distinct candidate follow-up questions with rationales."""

    @abstractmethod
    def simulate_responses(
        self,
        question: CandidateQuestion,
        dialogue: Sequence[Exchange],
        l_max: int = 5,
    ) -> ElicitationResult:
        """Between 2 and l_max distinct plausible patient answers."""

    @abstractmethod
    def elicit_likelihood_row(
        self,
        question: CandidateQuestion,
        responses: Sequence[str],
        disease: DiseaseEntry,
        dialogue: Sequence[Exchange],
    ) -> ElicitationResult:
        """One likelihood in [0,1] per response, conditioned on one disease."""

    @abstractmethod
    def humanize_question(self, question_text: str) -> ElicitationResult:
        """Rephrase a clinical question into everyday language."""

    @abstractmethod
    def respond_as_patient(
        self,
        profile: PatientLike,
        question_text: str,
        dialogue: Sequence[Exchange],
    ) -> ElicitationResult:
        """Answer a question in character, using only the profile's knowledge."""

    def elicit_likelihood(
        self,
        response_text: str,
        disease: DiseaseEntry,
        question: CandidateQuestion,
        responses: Sequence[str],
        dialogue: Sequence[Exchange] = (),
    ) -> ElicitationResult:
        """Single-cell convenience over the batched row elicitation."""
        responses = list(responses)
        if response_text not in responses:
            raise BackendError(f"response {response_text!r} not in candidate set")
        row = self.elicit_likelihood_row(question, responses, disease, dialogue)
        index = responses.index(response_text)
        return ElicitationResult(
            value=row.value[index],
            raw_text=row.raw_text,
            repaired=row.repaired,
            attempt_count=row.attempt_count,
        )


class MemoizingBackend:
    """Per-session memo cache over a delegate backend.

    Identical elicitations within a session are answered once; because every
    key includes the dialogue, a new turn's context naturally misses the cache
    and is elicited fresh.  Thread-safe for concurrent lookahead fan-out.
    """

    def __init__(self, delegate: GeneratorBackend):
        self.delegate = delegate
        self.config = delegate.config
        self._memo: dict[tuple, ElicitationResult] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def _cached(self, key: tuple, compute) -> ElicitationResult:
        with self._lock:
            if key in self._memo:
                self.hits += 1
                return self._memo[key]
        result = compute()
        with self._lock:
            self._memo.setdefault(key, result)
            self.misses += 1
        return result

    def reset(self) -> None:
        with self._lock:
            self._memo.clear()

    def extract_symptom_text(self, dialogue):
        key = ("extract", tuple(dialogue))
        return self._cached(key, lambda: self.delegate.extract_symptom_text(dialogue))

    def elicit_distribution(self, gamma_text, dialogue, candidate_disease_ids):
        key = ("dist", gamma_text, tuple(dialogue), tuple(candidate_disease_ids))
        return self._cached(
            key,
            lambda: self.delegate.elicit_distribution(
                gamma_text, dialogue, candidate_disease_ids
            ),
        )

    def generate_questions(self, upsilon_text, dialogue, dist, k):
        key = (
            "questions",
            upsilon_text,
            tuple(dialogue),
            tuple(dist.entries.items()),
            dist.other_mass,
            k,
        )
        return self._cached(
            key, lambda: self.delegate.generate_questions(upsilon_text, dialogue, dist, k)
        )

    def simulate_responses(self, question, dialogue, l_max=5):
        key = ("responses", question.text, tuple(dialogue), l_max)
        return self._cached(
            key, lambda: self.delegate.simulate_responses(question, dialogue, l_max)
        )

    def elicit_likelihood_row(self, question, responses, disease, dialogue):
        key = ("row", question.text, tuple(responses), disease.id, tuple(dialogue))
        return self._cached(
            key,
            lambda: self.delegate.elicit_likelihood_row(
                question, responses, disease, dialogue
            ),
        )

    def humanize_question(self, question_text):
        key = ("humanize", question_text)
        return self._cached(key, lambda: self.delegate.humanize_question(question_text))

    def respond_as_patient(self, profile, question_text, dialogue):
        # Persona replies are deliberately not cached: a live backend may vary
        # them by temperature, and the simulator replays dialogues verbatim.
        return self.delegate.respond_as_patient(profile, question_text, dialogue)

    def elicit_likelihood(self, response_text, disease, question, responses, dialogue=()):
        return GeneratorBackend.elicit_likelihood(
            self, response_text, disease, question, responses, dialogue
        )
