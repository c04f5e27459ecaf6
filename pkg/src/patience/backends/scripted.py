"""Deterministic scripted backend.

Each case script is a small world model for one complaint: an opening
statement that routes dialogues to it, base disease weights, a bank of
follow-up questions keyed by topic, per-topic response sets, and per-topic
likelihood tables.  Every operation is a pure lookup against this data, so
identical inputs always produce byte-identical outputs.

In strict mode, inputs the bundle cannot resolve raise a scripted-miss error;
in lenient mode (the default) documented neutral fallbacks apply.  Bundle
layout is documented in docs/scripted-backend.md.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from ..errors import BackendError, ScriptedMissError
from ..kb import DiseaseEntry, tokenize
from ..prob import CandidateQuestion, DiseaseDistribution
from .base import (
    BackendConfig,
    ElicitationResult,
    Exchange,
    GeneratorBackend,
    PatientLike,
    patient_utterances,
)

# Lenient-mode defaults, documented in docs/scripted-backend.md.
DEFAULT_NEUTRAL_LIKELIHOOD = 0.3
DEFAULT_CANDIDATE_WEIGHT = 0.05
DEFAULT_RESPONSES = ("Yes", "No")
UNSURE_ANSWER = "I'm not sure"


def _norm(text: str) -> str:
    return " ".join(tokenize(text))


@dataclass(frozen=True)
class ScriptedQuestion:
    topic: str
    text: str
    rationale: str = ""
    humanized: str = ""

    def surface_forms(self) -> tuple[str, ...]:
        forms = [self.text]
        if self.humanized:
            forms.append(self.humanized)
        return tuple(forms)


@dataclass(frozen=True)
class CaseScript:
    case_id: str
    opening: str
    symptom_summary: str
    base_weights: dict[str, float]
    other_weight: float
    questions: tuple[ScriptedQuestion, ...]
    responses: dict[str, tuple[str, ...]]
    likelihoods: dict[str, dict[str, tuple[float, ...]]]
    neutral_likelihood: float = DEFAULT_NEUTRAL_LIKELIHOOD
    default_weight: float = DEFAULT_CANDIDATE_WEIGHT

    def topic_for_question(self, question_text: str) -> str | None:
        wanted = _norm(question_text)
        for question in self.questions:
            for form in question.surface_forms():
                if _norm(form) == wanted:
                    return question.topic
        return None

    def neutral_row(self, length: int) -> tuple[float, ...]:
        return (self.neutral_likelihood,) * length


def load_case_script(path: Path) -> CaseScript:
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise BackendError(f"{path}: invalid JSON ({exc.msg})")
    for key in ("case_id", "opening", "symptom_summary", "base_weights", "questions"):
        if key not in data:
            raise BackendError(f"{path}: missing key {key!r}")
    questions = []
    topics = set()
    for i, q in enumerate(data["questions"]):
        if "topic" not in q or "text" not in q:
            raise BackendError(f"{path}: question {i} needs 'topic' and 'text'")
        if q["topic"] in topics:
            raise BackendError(f"{path}: duplicate topic {q['topic']!r}")
        topics.add(q["topic"])
        questions.append(
            ScriptedQuestion(
                topic=q["topic"],
                text=q["text"],
                rationale=q.get("rationale", ""),
                humanized=q.get("humanized", ""),
            )
        )
    responses = {}
    for topic, options in data.get("responses", {}).items():
        if topic not in topics:
            raise BackendError(f"{path}: responses for unknown topic {topic!r}")
        if len(options) < 2 or len(set(options)) != len(options):
            raise BackendError(f"{path}: topic {topic!r} needs >= 2 distinct responses")
        responses[topic] = tuple(str(o) for o in options)
    likelihoods = {}
    for topic, rows in data.get("likelihoods", {}).items():
        if topic not in responses:
            raise BackendError(f"{path}: likelihoods for topic {topic!r} without responses")
        table = {}
        for disease_id, row in rows.items():
            if len(row) != len(responses[topic]):
                raise BackendError(
                    f"{path}: row length mismatch for ({topic!r}, {disease_id!r})"
                )
            for value in row:
                if not (0.0 <= float(value) <= 1.0):
                    raise BackendError(
                        f"{path}: likelihood out of range for ({topic!r}, {disease_id!r})"
                    )
            table[disease_id] = tuple(float(v) for v in row)
        likelihoods[topic] = table
    base_weights = {str(d): float(w) for d, w in data["base_weights"].items()}
    for disease_id, weight in base_weights.items():
        if weight < 0:
            raise BackendError(f"{path}: negative base weight for {disease_id!r}")
    other_weight = float(data.get("other_weight", 0.0))
    if other_weight < 0:
        raise BackendError(f"{path}: negative other_weight")
    neutral = float(data.get("neutral_likelihood", DEFAULT_NEUTRAL_LIKELIHOOD))
    if not (0.0 < neutral <= 1.0):
        raise BackendError(f"{path}: neutral_likelihood must be in (0, 1]")
    return CaseScript(
        case_id=str(data["case_id"]),
        opening=str(data["opening"]),
        symptom_summary=str(data["symptom_summary"]),
        base_weights=base_weights,
        other_weight=other_weight,
        questions=tuple(questions),
        responses=responses,
        likelihoods=likelihoods,
        neutral_likelihood=neutral,
        default_weight=float(data.get("default_weight", DEFAULT_CANDIDATE_WEIGHT)),
    )


class ScriptedBackend(GeneratorBackend):
    """Replays case scripts; see module docstring."""

    def __init__(self, config: BackendConfig):
        super().__init__(config)
        bundle = Path(config.script_dir)
        if not bundle.is_dir():
            raise BackendError(f"script bundle directory not found: {bundle}")
        self.cases: dict[str, CaseScript] = {}
        for path in sorted(bundle.glob("*.json")):
            script = load_case_script(path)
            if script.case_id in self.cases:
                raise BackendError(f"duplicate case id {script.case_id!r} in bundle")
            self.cases[script.case_id] = script
        if not self.cases:
            raise BackendError(f"no case scripts in {bundle}")

    # -- routing ---------------------------------------------------------

    def case_for_opening(self, opening_answer: str) -> CaseScript | None:
        wanted = _norm(opening_answer)
        for script in self.cases.values():
            if _norm(script.opening) == wanted:
                return script
        for script in self.cases.values():
            have = _norm(script.opening)
            if have and (have in wanted or wanted in have):
                return script
        return None

    def _case_for_dialogue(self, dialogue: Sequence[Exchange], op: str) -> CaseScript | None:
        if dialogue:
            script = self.case_for_opening(dialogue[0][1])
            if script is not None:
                return script
        if self.config.strict:
            raise ScriptedMissError(f"{op}: no case script matches the dialogue opening")
        return None

    def _case_for_profile(self, profile: PatientLike) -> CaseScript | None:
        script = self.cases.get(getattr(profile, "case_id", ""))
        if script is not None:
            return script
        return self.case_for_opening(profile.opening_statement)

    @staticmethod
    def _match_response(options: Sequence[str], answer: str) -> int | None:
        wanted = _norm(answer)
        for i, option in enumerate(options):
            if _norm(option) == wanted:
                return i
        for i, option in enumerate(options):
            have = _norm(option)
            if have and (have in wanted or wanted in have):
                return i
        return None

    # -- operations ------------------------------------------------------

    def extract_symptom_text(self, dialogue: Sequence[Exchange]) -> ElicitationResult:
        if not dialogue:
            raise BackendError("extract_symptom_text: empty dialogue")
        script = self._case_for_dialogue(dialogue, "extract_symptom_text")
        if script is not None:
            return ElicitationResult(
                value=script.symptom_summary,
                raw_text=f"scripted:{script.case_id}:symptom_summary",
            )
        # identity fallback: the patient's own words already are the summary
        summary = "; ".join(u for u in patient_utterances(dialogue) if u.strip())
        return ElicitationResult(value=summary, raw_text="scripted:fallback:identity")

    def elicit_distribution(
        self,
        gamma_text: str,
        dialogue: Sequence[Exchange],
        candidate_disease_ids: Sequence[str],
    ) -> ElicitationResult:
        if not candidate_disease_ids:
            raise BackendError("elicit_distribution: no candidate diseases")
        script = self._case_for_dialogue(dialogue, "elicit_distribution")
        if script is None:
            weights = {d: 1.0 for d in candidate_disease_ids}
            return ElicitationResult(
                value=(weights, 0.0), raw_text="scripted:fallback:uniform"
            )
        weights = {
            d: script.base_weights.get(d, script.default_weight)
            for d in candidate_disease_ids
        }
        other = script.other_weight
        evidence: list[tuple[str, int]] = []
        seen_topics = set()
        for question_text, answer in dialogue[1:]:
            topic = script.topic_for_question(question_text)
            if topic is None or topic in seen_topics or topic not in script.responses:
                continue
            index = self._match_response(script.responses[topic], answer)
            if index is None:
                continue
            seen_topics.add(topic)
            evidence.append((topic, index))
        for topic, index in evidence:
            table = script.likelihoods.get(topic, {})
            length = len(script.responses[topic])
            for d in weights:
                row = table.get(d, script.neutral_row(length))
                weights[d] *= row[index]
            other *= script.neutral_likelihood
        trail = {
            "case": script.case_id,
            "evidence": [[t, i] for t, i in evidence],
        }
        return ElicitationResult(
            value=(weights, other),
            raw_text="scripted:distribution:" + json.dumps(trail, sort_keys=True),
        )

    def generate_questions(
        self,
        upsilon_text: str,
        dialogue: Sequence[Exchange],
        dist: DiseaseDistribution,
        k: int,
    ) -> ElicitationResult:
        if k < 1:
            raise BackendError("generate_questions: k must be at least 1")
        script = self._case_for_dialogue(dialogue, "generate_questions")
        if script is None:
            pool = [
                CandidateQuestion(
                    id=0,
                    text="Can you tell me more about your symptoms?",
                    rationale="open follow-up",
                )
            ]
            return ElicitationResult(value=pool, raw_text="scripted:fallback:generic")
        asked = {_norm(q) for q, _ in dialogue[1:]}
        fresh = [
            q
            for q in script.questions
            if not any(_norm(form) in asked for form in q.surface_forms())
        ]
        chosen = fresh if fresh else list(script.questions)  # recycle when exhausted
        seen_texts = set()
        pool = []
        for q in chosen:
            if q.text in seen_texts:
                continue
            seen_texts.add(q.text)
            pool.append(
                CandidateQuestion(id=len(pool), text=q.text, rationale=q.rationale)
            )
            if len(pool) == k:
                break
        return ElicitationResult(
            value=pool,
            raw_text=f"scripted:{script.case_id}:questions:{len(pool)}",
        )

    def simulate_responses(
        self,
        question: CandidateQuestion,
        dialogue: Sequence[Exchange],
        l_max: int = 5,
    ) -> ElicitationResult:
        script = self._case_for_dialogue(dialogue, "simulate_responses")
        topic = script.topic_for_question(question.text) if script else None
        if topic is None or topic not in (script.responses if script else {}):
            if self.config.strict:
                raise ScriptedMissError(
                    f"simulate_responses: no response set for {question.text!r}"
                )
            return ElicitationResult(
                value=list(DEFAULT_RESPONSES), raw_text="scripted:fallback:yes-no"
            )
        options = list(script.responses[topic])[:l_max]
        return ElicitationResult(
            value=options,
            raw_text=f"scripted:{script.case_id}:responses:{topic}",
        )

    def elicit_likelihood_row(
        self,
        question: CandidateQuestion,
        responses: Sequence[str],
        disease: DiseaseEntry,
        dialogue: Sequence[Exchange],
    ) -> ElicitationResult:
        script = self._case_for_dialogue(dialogue, "elicit_likelihood_row")
        topic = script.topic_for_question(question.text) if script else None
        if script is None or topic is None:
            if self.config.strict:
                raise ScriptedMissError(
                    f"elicit_likelihood_row: unknown question {question.text!r}"
                )
            neutral = DEFAULT_NEUTRAL_LIKELIHOOD
            return ElicitationResult(
                value=[neutral] * len(responses), raw_text="scripted:fallback:neutral-row"
            )
        table = script.likelihoods.get(topic, {})
        row = table.get(disease.id)
        if row is None:
            if self.config.strict and topic in script.likelihoods:
                raise ScriptedMissError(
                    f"elicit_likelihood_row: no row for ({topic!r}, {disease.id!r})"
                )
            row = script.neutral_row(len(responses))
        aligned = list(row[: len(responses)])
        while len(aligned) < len(responses):
            aligned.append(script.neutral_likelihood)
        return ElicitationResult(
            value=aligned,
            raw_text=f"scripted:{script.case_id}:row:{topic}:{disease.id}",
        )

    def elicit_likelihood(
        self,
        response_text: str,
        disease: DiseaseEntry,
        question: CandidateQuestion | None = None,
        responses: Sequence[str] | None = None,
        dialogue: Sequence[Exchange] = (),
    ) -> ElicitationResult:
        if question is not None and responses is not None:
            return super().elicit_likelihood(
                response_text, disease, question, responses, dialogue
            )
        # Bundle-wide cell lookup: find the response option in any topic's set.
        for script in self.cases.values():
            for topic, options in script.responses.items():
                index = self._match_response(options, response_text)
                if index is None:
                    continue
                row = script.likelihoods.get(topic, {}).get(disease.id)
                if row is None:
                    continue
                return ElicitationResult(
                    value=row[index],
                    raw_text=f"scripted:{script.case_id}:cell:{topic}:{disease.id}:{index}",
                )
        raise ScriptedMissError(
            f"elicit_likelihood: no scripted cell for ({response_text!r}, {disease.id!r})"
        )

    def humanize_question(self, question_text: str) -> ElicitationResult:
        wanted = _norm(question_text)
        for script in self.cases.values():
            for q in script.questions:
                if _norm(q.text) == wanted and q.humanized:
                    return ElicitationResult(
                        value=q.humanized,
                        raw_text=f"scripted:{script.case_id}:humanized:{q.topic}",
                    )
        # already plain wording: identity is the documented fallback
        return ElicitationResult(value=question_text, raw_text="scripted:identity")

    def respond_as_patient(
        self,
        profile: PatientLike,
        question_text: str,
        dialogue: Sequence[Exchange],
    ) -> ElicitationResult:
        script = self._case_for_profile(profile)
        topic = script.topic_for_question(question_text) if script else None
        if topic is not None and topic in profile.facts:
            return ElicitationResult(
                value=profile.facts[topic],
                raw_text=f"scripted:{script.case_id}:fact:{topic}",
            )
        question_tokens = set(tokenize(question_text))
        for fact_key in sorted(profile.facts):
            key_tokens = tokenize(fact_key.replace("_", " "))
            if key_tokens and all(t in question_tokens for t in key_tokens):
                return ElicitationResult(
                    value=profile.facts[fact_key],
                    raw_text=f"scripted:factkey:{fact_key}",
                )
        if self.config.strict:
            raise ScriptedMissError(
                f"respond_as_patient: no fact answers {question_text!r}"
            )
        return ElicitationResult(value=UNSURE_ANSWER, raw_text="scripted:fallback:unsure")
