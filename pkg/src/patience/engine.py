"""Dialogue orchestrator.

Runs the consultation loop: map the dialogue to guideline symptoms, predict a
disease distribution, generate a candidate question pool, score each candidate
by one-step-lookahead expected entropy, ask the best one, incorporate the
answer, and repeat until a stopping rule fires.  Every stage appends to a
transparency trace that serializes losslessly (see transcript.py).
"""

from __future__ import annotations

import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

from . import kb as kb_mod
from .backends import BackendConfig, MemoizingBackend, make_backend
from .errors import EngineStateError, PolicyError
from .kb import DiseaseEntry, KnowledgeBase
from .prob import (
    LIKELIHOOD_FLOOR,
    CandidateQuestion,
    DiseaseDistribution,
    LookaheadTable,
    SelectionReport,
    entropy,
    normalize,
    select_question,
)

OPENING_QUESTION = "What brings you in today? Please describe what you're feeling."

POLICIES = ("app", "random", "first")

# Stop reasons, checked in this order; exactly one is ever reported.
STOP_MAX_TURNS = "max_turns"
STOP_ENTROPY = "entropy"
STOP_TOP1 = "top1"
STOP_UNINFORMATIVE = "uninformative"
STOP_ONESHOT = "oneshot"


@dataclass(frozen=True)
class SessionConfig:
    """Everything a consultation session needs, in one immutable value."""

    kb_path: str
    backend: BackendConfig
    k: int = 5
    l_max: int = 5
    max_turns: int = 6
    stop_entropy: float = 0.5
    stop_top1: float = 0.6
    selection_mode: str = "literal"
    top_n_symptoms: int = 3
    remap_every_turn: bool = True
    humanize: bool = True
    row_normalize: bool = False
    uninformative_stop: int = 2  # consecutive flagged selections; 0 disables
    policy: str = "app"
    policy_seed: int = 0

    def validate(self) -> None:
        self.backend.validate()
        if not self.kb_path:
            raise EngineStateError("kb_path is required")
        if self.k < 1:
            raise EngineStateError("k must be at least 1")
        if not (2 <= self.l_max <= 5):
            raise EngineStateError("l_max must be between 2 and 5")
        if self.max_turns < 1:
            raise EngineStateError("max_turns must be at least 1")
        if self.stop_top1 < 0:
            raise EngineStateError("stop_top1 must be non-negative")
        if self.selection_mode not in ("literal", "eig"):
            raise EngineStateError(f"unknown selection_mode: {self.selection_mode!r}")
        if self.top_n_symptoms < 1:
            raise EngineStateError("top_n_symptoms must be at least 1")
        if self.uninformative_stop < 0:
            raise EngineStateError("uninformative_stop must be non-negative")
        if self.policy not in POLICIES:
            raise PolicyError(f"unknown policy: {self.policy!r}")


@dataclass(frozen=True)
class PredictionRecord:
    """Where one per-turn distribution came from."""

    iteration: int
    symptom_text: str
    mapped_symptoms: tuple[str, ...]
    candidates: tuple[str, ...]
    notes: tuple[str, ...] = ()


@dataclass(frozen=True)
class SelectionRecord:
    """One follow-up choice: the pool, the scoring, and the phrasing."""

    iteration: int  # iteration of the distribution this selection was based on
    pool: tuple[CandidateQuestion, ...]
    tables: tuple[LookaheadTable, ...]  # empty under baseline policies
    report: SelectionReport
    selected_raw: str
    selected_asked: str
    notes: tuple[str, ...] = ()


@dataclass(frozen=True)
class Diagnosis:
    """Terminal outcome of a session."""

    disease_id: str
    name: str
    probability: float
    distribution: DiseaseDistribution
    turns: int
    stop_reason: str


@dataclass
class DialogueState:
    """Complete evolving record of one consultation.

    ``turns`` holds answered follow-up exchanges only; the opening exchange is
    stored separately, so ``iteration == len(turns)`` and the distribution
    history has ``iteration + 1`` entries (one prediction after the opening,
    one after each follow-up answer).
    """

    config: SessionConfig
    opening_question: str
    opening_statement: str
    turns: list[tuple[str, str]] = field(default_factory=list)
    iteration: int = 0
    mapped_symptoms: list[str] = field(default_factory=list)
    distribution_history: list[DiseaseDistribution] = field(default_factory=list)
    entropy_trace: list[float] = field(default_factory=list)
    prediction_records: list[PredictionRecord] = field(default_factory=list)
    selection_records: list[SelectionRecord] = field(default_factory=list)
    status: str = "active"  # active | diagnosed | exhausted
    pending_question: CandidateQuestion | None = None
    pending_asked_text: str = ""
    diagnosis: Diagnosis | None = None
    policy_rng: random.Random | None = field(default=None, repr=False, compare=False)

    def dialogue(self) -> list[tuple[str, str]]:
        return [(self.opening_question, self.opening_statement), *self.turns]

    def check_invariants(self) -> None:
        if len(self.turns) != self.iteration:
            raise EngineStateError("turn count does not match iteration")
        if self.distribution_history:
            n = self.iteration + 1
            if len(self.distribution_history) != n or len(self.entropy_trace) != n:
                raise EngineStateError("distribution history misaligned with iteration")
            for dist, h in zip(self.distribution_history, self.entropy_trace):
                if entropy(dist) != h:
                    raise EngineStateError("entropy trace mismatch")


class Engine:
    """Holds the loaded KB and backend; orchestrates sessions."""

    def __init__(self, config: SessionConfig, kb: KnowledgeBase | None = None):
        config.validate()
        self.config = config
        self.kb = kb if kb is not None else kb_mod.ingest(config.kb_path)
        self.backend = MemoizingBackend(make_backend(config.backend))

    # -- helpers ---------------------------------------------------------

    def _rng_for(self, state: DialogueState) -> random.Random:
        if state.policy_rng is None:
            state.policy_rng = random.Random(self.config.policy_seed)
        return state.policy_rng

    def _disease_entry(self, disease_id: str) -> DiseaseEntry:
        entry = self.kb.diseases.get(disease_id)
        if entry is None:
            # a backend introduced an id the KB does not know; elicit against
            # a minimal stand-in context so the lookahead can still cover it
            entry = DiseaseEntry(id=disease_id, name=disease_id, context=disease_id)
        return entry

    def _retrieve(self, state: DialogueState) -> tuple[str, str, list[str], tuple[str, ...], str, list[str]]:
        """Map dialogue to symptoms and gather contexts.

        Returns (gamma, upsilon, candidate ids, notes, symptom_text, mapped ids).
        """
        notes: list[str] = []
        dialogue = state.dialogue()
        extracted = self.backend.extract_symptom_text(dialogue)
        symptom_text = extracted.value
        if extracted.repaired:
            notes.append("symptom extraction repaired")
        ranked = kb_mod.map_to_symptoms(
            self.kb, symptom_text, top_n=self.config.top_n_symptoms
        )
        if ranked:
            entries = [entry for entry, _ in ranked]
            gamma, upsilon, candidates = kb_mod.gather_context(self.kb, entries)
            return gamma, upsilon, candidates, tuple(notes), symptom_text, [e.id for e in entries]
        # nothing mapped: fall back to the whole manual
        notes.append("no symptoms mapped; falling back to whole knowledge base")
        entries = list(self.kb.symptoms.values())
        if entries:
            gamma, upsilon, _ = kb_mod.gather_context(self.kb, entries)
        else:
            gamma = upsilon = ""
        candidates = list(self.kb.diseases)
        return gamma, upsilon, candidates, tuple(notes), symptom_text, []

    def _predict(self, state: DialogueState) -> str:
        """Re-elicit the disease distribution; returns the upsilon context."""
        remap = self.config.remap_every_turn or not state.prediction_records
        if remap:
            gamma, upsilon, candidates, notes, symptom_text, mapped = self._retrieve(state)
        else:
            first = state.prediction_records[0]
            symptom_text = first.symptom_text
            mapped = list(first.mapped_symptoms)
            notes = ()
            if mapped:
                entries = [self.kb.symptoms[s] for s in mapped]
                gamma, upsilon, candidates = kb_mod.gather_context(self.kb, entries)
            else:
                entries = list(self.kb.symptoms.values())
                gamma, upsilon, _ = kb_mod.gather_context(self.kb, entries)
                candidates = list(self.kb.diseases)
        notes = list(notes)
        elicited = self.backend.elicit_distribution(gamma, state.dialogue(), candidates)
        weights, other_weight = elicited.value
        weights = dict(weights)
        if elicited.repaired:
            notes.append("distribution elicitation repaired")
        if state.distribution_history:
            previous = state.distribution_history[-1]
            for disease_id in previous.entries:
                if disease_id not in weights:
                    weights[disease_id] = LIKELIHOOD_FLOOR
                    notes.append(f"carried absent candidate at floor weight: {disease_id}")
        dist, repair_notes = normalize(weights, other_weight, iteration=state.iteration)
        notes.extend(repair_notes)
        state.mapped_symptoms = list(mapped)
        state.distribution_history.append(dist)
        state.entropy_trace.append(entropy(dist))
        state.prediction_records.append(
            PredictionRecord(
                iteration=state.iteration,
                symptom_text=symptom_text,
                mapped_symptoms=tuple(mapped),
                candidates=tuple(candidates),
                notes=tuple(notes),
            )
        )
        return upsilon

    def _build_tables(
        self,
        pool: Sequence[CandidateQuestion],
        dist: DiseaseDistribution,
        dialogue: list[tuple[str, str]],
    ) -> list[LookaheadTable]:
        response_sets = [
            self.backend.simulate_responses(q, dialogue, self.config.l_max).value
            for q in pool
        ]
        disease_ids = list(dist.entries)
        cells = [(qi, d) for qi in range(len(pool)) for d in disease_ids]

        def fetch(cell):
            qi, disease_id = cell
            return self.backend.elicit_likelihood_row(
                pool[qi],
                response_sets[qi],
                self._disease_entry(disease_id),
                dialogue,
            ).value

        workers = self.config.backend.max_concurrency
        if workers > 1 and len(cells) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool_exec:
                rows = list(pool_exec.map(fetch, cells))
        else:
            rows = [fetch(cell) for cell in cells]
        tables = []
        for qi, question in enumerate(pool):
            q_rows = {
                d: rows[i]
                for i, (ci, d) in enumerate(cells)
                if ci == qi
            }
            tables.append(
                LookaheadTable.from_elicited(
                    question,
                    response_sets[qi],
                    q_rows,
                    l_max=self.config.l_max,
                    row_normalize=self.config.row_normalize,
                )
            )
        return tables

    def _select(self, state: DialogueState, upsilon: str) -> CandidateQuestion:
        dialogue = state.dialogue()
        dist = state.distribution_history[-1]
        notes: list[str] = []
        generated = self.backend.generate_questions(upsilon, dialogue, dist, self.config.k)
        pool = list(generated.value)
        if not pool:
            raise EngineStateError("backend produced an empty question pool")
        if generated.repaired:
            notes.append("question generation repaired")
        policy = self.config.policy
        if policy == "app":
            tables = tuple(self._build_tables(pool, dist, dialogue))
            question, report = select_question(
                dist, list(tables), mode=self.config.selection_mode
            )
            floored = sum(len(t.floored_cells) for t in tables)
            if floored:
                notes.append(f"floored {floored} zero likelihood cells")
        else:
            tables = ()
            if policy == "first":
                question = pool[0]
            else:  # random
                question = self._rng_for(state).choice(pool)
            report = SelectionReport(
                mode=policy,
                prior_entropy=entropy(dist),
                entries=(),
                selected_id=question.id,
                uninformative=False,
            )
            notes.append(f"baseline policy {policy!r}: lookahead skipped")
        asked = question.text
        if self.config.humanize:
            humanized = self.backend.humanize_question(question.text)
            asked = humanized.value
            if humanized.repaired:
                notes.append("humanized phrasing repaired")
        state.selection_records.append(
            SelectionRecord(
                iteration=state.iteration,
                pool=tuple(pool),
                tables=tables,
                report=report,
                selected_raw=question.text,
                selected_asked=asked,
                notes=tuple(notes),
            )
        )
        state.pending_question = question
        state.pending_asked_text = asked
        return replace(question, text=asked)

    def _trailing_uninformative(self, state: DialogueState) -> int:
        streak = 0
        for record in reversed(state.selection_records):
            if record.report.uninformative:
                streak += 1
            else:
                break
        return streak

    def _stop_reason(self, state: DialogueState) -> str | None:
        if state.iteration >= self.config.max_turns:
            return STOP_MAX_TURNS
        h = state.entropy_trace[-1]
        if h <= self.config.stop_entropy:
            return STOP_ENTROPY
        dist = state.distribution_history[-1]
        top = dist.top(1)
        if top and top[0][1] >= self.config.stop_top1:
            return STOP_TOP1
        if (
            self.config.uninformative_stop
            and self._trailing_uninformative(state) >= self.config.uninformative_stop
        ):
            return STOP_UNINFORMATIVE
        return None

    # -- public operations ----------------------------------------------

    def start_session(self, opening_statement: str) -> tuple[DialogueState, CandidateQuestion]:
        if not opening_statement or not opening_statement.strip():
            raise EngineStateError("opening statement must be non-empty")
        state = DialogueState(
            config=self.config,
            opening_question=OPENING_QUESTION,
            opening_statement=opening_statement.strip(),
        )
        upsilon = self._predict(state)
        question = self._select(state, upsilon)
        state.check_invariants()
        return state, question

    def step(
        self, state: DialogueState, patient_response: str
    ) -> tuple[DialogueState, CandidateQuestion | None, Diagnosis | None]:
        if state.status != "active":
            raise EngineStateError(f"cannot step a session in status {state.status!r}")
        if state.pending_question is None:
            raise EngineStateError("no question is pending")
        if not patient_response or not patient_response.strip():
            raise EngineStateError("patient response must be non-empty")
        state.turns.append((state.pending_asked_text, patient_response.strip()))
        state.iteration += 1
        try:
            upsilon = self._predict(state)
        except Exception:
            state.turns.pop()
            state.iteration -= 1
            raise
        reason = self._stop_reason(state)
        if reason is not None:
            diagnosis = self.diagnose(state, reason)
            state.check_invariants()
            return state, None, diagnosis
        question = self._select(state, upsilon)
        state.check_invariants()
        return state, question, None

    def diagnose(self, state: DialogueState, reason: str) -> Diagnosis:
        """Close the session with the current most probable disease."""
        if not state.distribution_history:
            raise EngineStateError("cannot diagnose before the first prediction")
        dist = state.distribution_history[-1]
        top = dist.top(1)
        if not top:
            raise EngineStateError("distribution has no named entries")
        disease_id, probability = top[0]
        diagnosis = Diagnosis(
            disease_id=disease_id,
            name=self._disease_entry(disease_id).name,
            probability=probability,
            distribution=dist,
            turns=state.iteration,
            stop_reason=reason,
        )
        state.diagnosis = diagnosis
        state.status = "diagnosed" if reason in (STOP_ENTROPY, STOP_TOP1, STOP_ONESHOT) else "exhausted"
        state.pending_question = None
        state.pending_asked_text = ""
        return diagnosis

    def trace(self, state: DialogueState) -> dict:
        """Full transparency report as a JSON-ready dict."""
        return build_trace(state)


def build_trace(state: DialogueState) -> dict:
    config = state.config
    backend = config.backend
    doc = {
        "format": "consult-transcript",
        "version": 1,
        "session": {
            "opening_question": state.opening_question,
            "opening_statement": state.opening_statement,
            "status": state.status,
            "iteration": state.iteration,
            "pending_question": state.pending_asked_text or None,
        },
        "config": {
            "kb_path": config.kb_path,
            "k": config.k,
            "l_max": config.l_max,
            "max_turns": config.max_turns,
            "stop_entropy": config.stop_entropy,
            "stop_top1": config.stop_top1,
            "selection_mode": config.selection_mode,
            "top_n_symptoms": config.top_n_symptoms,
            "remap_every_turn": config.remap_every_turn,
            "humanize": config.humanize,
            "row_normalize": config.row_normalize,
            "uninformative_stop": config.uninformative_stop,
            "policy": config.policy,
            "policy_seed": config.policy_seed,
            "backend": {
                "kind": backend.kind,
                "model_name": backend.model_name,
                "script_dir": backend.script_dir,
                "strict": backend.strict,
                "seed": backend.seed,
            },
        },
        "turns": [
            {"question": question, "response": response}
            for question, response in state.turns
        ],
        "predictions": [
            {
                "iteration": record.iteration,
                "symptom_text": record.symptom_text,
                "mapped_symptoms": list(record.mapped_symptoms),
                "candidates": list(record.candidates),
                "notes": list(record.notes),
                "distribution": {
                    "entries": dict(dist.entries),
                    "other_mass": dist.other_mass,
                },
                "entropy": h,
            }
            for record, dist, h in zip(
                state.prediction_records, state.distribution_history, state.entropy_trace
            )
        ],
        "selections": [
            {
                "iteration": record.iteration,
                "pool": [
                    {"id": q.id, "text": q.text, "rationale": q.rationale}
                    for q in record.pool
                ],
                "tables": [
                    {
                        "question_id": table.question.id,
                        "responses": list(table.responses),
                        "rows": {d: list(row) for d, row in table.likelihoods.items()},
                        "floored_cells": [list(cell) for cell in table.floored_cells],
                    }
                    for table in record.tables
                ],
                "report": {
                    "mode": record.report.mode,
                    "prior_entropy": record.report.prior_entropy,
                    "entries": [list(e) for e in record.report.entries],
                    "selected_id": record.report.selected_id,
                    "uninformative": record.report.uninformative,
                },
                "selected_raw": record.selected_raw,
                "selected_asked": record.selected_asked,
                "notes": list(record.notes),
            }
            for record in state.selection_records
        ],
    }
    if state.diagnosis is not None:
        doc["diagnosis"] = {
            "disease_id": state.diagnosis.disease_id,
            "name": state.diagnosis.name,
            "probability": state.diagnosis.probability,
            "turns": state.diagnosis.turns,
            "stop_reason": state.diagnosis.stop_reason,
            "distribution": {
                "entries": dict(state.diagnosis.distribution.entries),
                "other_mass": state.diagnosis.distribution.other_mass,
            },
        }
    return doc
