"""Guideline knowledge base: record types, JSONL ingestion, and lexical
symptom retrieval.

The KB stores symptom entries in two registers (professional and consumer
naming) together with two context blobs per symptom: ``context_gamma``
(causes / pathophysiology / etiology, grounding disease probability
elicitation) and ``context_upsilon`` (diagnosis-procedure text, grounding
question generation).  Disease entries carry the guideline context used for
response-likelihood elicitation.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

from .errors import KnowledgeBaseError, RetrievalError

_TOKEN_RE = re.compile(r"[a-z0-9]+")

# Default number of retrieved symptoms feeding context gathering.
DEFAULT_TOP_N = 3

# Function words excluded from lexical scoring so incidental phrasing overlap
# between short guideline entries never produces a spurious match.
STOPWORDS = frozenset(
    """
    a an the and or but of in on at to with without for by as is are was were
    be been it its this that these those i my me your you he she they them
    when while after before during often usually sometimes worse better much
    very do does did not no yes if so than then there here over under
    """.split()
)


def tokenize(text: str) -> list[str]:
    """Lowercased alphanumeric tokens; punctuation is stripped."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class SymptomEntry:
    id: str
    name_prof: str
    name_cons: str
    description: str
    context_gamma: str
    context_upsilon: str
    linked_diseases: tuple[str, ...]


@dataclass(frozen=True)
class DiseaseEntry:
    id: str
    name: str
    context: str
    specialty: str = ""


@dataclass(frozen=True)
class KbMeta:
    source: str = ""
    version: str = ""


@dataclass(frozen=True)
class KnowledgeBase:
    symptoms: dict[str, SymptomEntry]
    diseases: dict[str, DiseaseEntry]
    meta: KbMeta = field(default_factory=KbMeta)


_SYMPTOM_FIELDS = (
    "id",
    "name_prof",
    "name_cons",
    "description",
    "context_gamma",
    "context_upsilon",
    "linked_diseases",
)
_DISEASE_FIELDS = ("id", "name", "context")


def ingest(path: str | Path) -> KnowledgeBase:
    """Load a KB from a line-delimited record file.

    One JSON object per line, each self-describing through its ``kind`` field
    (``symptom`` | ``disease`` | optional ``meta``).  Lines starting with '#'
    and blank lines are ignored.  Ingestion is deterministic and validates
    referential integrity before returning.
    """
    path = Path(path)
    if not path.exists():
        raise KnowledgeBaseError(f"knowledge base file not found: {path}")
    symptoms: dict[str, SymptomEntry] = {}
    diseases: dict[str, DiseaseEntry] = {}
    meta = KbMeta(source=path.name)
    seen_any = False
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            seen_any = True
            try:
                record = json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise KnowledgeBaseError(f"{path}:{lineno}: invalid JSON ({exc.msg})")
            if not isinstance(record, dict) or "kind" not in record:
                raise KnowledgeBaseError(f"{path}:{lineno}: record has no 'kind' field")
            kind = record["kind"]
            if kind == "meta":
                meta = KbMeta(
                    source=str(record.get("source", path.name)),
                    version=str(record.get("version", "")),
                )
            elif kind == "symptom":
                entry = _parse_symptom(record, path, lineno)
                if entry.id in symptoms:
                    raise KnowledgeBaseError(
                        f"{path}:{lineno}: duplicate symptom id {entry.id!r}"
                    )
                symptoms[entry.id] = entry
            elif kind == "disease":
                disease = _parse_disease(record, path, lineno)
                if disease.id in diseases:
                    raise KnowledgeBaseError(
                        f"{path}:{lineno}: duplicate disease id {disease.id!r}"
                    )
                diseases[disease.id] = disease
            else:
                raise KnowledgeBaseError(f"{path}:{lineno}: unknown kind {kind!r}")
    if not seen_any:
        raise KnowledgeBaseError(f"{path}: no records")
    for symptom in symptoms.values():
        for disease_id in symptom.linked_diseases:
            if disease_id not in diseases:
                raise KnowledgeBaseError(
                    f"{path}: symptom {symptom.id!r} links unknown disease {disease_id!r}"
                )
    return KnowledgeBase(symptoms=symptoms, diseases=diseases, meta=meta)


def _require(record: dict, fields: tuple[str, ...], path: Path, lineno: int) -> None:
    for name in fields:
        if name not in record:
            raise KnowledgeBaseError(f"{path}:{lineno}: missing field {name!r}")


def _parse_symptom(record: dict, path: Path, lineno: int) -> SymptomEntry:
    _require(record, _SYMPTOM_FIELDS, path, lineno)
    if not record["id"]:
        raise KnowledgeBaseError(f"{path}:{lineno}: empty symptom id")
    for ctx in ("context_gamma", "context_upsilon"):
        if not str(record[ctx]).strip():
            raise KnowledgeBaseError(f"{path}:{lineno}: empty {ctx} for {record['id']!r}")
    linked = record["linked_diseases"]
    if not isinstance(linked, list):
        raise KnowledgeBaseError(f"{path}:{lineno}: linked_diseases must be a list")
    return SymptomEntry(
        id=str(record["id"]),
        name_prof=str(record["name_prof"]),
        name_cons=str(record["name_cons"]),
        description=str(record["description"]),
        context_gamma=str(record["context_gamma"]),
        context_upsilon=str(record["context_upsilon"]),
        linked_diseases=tuple(str(d) for d in linked),
    )


def _parse_disease(record: dict, path: Path, lineno: int) -> DiseaseEntry:
    _require(record, _DISEASE_FIELDS, path, lineno)
    if not record["id"]:
        raise KnowledgeBaseError(f"{path}:{lineno}: empty disease id")
    if not str(record["context"]).strip():
        raise KnowledgeBaseError(f"{path}:{lineno}: empty context for {record['id']!r}")
    return DiseaseEntry(
        id=str(record["id"]),
        name=str(record["name"]),
        context=str(record["context"]),
        specialty=str(record.get("specialty", "")),
    )


class SymptomScorer(Protocol):
    """Pluggable relevance scorer; an embedding-based one can slot in here."""

    def score_all(self, kb: KnowledgeBase, text: str) -> dict[str, float]:
        """Non-negative relevance score for every symptom id."""
        ...


class LexicalScorer:
    """BM25-style token-overlap scorer over both naming registers.

    Each symptom contributes two register documents (professional name +
    description, consumer name + description); a symptom's score is the max of
    its two register scores, so a hit in either register surfaces the entry
    once.  Scores are deterministic for a fixed KB and query.
    """

    def __init__(self, k1: float = 1.5, b: float = 0.75):
        self.k1 = k1
        self.b = b

    def score_all(self, kb: KnowledgeBase, text: str) -> dict[str, float]:
        def content_tokens(raw: str) -> list[str]:
            return [t for t in tokenize(raw) if t not in STOPWORDS]

        query = content_tokens(text)
        docs: list[tuple[str, list[str]]] = []
        for entry in kb.symptoms.values():
            docs.append((entry.id, content_tokens(entry.name_prof + " " + entry.description)))
            docs.append((entry.id, content_tokens(entry.name_cons + " " + entry.description)))
        n_docs = len(docs)
        avg_len = sum(len(d) for _, d in docs) / n_docs if n_docs else 0.0
        df: dict[str, int] = {}
        for _, doc in docs:
            for term in set(doc):
                df[term] = df.get(term, 0) + 1
        scores: dict[str, float] = {sid: 0.0 for sid in kb.symptoms}
        for sid, doc in docs:
            counts: dict[str, int] = {}
            for term in doc:
                counts[term] = counts.get(term, 0) + 1
            norm = self.k1 * (1 - self.b + self.b * len(doc) / avg_len) if avg_len else self.k1
            score = 0.0
            for term in query:  # query-term multiplicity counts
                tf = counts.get(term)
                if not tf:
                    continue
                idf = math.log(1 + (n_docs - df[term] + 0.5) / (df[term] + 0.5))
                score += idf * tf * (self.k1 + 1) / (tf + norm)
            scores[sid] = max(scores[sid], score)
        return scores


def map_to_symptoms(
    kb: KnowledgeBase,
    dialogue_text: str,
    top_n: int = DEFAULT_TOP_N,
    scorer: SymptomScorer | None = None,
) -> list[tuple[SymptomEntry, float]]:
    """Rank the KB symptoms most relevant to a dialogue snippet.

    Returns at most ``top_n`` (entry, score) pairs with positive score, ordered
    by descending score with ties broken by symptom id ascending.  An empty
    result means nothing in the KB overlapped the text at all.
    """
    if top_n < 1:
        raise RetrievalError("top_n must be at least 1")
    if not dialogue_text.strip():
        raise RetrievalError("empty dialogue text")
    if not kb.symptoms:
        raise RetrievalError("knowledge base has no symptoms")
    scorer = scorer or LexicalScorer()
    scores = scorer.score_all(kb, dialogue_text)
    ranked = sorted(
        ((kb.symptoms[sid], s) for sid, s in scores.items() if s > 0.0),
        key=lambda pair: (-pair[1], pair[0].id),
    )
    return ranked[:top_n]


def gather_context(
    kb: KnowledgeBase, symptoms: list[SymptomEntry]
) -> tuple[str, str, list[str]]:
    """Concatenate the retrieved symptoms' context blobs and collect candidates.

    Each context block is prefixed with a header naming its source entry so
    downstream prompts can cite which guideline entry a passage came from.
    Candidate disease ids are the deduplicated union of the symptoms' links,
    preserving first-seen order.
    """
    if not symptoms:
        raise RetrievalError("gather_context needs at least one symptom")
    for entry in symptoms:
        if kb.symptoms.get(entry.id) is not entry:
            raise RetrievalError(f"symptom {entry.id!r} is not from this knowledge base")
    gamma_blocks = []
    upsilon_blocks = []
    candidates: list[str] = []
    for entry in symptoms:
        gamma_blocks.append(f"[{entry.id}] {entry.name_prof}\n{entry.context_gamma}")
        upsilon_blocks.append(f"[{entry.id}] {entry.name_prof}\n{entry.context_upsilon}")
        for disease_id in entry.linked_diseases:
            if disease_id not in candidates:
                candidates.append(disease_id)
    return "\n\n".join(gamma_blocks), "\n\n".join(upsilon_blocks), candidates
