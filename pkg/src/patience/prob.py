"""Pure math core: disease distributions, one-step-lookahead posteriors, and
entropy-based follow-up question selection.

Everything in this module is a deterministic function of its inputs; no
generator backend is ever consulted here.  All entropies are reported in nats
(natural log); the base only rescales entropies uniformly and can never change
which question attains the minimum.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import DistributionError, LookaheadError, SelectionError

# Slack allowed when checking that probabilities sum to one.
PROB_TOL = 1e-9

# Elicited likelihoods of exactly zero are floored to this value before the
# joint-probability step, so a single noisy elicitation cannot irreversibly
# zero a disease out of the running.  Floored cells are reported to the caller.
LIKELIHOOD_FLOOR = 1e-6

# A candidate whose expected entropy sits within this tolerance of the prior
# entropy is considered uninformative.
UNINFORMATIVE_TOL = 1e-9

SELECTION_MODES = ("literal", "eig")


def _sorted_entries(entries: dict[str, float]) -> dict[str, float]:
    """Order entries by descending probability, ties broken by id ascending."""
    return dict(sorted(entries.items(), key=lambda kv: (-kv[1], kv[0])))


@dataclass(frozen=True)
class DiseaseDistribution:
    """A normalized probability distribution over candidate diseases.

    ``entries`` maps disease id to probability, ordered by descending
    probability (ties by id ascending).  ``other_mass`` is the residual
    probability assigned to conditions not individually enumerated.
    """

    entries: dict[str, float]
    other_mass: float = 0.0
    iteration: int = 0

    @classmethod
    def from_probabilities(
        cls, entries: dict[str, float], other_mass: float = 0.0, iteration: int = 0
    ) -> "DiseaseDistribution":
        dist = cls(_sorted_entries(dict(entries)), other_mass, iteration)
        dist.validate()
        return dist

    def validate(self) -> None:
        if self.iteration < 0:
            raise DistributionError("iteration must be non-negative")
        if self.other_mass < 0:
            raise DistributionError("other_mass must be non-negative")
        for disease_id, p in self.entries.items():
            if not disease_id:
                raise DistributionError("empty disease id")
            if not (0.0 <= p <= 1.0):
                raise DistributionError(f"probability out of range for {disease_id}: {p}")
        total = sum(self.entries.values()) + self.other_mass
        if abs(total - 1.0) > PROB_TOL:
            raise DistributionError(f"probabilities sum to {total}, not 1")
        ordered = list(self.entries.items())
        for (id_a, p_a), (id_b, p_b) in zip(ordered, ordered[1:]):
            if p_a < p_b or (p_a == p_b and id_a > id_b):
                raise DistributionError("entries are not in canonical order")

    def top(self, n: int) -> list[tuple[str, float]]:
        """The ``n`` highest-probability named entries (residual mass excluded)."""
        return list(self.entries.items())[:n]

    def probability(self, disease_id: str) -> float:
        return self.entries[disease_id]


def entropy(dist: DiseaseDistribution) -> float:
    """Shannon entropy of the distribution in nats, with 0*ln(0) defined as 0.

    The residual "other" bucket contributes a term like any enumerated entry.
    """
    h = 0.0
    for p in dist.entries.values():
        if p > 0.0:
            h -= p * math.log(p)
    if dist.other_mass > 0.0:
        h -= dist.other_mass * math.log(dist.other_mass)
    return max(h, 0.0)


@dataclass(frozen=True)
class CandidateQuestion:
    """One follow-up question candidate inside a per-turn pool."""

    id: int
    text: str
    rationale: str = ""


@dataclass(frozen=True)
class LookaheadTable:
    """Simulated responses and per-disease response likelihoods for one candidate.

    ``likelihoods[disease_id][l]`` is the conditional probability of observing
    response ``l`` given that disease's guideline context.  ``floored_cells``
    records (disease id, response index) pairs whose elicited value of exactly
    zero was raised to the likelihood floor.
    """

    question: CandidateQuestion
    responses: tuple[str, ...]
    likelihoods: dict[str, tuple[float, ...]]
    floored_cells: tuple[tuple[str, int], ...] = ()

    @classmethod
    def from_elicited(
        cls,
        question: CandidateQuestion,
        responses: list[str] | tuple[str, ...],
        rows: dict[str, list[float]],
        l_max: int = 5,
        row_normalize: bool = False,
    ) -> "LookaheadTable":
        """Build a table from raw elicited rows, applying the likelihood floor.

        Rows are kept exactly as elicited by default; the joint-update step
        supplies the only normalization.  ``row_normalize`` optionally rescales
        each disease's row to sum to one first (an alternative reading of the
        per-disease response model).
        """
        responses = tuple(responses)
        if not (2 <= len(responses) <= l_max):
            raise LookaheadError(
                f"response count {len(responses)} outside [2, {l_max}] "
                f"for question {question.id}"
            )
        floored: list[tuple[str, int]] = []
        table_rows: dict[str, tuple[float, ...]] = {}
        for disease_id, row in rows.items():
            if len(row) != len(responses):
                raise LookaheadError(
                    f"row length {len(row)} != response count {len(responses)} "
                    f"for disease {disease_id}"
                )
            fixed = []
            for l, value in enumerate(row):
                if not (0.0 <= value <= 1.0):
                    raise LookaheadError(
                        f"likelihood out of range for ({disease_id}, response {l}): {value}"
                    )
                if value == 0.0:
                    floored.append((disease_id, l))
                    value = LIKELIHOOD_FLOOR
                fixed.append(value)
            if row_normalize:
                row_total = sum(fixed)
                fixed = [v / row_total for v in fixed]
            table_rows[disease_id] = tuple(fixed)
        return cls(question, responses, table_rows, tuple(floored))

    def validate_against(self, dist: DiseaseDistribution) -> None:
        """Check the table covers every disease of ``dist``; name any gap."""
        for disease_id in dist.entries:
            row = self.likelihoods.get(disease_id)
            if row is None:
                raise LookaheadError(
                    f"lookahead table for question {self.question.id} is missing "
                    f"disease {disease_id}"
                )
            if len(row) != len(self.responses):
                raise LookaheadError(
                    f"lookahead table for question {self.question.id} is missing "
                    f"({disease_id}, response {len(row)})"
                )


def _joint_matrix(
    prior: DiseaseDistribution, table: LookaheadTable
) -> tuple[list[str], np.ndarray, float, float]:
    """Joint probabilities P(response, disease) = likelihood * prior.

    Returns (disease ids, joint matrix [disease x response], residual row sum,
    total mass).  The residual bucket has no guideline context to elicit
    against, so it is assigned a uniform pseudo-row whose sum equals the mean
    of the disease row sums: a table that treats every disease alike then
    treats the residual alike too, and rescaling a whole table cannot move
    mass into or out of the bucket.
    """
    table.validate_against(prior)
    ids = list(prior.entries)
    lik = np.array([table.likelihoods[d] for d in ids], dtype=float)
    p = np.array([prior.entries[d] for d in ids], dtype=float)
    joint = lik * p[:, None]
    row_sums = lik.sum(axis=1)
    mean_row_sum = float(row_sums.mean()) if ids else 0.0
    other_joint = prior.other_mass * mean_row_sum
    total = float(joint.sum()) + other_joint
    return ids, joint, other_joint, total


def posterior_given_question(
    prior: DiseaseDistribution, table: LookaheadTable
) -> DiseaseDistribution:
    """Virtual next-step posterior for one candidate question.

    The joint probability of a response and a disease is the elicited response
    likelihood times the current disease probability; the posterior marginalizes
    over responses and renormalizes over diseases (law of total probability).
    The iteration index is carried through unchanged.
    """
    ids, joint, other_joint, total = _joint_matrix(prior, table)
    if total <= 0.0:
        raise LookaheadError(
            f"uninformative lookahead table for question {table.question.id}: "
            "joint mass is zero"
        )
    masses = joint.sum(axis=1) / total
    entries = {d: float(m) for d, m in zip(ids, masses)}
    return DiseaseDistribution.from_probabilities(
        entries, other_mass=other_joint / total, iteration=prior.iteration
    )


def expected_entropy(
    prior: DiseaseDistribution, table: LookaheadTable, mode: str = "literal"
) -> float:
    """Expected entropy of a candidate question, in nats.

    ``literal`` scores the entropy of the response-marginalized posterior.
    ``eig`` instead weights the entropy of each per-response posterior by the
    predictive probability of that response; the two disagree exactly when a
    question's responses discriminate individually but its per-disease
    response-mass totals do not.
    """
    if mode == "literal":
        return entropy(posterior_given_question(prior, table))
    if mode != "eig":
        raise SelectionError(f"unknown selection mode: {mode!r}")
    ids, joint, other_joint, total = _joint_matrix(prior, table)
    if total <= 0.0:
        raise LookaheadError(
            f"uninformative lookahead table for question {table.question.id}: "
            "joint mass is zero"
        )
    n_resp = len(table.responses)
    other_col = other_joint / n_resp  # uniform pseudo-row split over responses
    score = 0.0
    for l in range(n_resp):
        col = joint[:, l]
        col_total = float(col.sum()) + other_col
        if col_total <= 0.0:
            continue
        weight = col_total / total
        h = 0.0
        for value in col:
            q = value / col_total
            if q > 0.0:
                h -= q * math.log(q)
        q_other = other_col / col_total
        if q_other > 0.0:
            h -= q_other * math.log(q_other)
        score += weight * h
    return score


@dataclass(frozen=True)
class SelectionReport:
    """Per-question expected entropies behind one selection, for the trace."""

    mode: str
    prior_entropy: float
    entries: tuple[tuple[int, float], ...]  # (question id, expected entropy)
    selected_id: int
    uninformative: bool


def select_question(
    prior: DiseaseDistribution,
    tables: list[LookaheadTable],
    mode: str = "literal",
) -> tuple[CandidateQuestion, SelectionReport]:
    """Pick the candidate whose expected entropy is minimal.

    Ties are broken by the smallest question id so selection is deterministic.
    When no candidate beats the prior entropy by more than the tolerance, the
    report flags the turn as uninformative; the id-minimal candidate is still
    returned so the caller's stopping rule can decide what to do.
    """
    if not tables:
        raise SelectionError("empty candidate pool")
    scored: list[tuple[int, float, LookaheadTable]] = []
    for table in tables:
        h = expected_entropy(prior, table, mode=mode)
        scored.append((table.question.id, h, table))
    best_id, _, best_table = min(scored, key=lambda s: (s[1], s[0]))
    prior_h = entropy(prior)
    uninformative = all(h >= prior_h - UNINFORMATIVE_TOL for _, h, _ in scored)
    report = SelectionReport(
        mode=mode,
        prior_entropy=prior_h,
        entries=tuple((qid, h) for qid, h, _ in scored),
        selected_id=best_id,
        uninformative=uninformative,
    )
    return best_table.question, report


def normalize(
    raw: dict[str, float],
    other_weight: float = 0.0,
    iteration: int = 0,
) -> tuple[DiseaseDistribution, tuple[str, ...]]:
    """Repair and rescale elicited weights into a valid distribution.

    Negative weights are clamped to zero and reported in the repair notes.
    A weight vector already summing to one (within tolerance) is kept as-is so
    that well-formed elicited probabilities survive verbatim.
    """
    notes: list[str] = []
    weights: dict[str, float] = {}
    for disease_id, w in raw.items():
        if w < 0.0:
            notes.append(f"clamped negative weight for {disease_id}: {w}")
            w = 0.0
        weights[disease_id] = float(w)
    if other_weight < 0.0:
        notes.append(f"clamped negative residual weight: {other_weight}")
        other_weight = 0.0
    total = sum(weights.values()) + other_weight
    if total <= 0.0:
        raise DistributionError("all-zero weight vector")
    if abs(total - 1.0) > PROB_TOL:
        weights = {d: w / total for d, w in weights.items()}
        other_weight = other_weight / total
    dist = DiseaseDistribution.from_probabilities(
        weights, other_mass=other_weight, iteration=iteration
    )
    return dist, tuple(notes)
