"""Patient simulator and benchmark runner.

Case files under ``data/cases`` describe simulated patients (persona plus a
topic -> answer fact table); this module drives full consultations against
the engine with those patients and scores the outcomes under several
question-selection policies.  Case file format is documented in
docs/case-format.md, benchmark output in docs/transcript-format.md.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from . import kb as kb_mod
from .engine import STOP_ONESHOT, Engine, SessionConfig
from .errors import CaseFileError, PolicyError, ReportError
from .kb import KnowledgeBase

# Selection policies a benchmark can exercise.  The first three are engine
# policies; "oneshot" diagnoses from the opening distribution with no
# follow-ups at all.
BENCHMARK_POLICIES = ("app", "random", "first", "oneshot")

RUN_FORMAT = "benchmark-run"
RUN_VERSION = 1

_PROFILE_FIELDS = (
    "case_id",
    "opening_statement",
    "symptoms",
    "age",
    "intention",
    "personality",
    "facts",
    "ground_truth",
    "specialty",
)


@dataclass(frozen=True)
class PatientProfile:
    """A simulated patient: persona plus scripted answer grounding."""

    case_id: str
    opening_statement: str
    symptoms: tuple[str, ...]
    age: int
    intention: str
    personality: str
    facts: dict[str, str]
    ground_truth: str
    specialty: str = ""

    def validate(self, kb: KnowledgeBase | None = None) -> None:
        if not self.case_id:
            raise CaseFileError("profile needs a case_id")
        if not self.opening_statement.strip():
            raise CaseFileError(f"{self.case_id}: empty opening_statement")
        if not self.ground_truth:
            raise CaseFileError(f"{self.case_id}: missing ground_truth")
        if not self.facts:
            raise CaseFileError(f"{self.case_id}: facts must be non-empty")
        if self.age < 0:
            raise CaseFileError(f"{self.case_id}: negative age")
        if kb is not None and self.ground_truth not in kb.diseases:
            raise CaseFileError(
                f"{self.case_id}: ground_truth {self.ground_truth!r} not in knowledge base"
            )

    def persona_text(self) -> str:
        """Human-readable persona block for prompt rendering."""
        lines = [
            f"Age: {self.age}",
            f"Personality: {self.personality}",
            f"Concern: {self.intention}",
            "Complaints: " + "; ".join(self.symptoms),
        ]
        return "\n".join(lines)


def load_case_file(path: str | Path, kb: KnowledgeBase | None = None) -> PatientProfile:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise CaseFileError(f"cannot read case file {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise CaseFileError(f"{path}: invalid JSON ({exc.msg})")
    missing = [f for f in _PROFILE_FIELDS if f not in data]
    if missing:
        raise CaseFileError(f"{path}: missing field {missing[0]!r}")
    facts = data["facts"]
    if not isinstance(facts, dict):
        raise CaseFileError(f"{path}: facts must be a topic -> answer table")
    profile = PatientProfile(
        case_id=str(data["case_id"]),
        opening_statement=str(data["opening_statement"]),
        symptoms=tuple(str(s) for s in data["symptoms"]),
        age=int(data["age"]),
        intention=str(data["intention"]),
        personality=str(data["personality"]),
        facts={str(k): str(v) for k, v in facts.items()},
        ground_truth=str(data["ground_truth"]),
        specialty=str(data.get("specialty", "")),
    )
    try:
        profile.validate(kb)
    except CaseFileError as exc:
        raise CaseFileError(f"{path}: {exc}")
    return profile


def load_cases(path: str | Path, kb: KnowledgeBase | None = None) -> list[PatientProfile]:
    """Load every ``*.json`` case file under ``path`` in name order."""
    root = Path(path)
    if not root.is_dir():
        raise CaseFileError(f"case directory not found: {root}")
    profiles: list[PatientProfile] = []
    sources: dict[str, Path] = {}
    for file in sorted(root.glob("*.json")):
        profile = load_case_file(file, kb)
        if profile.case_id in sources:
            raise CaseFileError(
                f"duplicate case_id {profile.case_id!r} in "
                f"{sources[profile.case_id].name} and {file.name}"
            )
        sources[profile.case_id] = file
        profiles.append(profile)
    if not profiles:
        raise CaseFileError(f"no case files in {root}")
    return profiles


@dataclass(frozen=True)
class CaseOutcome:
    """One (case, policy) consultation result."""

    case_id: str
    policy: str
    ground_truth: str
    diagnosis_id: str
    diagnosis_name: str
    probability: float
    hit: bool
    turns: int
    stop_reason: str
    entropy_trace: tuple[float, ...]
    top1_trace: tuple[float, ...]
    top2_trace: tuple[float, ...]
    error: str = ""  # non-empty marks a failed case; traces are then empty

    @property
    def failed(self) -> bool:
        return bool(self.error)

    @property
    def final_entropy(self) -> float:
        if not self.entropy_trace:
            raise ReportError(f"case {self.case_id} has no entropy trace")
        return self.entropy_trace[-1]


@dataclass(frozen=True)
class PolicyAggregate:
    """Per-policy summary; exactly recomputable from the outcome rows."""

    policy: str
    cases: int
    errors: int
    hit_rate: float
    mean_turns: float
    mean_final_entropy: float
    mean_entropy_by_iteration: tuple[float, ...]
    carried_cases: int  # cases that ended early and repeat their final value


@dataclass(frozen=True)
class BenchmarkRun:
    """All outcomes of one seeded benchmark invocation."""

    seed: int
    horizon: int  # maximum follow-up turns per case
    policies: tuple[str, ...]
    case_ids: tuple[str, ...]
    outcomes: tuple[CaseOutcome, ...]
    aggregates: tuple[PolicyAggregate, ...]

    def outcomes_for(self, policy: str) -> list[CaseOutcome]:
        return [o for o in self.outcomes if o.policy == policy]


def case_seed(seed: int, policy: str, case_id: str) -> int:
    """Stable per-(case, policy) seed, independent of process hashing."""
    digest = hashlib.sha256(f"{seed}:{policy}:{case_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def benchmark_session_config(base: SessionConfig, horizon: int) -> SessionConfig:
    """Disable adaptive stopping so every policy answers the same number of
    follow-ups; benchmark curves then compare like with like."""
    return replace(
        base,
        max_turns=horizon,
        stop_entropy=-1.0,
        stop_top1=2.0,
        uninformative_stop=0,
    )


def _traces(state) -> tuple[tuple[float, ...], tuple[float, ...], tuple[float, ...]]:
    entropy_trace = tuple(state.entropy_trace)
    top1 = []
    top2 = []
    for dist in state.distribution_history:
        pairs = dist.top(2)
        top1.append(pairs[0][1] if pairs else 0.0)
        top2.append(pairs[1][1] if len(pairs) > 1 else 0.0)
    return entropy_trace, tuple(top1), tuple(top2)


def run_case(
    profile: PatientProfile,
    config: SessionConfig,
    policy: str = "app",
    kb: KnowledgeBase | None = None,
) -> CaseOutcome:
    """Drive one consultation to diagnosis with the profile answering."""
    if policy not in BENCHMARK_POLICIES:
        raise PolicyError(f"unknown policy name: {policy!r}")
    # oneshot never asks a follow-up, so skip lookahead work via "first"
    engine_policy = "first" if policy == "oneshot" else policy
    engine_config = replace(
        config,
        policy=engine_policy,
        policy_seed=case_seed(config.policy_seed, policy, profile.case_id),
    )
    try:
        engine = Engine(engine_config, kb=kb)
        state, question = engine.start_session(profile.opening_statement)
        if policy == "oneshot":
            diagnosis = engine.diagnose(state, STOP_ONESHOT)
        else:
            diagnosis = None
            while question is not None:
                answer = engine.backend.respond_as_patient(
                    profile, question.text, state.dialogue()
                ).value
                state, question, diagnosis = engine.step(state, answer)
        state.check_invariants()
    except Exception as exc:
        return CaseOutcome(
            case_id=profile.case_id,
            policy=policy,
            ground_truth=profile.ground_truth,
            diagnosis_id="",
            diagnosis_name="",
            probability=0.0,
            hit=False,
            turns=0,
            stop_reason="error",
            entropy_trace=(),
            top1_trace=(),
            top2_trace=(),
            error=f"{type(exc).__name__}: {exc}",
        )
    entropy_trace, top1_trace, top2_trace = _traces(state)
    return CaseOutcome(
        case_id=profile.case_id,
        policy=policy,
        ground_truth=profile.ground_truth,
        diagnosis_id=diagnosis.disease_id,
        diagnosis_name=diagnosis.name,
        probability=diagnosis.probability,
        hit=diagnosis.disease_id == profile.ground_truth,
        turns=diagnosis.turns,
        stop_reason=diagnosis.stop_reason,
        entropy_trace=entropy_trace,
        top1_trace=top1_trace,
        top2_trace=top2_trace,
    )


def aggregate_policy(
    policy: str, outcomes: list[CaseOutcome], horizon: int
) -> PolicyAggregate:
    completed = [o for o in outcomes if not o.failed]
    errors = len(outcomes) - len(completed)
    if not completed:
        return PolicyAggregate(
            policy=policy,
            cases=len(outcomes),
            errors=errors,
            hit_rate=0.0,
            mean_turns=0.0,
            mean_final_entropy=0.0,
            mean_entropy_by_iteration=(),
            carried_cases=0,
        )
    n = len(completed)
    carried = 0
    by_iteration = []
    for t in range(horizon + 1):
        total = 0.0
        for o in completed:
            trace = o.entropy_trace
            # carry the final value forward for cases that stopped early
            total += trace[t] if t < len(trace) else trace[-1]
        by_iteration.append(total / n)
    carried = sum(1 for o in completed if len(o.entropy_trace) < horizon + 1)
    return PolicyAggregate(
        policy=policy,
        cases=len(outcomes),
        errors=errors,
        hit_rate=sum(1 for o in completed if o.hit) / n,
        mean_turns=sum(o.turns for o in completed) / n,
        mean_final_entropy=sum(o.final_entropy for o in completed) / n,
        mean_entropy_by_iteration=tuple(by_iteration),
        carried_cases=carried,
    )


def run_benchmark(
    profiles: list[PatientProfile],
    config: SessionConfig,
    policies: tuple[str, ...] = BENCHMARK_POLICIES,
    seed: int = 0,
    max_workers: int = 4,
    kb: KnowledgeBase | None = None,
) -> BenchmarkRun:
    """Run every profile under every policy and aggregate the outcomes.

    ``config`` should already carry the benchmark horizon in ``max_turns``;
    adaptive stopping is disabled here so all policies see equal turns.
    """
    if not profiles:
        raise CaseFileError("benchmark needs at least one case")
    for policy in policies:
        if policy not in BENCHMARK_POLICIES:
            raise PolicyError(f"unknown policy name: {policy!r}")
    if len(set(policies)) != len(policies):
        raise PolicyError("duplicate policy in benchmark request")
    horizon = config.max_turns
    run_config = benchmark_session_config(replace(config, policy_seed=seed), horizon)
    if kb is None:
        kb = kb_mod.ingest(run_config.kb_path)
    tasks = [(policy, profile) for policy in policies for profile in profiles]

    def execute(task):
        policy, profile = task
        return run_case(profile, run_config, policy=policy, kb=kb)

    if max_workers > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as executor:
            results = list(executor.map(execute, tasks))
    else:
        results = [execute(task) for task in tasks]
    by_key = {(o.policy, o.case_id): o for o in results}
    case_ids = tuple(sorted(p.case_id for p in profiles))
    outcomes = tuple(
        by_key[(policy, case_id)] for policy in policies for case_id in case_ids
    )
    aggregates = tuple(
        aggregate_policy(policy, [o for o in outcomes if o.policy == policy], horizon)
        for policy in policies
    )
    return BenchmarkRun(
        seed=seed,
        horizon=horizon,
        policies=tuple(policies),
        case_ids=case_ids,
        outcomes=outcomes,
        aggregates=aggregates,
    )


# -- serialization -------------------------------------------------------


def run_to_dict(run: BenchmarkRun) -> dict:
    return {
        "format": RUN_FORMAT,
        "version": RUN_VERSION,
        "seed": run.seed,
        "horizon": run.horizon,
        "policies": list(run.policies),
        "case_ids": list(run.case_ids),
        "outcomes": [
            {
                "case_id": o.case_id,
                "policy": o.policy,
                "ground_truth": o.ground_truth,
                "diagnosis_id": o.diagnosis_id,
                "diagnosis_name": o.diagnosis_name,
                "probability": o.probability,
                "hit": o.hit,
                "turns": o.turns,
                "stop_reason": o.stop_reason,
                "entropy_trace": list(o.entropy_trace),
                "top1_trace": list(o.top1_trace),
                "top2_trace": list(o.top2_trace),
                "error": o.error,
            }
            for o in run.outcomes
        ],
        "aggregates": [
            {
                "policy": a.policy,
                "cases": a.cases,
                "errors": a.errors,
                "hit_rate": a.hit_rate,
                "mean_turns": a.mean_turns,
                "mean_final_entropy": a.mean_final_entropy,
                "mean_entropy_by_iteration": list(a.mean_entropy_by_iteration),
                "carried_cases": a.carried_cases,
            }
            for a in run.aggregates
        ],
    }


def run_from_dict(data: dict) -> BenchmarkRun:
    if data.get("format") != RUN_FORMAT:
        raise ReportError("not a benchmark run file")
    if data.get("version") != RUN_VERSION:
        raise ReportError("unsupported benchmark run version")
    outcomes = tuple(
        CaseOutcome(
            case_id=o["case_id"],
            policy=o["policy"],
            ground_truth=o["ground_truth"],
            diagnosis_id=o["diagnosis_id"],
            diagnosis_name=o["diagnosis_name"],
            probability=o["probability"],
            hit=o["hit"],
            turns=o["turns"],
            stop_reason=o["stop_reason"],
            entropy_trace=tuple(o["entropy_trace"]),
            top1_trace=tuple(o["top1_trace"]),
            top2_trace=tuple(o["top2_trace"]),
            error=o.get("error", ""),
        )
        for o in data["outcomes"]
    )
    aggregates = tuple(
        PolicyAggregate(
            policy=a["policy"],
            cases=a["cases"],
            errors=a["errors"],
            hit_rate=a["hit_rate"],
            mean_turns=a["mean_turns"],
            mean_final_entropy=a["mean_final_entropy"],
            mean_entropy_by_iteration=tuple(a["mean_entropy_by_iteration"]),
            carried_cases=a["carried_cases"],
        )
        for a in data["aggregates"]
    )
    return BenchmarkRun(
        seed=data["seed"],
        horizon=data["horizon"],
        policies=tuple(data["policies"]),
        case_ids=tuple(data["case_ids"]),
        outcomes=outcomes,
        aggregates=aggregates,
    )


def save_run(run: BenchmarkRun, path: str | Path) -> Path:
    path = Path(path)
    text = json.dumps(run_to_dict(run), sort_keys=True, indent=2) + "\n"
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ReportError(f"cannot write run file {path}: {exc}")
    return path


def load_run(path: str | Path) -> BenchmarkRun:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ReportError(f"cannot read run file {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ReportError(f"malformed run file {path}: {exc.msg}")
    try:
        return run_from_dict(data)
    except ReportError as exc:
        raise ReportError(f"{path}: {exc}")


def write_cases_csv(run: BenchmarkRun, path: str | Path) -> Path:
    """Flat per-case table consumed by the metrics module and spreadsheets."""
    path = Path(path)
    lines = [
        "case,policy,ground_truth,diagnosis,hit,turns,stop_reason,final_entropy,error"
    ]
    for o in run.outcomes:
        final = f"{o.final_entropy:.6f}" if not o.failed else ""
        lines.append(
            ",".join(
                [
                    o.case_id,
                    o.policy,
                    o.ground_truth,
                    o.diagnosis_id,
                    "1" if o.hit else "0",
                    str(o.turns),
                    o.stop_reason,
                    final,
                    o.error.replace(",", ";"),
                ]
            )
        )
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise ReportError(f"cannot write case table {path}: {exc}")
    return path


def profile_from_transcript(trace: dict, backend) -> PatientProfile:
    """Rebuild a rough profile from a finished consultation transcript.

    Plumbing for remote backends only; the shipped benchmark uses authored
    case files instead (see docs/case-format.md).
    """
    session = trace.get("session", {})
    opening = session.get("opening_statement", "")
    if not opening:
        raise CaseFileError("transcript has no opening statement")
    facts = {}
    for i, turn in enumerate(trace.get("turns", [])):
        facts[f"turn_{i + 1}"] = turn.get("response", "")
    dialogue = [(session.get("opening_question", ""), opening)] + [
        (t.get("question", ""), t.get("response", "")) for t in trace.get("turns", [])
    ]
    summary = backend.extract_symptom_text(dialogue).value
    diagnosis = trace.get("diagnosis", {})
    return PatientProfile(
        case_id=session.get("session_id", "transcript"),
        opening_statement=opening,
        symptoms=tuple(part.strip() for part in summary.split(";") if part.strip()),
        age=0,
        intention="reconstructed from a consultation transcript",
        personality="unknown",
        facts=facts or {"opening": opening},
        ground_truth=diagnosis.get("disease_id", ""),
        specialty="",
    )
