"""Simulator and benchmark tests: case loading, outcomes, aggregation, run files."""

import hashlib
import json
from dataclasses import replace
from pathlib import Path

import pytest

from patience import kb as kb_mod
from patience.backends import BackendConfig
from patience.engine import SessionConfig
from patience.errors import CaseFileError, PolicyError, ReportError
from patience.sim import (
    BENCHMARK_POLICIES,
    BenchmarkRun,
    CaseOutcome,
    PatientProfile,
    aggregate_policy,
    benchmark_session_config,
    case_seed,
    load_case_file,
    load_cases,
    run_benchmark,
    run_case,
    run_from_dict,
    run_to_dict,
    save_run,
    load_run,
    write_cases_csv,
)

DATA_DIR = Path(__file__).resolve().parent.parent / "data"
KB_PATH = str(DATA_DIR / "sample_kb.jsonl")
SCRIPT_DIR = str(DATA_DIR / "scripts")
CASE_DIR = DATA_DIR / "cases"


def config(**overrides) -> SessionConfig:
    backend = overrides.pop(
        "backend", BackendConfig(kind="scripted", script_dir=SCRIPT_DIR)
    )
    return SessionConfig(kb_path=KB_PATH, backend=backend, **overrides)


def sample_profile(**overrides) -> PatientProfile:
    fields = dict(
        case_id="sample",
        opening_statement="I feel dizzy when I stand up.",
        symptoms=("dizziness on standing",),
        age=58,
        intention="find out what is wrong",
        personality="matter-of-fact",
        facts={"onset": "about two weeks ago"},
        ground_truth="orthostatic_hypotension",
        specialty="neurology",
    )
    fields.update(overrides)
    return PatientProfile(**fields)


@pytest.fixture(scope="module")
def kb():
    return kb_mod.ingest(KB_PATH)


@pytest.fixture(scope="module")
def profiles():
    return load_cases(CASE_DIR)


@pytest.fixture(scope="module")
def by_id(profiles):
    return {p.case_id: p for p in profiles}


@pytest.fixture(scope="module")
def two_policy_run(profiles):
    return run_benchmark(
        profiles, config(max_turns=5), policies=("app", "random"), seed=0
    )


@pytest.fixture(scope="module")
def csv_rows(two_policy_run, tmp_path_factory):
    path = write_cases_csv(
        two_policy_run, tmp_path_factory.mktemp("csv") / "cases.csv"
    )
    return path.read_text().splitlines()

# an opening no shipped script recognizes; exercises fallback and strict paths
GLOW = PatientProfile(
    case_id="glow",
    opening_statement="my toes glow in the dark at night",
    symptoms=("glowing toes",),
    age=30,
    intention="find out why",
    personality="calm",
    facts={"glow": "every night"},
    ground_truth="vertigo",
)


class TestPatientProfile:
    def test_validates_clean_profile(self, kb):
        sample_profile().validate(kb)

    def test_rejects_empty_case_id(self):
        with pytest.raises(CaseFileError, match="case_id"):
            sample_profile(case_id="").validate()

    def test_rejects_blank_opening(self):
        with pytest.raises(CaseFileError, match="opening_statement"):
            sample_profile(opening_statement="   ").validate()

    def test_rejects_missing_ground_truth(self):
        with pytest.raises(CaseFileError, match="ground_truth"):
            sample_profile(ground_truth="").validate()

    def test_rejects_empty_facts(self):
        with pytest.raises(CaseFileError, match="facts"):
            sample_profile(facts={}).validate()

    def test_rejects_negative_age(self):
        with pytest.raises(CaseFileError, match="age"):
            sample_profile(age=-1).validate()

    def test_rejects_dangling_ground_truth_against_kb(self, kb):
        with pytest.raises(CaseFileError, match="not in knowledge base"):
            sample_profile(ground_truth="dragon_pox").validate(kb)

    def test_dangling_ground_truth_allowed_without_kb(self):
        sample_profile(ground_truth="dragon_pox").validate()

    def test_persona_text_covers_all_persona_fields(self):
        text = sample_profile().persona_text()
        assert "Age: 58" in text
        assert "Personality: matter-of-fact" in text
        assert "Concern: find out what is wrong" in text
        assert "Complaints: dizziness on standing" in text


class TestLoadCases:
    def test_shipped_corpus_loads(self, profiles):
        assert len(profiles) == 12
        assert {p.specialty for p in profiles} == {
            "otolaryngology",
            "neurology",
            "gastroenterology",
        }

    def test_order_is_deterministic_by_file_name(self, profiles):
        ids = [p.case_id for p in profiles]
        assert ids == sorted(ids)

    def test_ground_truths_resolve_in_kb(self, kb):
        load_cases(CASE_DIR, kb)

    def test_missing_directory(self, tmp_path):
        with pytest.raises(CaseFileError, match="case directory not found"):
            load_cases(tmp_path / "nope")

    def test_empty_directory(self, tmp_path):
        with pytest.raises(CaseFileError, match="no case files"):
            load_cases(tmp_path)

    def test_missing_field_named(self, tmp_path):
        data = json.loads((CASE_DIR / "dizzy_postural.json").read_text())
        del data["ground_truth"]
        path = tmp_path / "broken.json"
        path.write_text(json.dumps(data))
        with pytest.raises(CaseFileError, match="missing field 'ground_truth'"):
            load_case_file(path)

    def test_invalid_json_names_file(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(CaseFileError, match="bad.json"):
            load_case_file(path)

    def test_facts_must_be_a_table(self, tmp_path):
        data = json.loads((CASE_DIR / "dizzy_postural.json").read_text())
        data["facts"] = ["onset", "two weeks"]
        path = tmp_path / "flat.json"
        path.write_text(json.dumps(data))
        with pytest.raises(CaseFileError, match="topic -> answer"):
            load_case_file(path)

    def test_validation_error_carries_path(self, tmp_path):
        data = json.loads((CASE_DIR / "dizzy_postural.json").read_text())
        data["age"] = -4
        path = tmp_path / "young.json"
        path.write_text(json.dumps(data))
        with pytest.raises(CaseFileError, match="young.json"):
            load_case_file(path)

    def test_duplicate_case_id_names_both_files(self, tmp_path):
        data = (CASE_DIR / "dizzy_postural.json").read_text()
        (tmp_path / "a_copy.json").write_text(data)
        (tmp_path / "b_copy.json").write_text(data)
        with pytest.raises(CaseFileError) as err:
            load_cases(tmp_path)
        assert "a_copy.json" in str(err.value)
        assert "b_copy.json" in str(err.value)


class TestCaseSeed:
    def test_matches_independent_digest(self):
        digest = hashlib.sha256(b"0:app:rhinitis_pollen").digest()
        assert case_seed(0, "app", "rhinitis_pollen") == int.from_bytes(
            digest[:8], "big"
        )

    def test_frozen_values_are_platform_stable(self):
        assert case_seed(0, "app", "rhinitis_pollen") == 479851149913416005
        assert case_seed(1, "app", "rhinitis_pollen") == 16887918240199683801

    def test_distinct_across_policies_and_cases(self):
        seeds = {
            case_seed(0, policy, case)
            for policy in BENCHMARK_POLICIES
            for case in ("a", "b", "c")
        }
        assert len(seeds) == len(BENCHMARK_POLICIES) * 3


class TestBenchmarkSessionConfig:
    def test_disables_adaptive_stopping(self):
        cfg = benchmark_session_config(config(), 5)
        assert cfg.max_turns == 5
        assert cfg.stop_entropy == -1.0
        assert cfg.stop_top1 == 2.0
        assert cfg.uninformative_stop == 0

    def test_leaves_other_settings_alone(self):
        cfg = benchmark_session_config(config(k=4, humanize=False), 3)
        assert cfg.k == 4
        assert cfg.humanize is False


class TestRunCase:
    def test_rhinitis_under_default_config(self, by_id):
        outcome = run_case(by_id["rhinitis_pollen"], config())
        assert outcome.hit is True
        assert outcome.turns == 6
        assert outcome.stop_reason == "max_turns"
        assert outcome.diagnosis_id == "allergic_rhinitis"
        assert 0.40 < outcome.probability < 0.50

    def test_trace_lengths_track_turns(self, by_id):
        outcome = run_case(by_id["rhinitis_pollen"], config())
        assert len(outcome.entropy_trace) == outcome.turns + 1
        assert len(outcome.top1_trace) == outcome.turns + 1
        assert len(outcome.top2_trace) == outcome.turns + 1

    def test_top1_dominates_top2_every_iteration(self, by_id):
        outcome = run_case(by_id["dizzy_postural"], config())
        for one, two in zip(outcome.top1_trace, outcome.top2_trace):
            assert one >= two >= 0.0

    def test_single_turn_budget(self, by_id):
        outcome = run_case(by_id["dizzy_postural"], config(max_turns=1))
        assert outcome.turns == 1
        assert outcome.stop_reason == "max_turns"
        assert len(outcome.entropy_trace) == 2

    def test_oneshot_asks_nothing(self, by_id):
        outcome = run_case(by_id["dizzy_postural"], config(), policy="oneshot")
        assert outcome.turns == 0
        assert outcome.stop_reason == "oneshot"
        assert outcome.hit is True
        assert len(outcome.entropy_trace) == 1

    def test_unmatched_profile_is_recorded_not_raised(self):
        outcome = run_case(GLOW, config())
        assert outcome.error == ""
        assert outcome.hit is False
        assert outcome.stop_reason == "uninformative"

    def test_strict_miss_becomes_case_failure(self):
        strict = config(backend=BackendConfig(kind="scripted", script_dir=SCRIPT_DIR, strict=True))
        outcome = run_case(GLOW, strict)
        assert outcome.failed is True
        assert outcome.stop_reason == "error"
        assert "ScriptedMissError" in outcome.error
        assert outcome.entropy_trace == ()

    def test_unknown_policy(self, by_id):
        with pytest.raises(PolicyError, match="unknown policy"):
            run_case(by_id["dizzy_postural"], config(), policy="greedy")

    def test_final_entropy_unavailable_for_failures(self):
        strict = config(backend=BackendConfig(kind="scripted", script_dir=SCRIPT_DIR, strict=True))
        outcome = run_case(GLOW, strict)
        with pytest.raises(ReportError, match="no entropy trace"):
            outcome.final_entropy


class TestRunBenchmark:
    def test_outcome_and_aggregate_counts(self, two_policy_run):
        assert len(two_policy_run.outcomes) == 24
        assert len(two_policy_run.aggregates) == 2
        assert two_policy_run.horizon == 5

    def test_case_ids_sorted_and_complete(self, two_policy_run, profiles):
        assert two_policy_run.case_ids == tuple(sorted(p.case_id for p in profiles))
        for policy in two_policy_run.policies:
            assert [o.case_id for o in two_policy_run.outcomes_for(policy)] == list(two_policy_run.case_ids)

    def test_all_policies_hit_on_shipped_suite(self, two_policy_run):
        for agg in two_policy_run.aggregates:
            assert agg.hit_rate == 1.0
            assert agg.errors == 0

    def test_app_beats_random_on_final_entropy(self, two_policy_run):
        agg = {a.policy: a for a in two_policy_run.aggregates}
        assert agg["app"].mean_final_entropy < agg["random"].mean_final_entropy

    def test_app_not_worse_than_first(self, profiles):
        run = run_benchmark(
            profiles, config(max_turns=5), policies=("app", "first"), seed=0
        )
        agg = {a.policy: a for a in run.aggregates}
        assert agg["app"].mean_final_entropy <= agg["first"].mean_final_entropy

    def test_aggregates_recomputable_exactly(self, two_policy_run):
        for agg in two_policy_run.aggregates:
            rebuilt = aggregate_policy(
                agg.policy, two_policy_run.outcomes_for(agg.policy), two_policy_run.horizon
            )
            assert rebuilt == agg

    def test_adaptive_stops_disabled_during_benchmark(self, two_policy_run):
        # every completed case runs the full horizon, so nothing carries
        for outcome in two_policy_run.outcomes:
            assert outcome.turns == two_policy_run.horizon
            assert len(outcome.entropy_trace) == two_policy_run.horizon + 1
        for agg in two_policy_run.aggregates:
            assert agg.carried_cases == 0

    def test_oneshot_aggregate_carries_opening_entropy(self, profiles):
        run = run_benchmark(
            profiles, config(max_turns=5), policies=("oneshot",), seed=0
        )
        agg = run.aggregates[0]
        assert agg.mean_turns == 0.0
        assert agg.carried_cases == 12
        by_iter = agg.mean_entropy_by_iteration
        assert len(by_iter) == 6
        assert all(v == by_iter[0] for v in by_iter)

    def test_unknown_policy_rejected(self, profiles):
        with pytest.raises(PolicyError, match="unknown policy"):
            run_benchmark(profiles, config(), policies=("app", "greedy"))

    def test_duplicate_policy_rejected(self, profiles):
        with pytest.raises(PolicyError, match="duplicate policy"):
            run_benchmark(profiles, config(), policies=("app", "app"))

    def test_needs_at_least_one_case(self):
        with pytest.raises(CaseFileError, match="at least one case"):
            run_benchmark([], config())

    def test_failures_recorded_and_run_continues(self, by_id):
        strict = config(
            backend=BackendConfig(kind="scripted", script_dir=SCRIPT_DIR, strict=True),
            max_turns=3,
        )
        run = run_benchmark(
            [by_id["dizzy_postural"], GLOW], strict, policies=("app", "first"), seed=0
        )
        assert len(run.outcomes) == 4
        for policy in run.policies:
            outcomes = {o.case_id: o for o in run.outcomes_for(policy)}
            assert outcomes["dizzy_postural"].hit is True
            assert outcomes["glow"].failed is True
        for agg in run.aggregates:
            assert agg.cases == 2
            assert agg.errors == 1
            assert agg.hit_rate == 1.0  # over completed cases only

    def test_worker_count_does_not_change_results(self, profiles):
        serial = run_benchmark(
            profiles, config(max_turns=3), policies=("app",), seed=0, max_workers=1
        )
        threaded = run_benchmark(
            profiles, config(max_turns=3), policies=("app",), seed=0, max_workers=8
        )
        assert serial == threaded

    def test_all_failed_policy_aggregates_to_zero(self):
        strict = config(
            backend=BackendConfig(kind="scripted", script_dir=SCRIPT_DIR, strict=True),
            max_turns=2,
        )
        run = run_benchmark([GLOW], strict, policies=("app",), seed=0)
        agg = run.aggregates[0]
        assert agg.errors == 1
        assert agg.hit_rate == 0.0
        assert agg.mean_final_entropy == 0.0
        assert agg.mean_entropy_by_iteration == ()


class TestRunSerialization:
    def test_round_trip_preserves_run(self, two_policy_run):
        assert run_from_dict(run_to_dict(two_policy_run)) == two_policy_run

    def test_save_and_load(self, two_policy_run, tmp_path):
        path = save_run(two_policy_run, tmp_path / "run.json")
        assert load_run(path) == two_policy_run

    def test_run_file_is_canonical_json(self, two_policy_run, tmp_path):
        path = save_run(two_policy_run, tmp_path / "run.json")
        text = path.read_text()
        assert text.endswith("\n")
        assert text == json.dumps(json.loads(text), sort_keys=True, indent=2) + "\n"

    def test_same_seed_same_bytes(self, profiles, tmp_path):
        first = run_benchmark(
            profiles, config(max_turns=5), policies=("app", "random"), seed=3
        )
        second = run_benchmark(
            profiles, config(max_turns=5), policies=("app", "random"), seed=3
        )
        a = save_run(first, tmp_path / "a.json").read_bytes()
        b = save_run(second, tmp_path / "b.json").read_bytes()
        assert a == b

    def test_different_seed_changes_random_policy(self, profiles):
        one = run_benchmark(profiles, config(max_turns=5), policies=("random",), seed=0)
        two = run_benchmark(profiles, config(max_turns=5), policies=("random",), seed=1)
        assert (
            one.aggregates[0].mean_final_entropy
            != two.aggregates[0].mean_final_entropy
        )

    def test_rejects_wrong_format(self, two_policy_run):
        data = run_to_dict(two_policy_run)
        data["format"] = "consult-transcript"
        with pytest.raises(ReportError, match="not a benchmark run"):
            run_from_dict(data)

    def test_rejects_wrong_version(self, two_policy_run):
        data = run_to_dict(two_policy_run)
        data["version"] = 99
        with pytest.raises(ReportError, match="version"):
            run_from_dict(data)

    def test_load_missing_file(self, tmp_path):
        with pytest.raises(ReportError, match="cannot read run file"):
            load_run(tmp_path / "absent.json")

    def test_load_malformed_file(self, tmp_path):
        path = tmp_path / "garbled.json"
        path.write_text("{{{{")
        with pytest.raises(ReportError, match="malformed run file"):
            load_run(path)

    def test_load_error_names_path(self, two_policy_run, tmp_path):
        data = run_to_dict(two_policy_run)
        data["format"] = "something-else"
        path = tmp_path / "other.json"
        path.write_text(json.dumps(data))
        with pytest.raises(ReportError, match="other.json"):
            load_run(path)


class TestCasesCsv:
    def test_header_and_row_count(self, csv_rows):
        assert csv_rows[0] == (
            "case,policy,ground_truth,diagnosis,hit,turns,stop_reason,"
            "final_entropy,error"
        )
        assert len(csv_rows) == 25

    def test_row_fields(self, csv_rows):
        cells = csv_rows[1].split(",")
        assert len(cells) == 9
        assert cells[1] in ("app", "random")
        assert cells[4] in ("0", "1")
        # fixed six-decimal entropy keeps the table diffable
        assert len(cells[7].split(".")[1]) == 6

    def test_same_seed_same_bytes(self, profiles, tmp_path):
        runs = [
            run_benchmark(
                profiles, config(max_turns=5), policies=("app", "random"), seed=3
            )
            for _ in range(2)
        ]
        a = write_cases_csv(runs[0], tmp_path / "a.csv").read_bytes()
        b = write_cases_csv(runs[1], tmp_path / "b.csv").read_bytes()
        assert a == b

    def test_failed_case_row(self, tmp_path):
        outcome = CaseOutcome(
            case_id="glow",
            policy="app",
            ground_truth="vertigo",
            diagnosis_id="",
            diagnosis_name="",
            probability=0.0,
            hit=False,
            turns=0,
            stop_reason="error",
            entropy_trace=(),
            top1_trace=(),
            top2_trace=(),
            error="boom, with a comma",
        )
        run = BenchmarkRun(
            seed=0,
            horizon=2,
            policies=("app",),
            case_ids=("glow",),
            outcomes=(outcome,),
            aggregates=(aggregate_policy("app", [outcome], 2),),
        )
        path = write_cases_csv(run, tmp_path / "failed.csv")
        row = path.read_text().splitlines()[1]
        assert row == "glow,app,vertigo,,0,0,error,,boom; with a comma"
