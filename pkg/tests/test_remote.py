"""HTTP backend tests against a local threaded stub server."""

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from types import SimpleNamespace

import pytest

from patience.backends import BackendConfig
from patience.backends.remote import RemoteBackend
from patience.errors import BackendError
from patience.kb import DiseaseEntry
from patience.prob import CandidateQuestion, DiseaseDistribution
from patience.sim import PatientProfile

OH = DiseaseEntry("orthostatic_hypotension", "Orthostatic hypotension", "context")
QUESTION = CandidateQuestion(id=0, text="Does the room spin when you move?")
DIALOGUE = [("What brings you in today?", "I feel dizzy when I stand up.")]


def chat_payload(content: str) -> bytes:
    return json.dumps(
        {"choices": [{"message": {"content": content}}]}
    ).encode("utf-8")


class StubHandler(BaseHTTPRequestHandler):
    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length)) if length else {}
        self.server.requests.append(
            {
                "path": self.path,
                "auth": self.headers.get("Authorization"),
                "body": body,
            }
        )
        step = (
            self.server.script.pop(0)
            if self.server.script
            else ("ok", "FALLBACK")
        )
        kind = step[0]
        if kind == "ok":
            data = chat_payload(step[1])
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)
        elif kind == "status":
            self.send_response(step[1])
            self.send_header("Content-Length", "0")
            self.end_headers()
        elif kind == "garbage":
            data = b"this is not json"
            self.send_response(200)
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)
        elif kind == "sleep":
            time.sleep(step[1])
            try:
                data = chat_payload("too late")
                self.send_response(200)
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)
            except (BrokenPipeError, ConnectionResetError):
                pass  # the client gave up while we slept; that is the point

    def log_message(self, *args):
        pass


@pytest.fixture(scope="module")
def server():
    httpd = ThreadingHTTPServer(("127.0.0.1", 0), StubHandler)
    httpd.script = []
    httpd.requests = []
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    yield httpd
    httpd.shutdown()


@pytest.fixture()
def stub(server):
    server.script = []
    server.requests = []
    return server


def backend(server, **overrides) -> RemoteBackend:
    host, port = server.server_address
    fields = dict(
        kind="remote",
        endpoint=f"http://{host}:{port}/v1/chat/completions",
        model_name="stub-model",
        timeout=2.0,
        max_retries=2,
    )
    fields.update(overrides)
    return RemoteBackend(BackendConfig(**fields))


class TestTransport:
    def test_request_shape(self, stub, monkeypatch):
        monkeypatch.delenv("PATIENCE_API_KEY", raising=False)
        stub.script = [("ok", "runny nose; sneezing")]
        result = backend(stub).extract_symptom_text(DIALOGUE)
        assert result.value == "runny nose; sneezing"
        assert result.attempt_count == 1
        request = stub.requests[0]
        assert request["path"] == "/v1/chat/completions"
        assert request["auth"] is None
        assert request["body"]["model"] == "stub-model"
        assert request["body"]["temperature"] == 0.0
        assert request["body"]["seed"] == 0
        prompt = request["body"]["messages"][0]["content"]
        assert "Doctor: What brings you in today?" in prompt
        assert "Patient: I feel dizzy when I stand up." in prompt

    def test_bearer_token_from_environment(self, stub, monkeypatch):
        monkeypatch.setenv("PATIENCE_API_KEY", "sk-test-123")
        stub.script = [("ok", "cough")]
        backend(stub).extract_symptom_text(DIALOGUE)
        assert stub.requests[0]["auth"] == "Bearer sk-test-123"

    def test_custom_key_variable(self, stub, monkeypatch):
        monkeypatch.delenv("PATIENCE_API_KEY", raising=False)
        monkeypatch.setenv("OTHER_KEY", "sk-other")
        stub.script = [("ok", "cough")]
        backend(stub, api_key_env="OTHER_KEY").extract_symptom_text(DIALOGUE)
        assert stub.requests[0]["auth"] == "Bearer sk-other"

    def test_server_errors_consume_all_attempts(self, stub):
        stub.script = [("status", 500), ("status", 500)]
        with pytest.raises(BackendError, match="unavailable after 2 attempts"):
            backend(stub, max_retries=1).extract_symptom_text(DIALOGUE)
        assert len(stub.requests) == 2

    def test_recovers_after_transient_error(self, stub):
        stub.script = [("status", 503), ("ok", "sore throat")]
        result = backend(stub).extract_symptom_text(DIALOGUE)
        assert result.value == "sore throat"
        assert result.attempt_count == 2

    def test_garbage_payload_retried(self, stub):
        stub.script = [("garbage",), ("ok", "headache")]
        assert backend(stub).extract_symptom_text(DIALOGUE).value == "headache"

    def test_empty_generation_retried(self, stub):
        stub.script = [("ok", "   "), ("ok", "dizzy")]
        assert backend(stub).extract_symptom_text(DIALOGUE).value == "dizzy"

    def test_timeouts_exhaust_and_fail(self, stub):
        stub.script = [("sleep", 1.0), ("sleep", 1.0)]
        client = backend(stub, timeout=0.2, max_retries=1)
        started = time.perf_counter()
        with pytest.raises(BackendError, match="unavailable after 2 attempts"):
            client.extract_symptom_text(DIALOGUE)
        assert time.perf_counter() - started < 2.0


class TestElicitDistribution:
    IDS = ["orthostatic_hypotension", "cervical_spondylosis", "vertigo"]
    GOOD = (
        "```\northostatic_hypotension: 0.22\ncervical_spondylosis: 0.19\n"
        "vertigo: 0.17\nother: 0.42\n```"
    )

    def test_strict_parse(self, stub):
        stub.script = [("ok", self.GOOD)]
        result = backend(stub).elicit_distribution("gamma", DIALOGUE, self.IDS)
        weights, other = result.value
        assert weights == {
            "orthostatic_hypotension": 0.22,
            "cervical_spondylosis": 0.19,
            "vertigo": 0.17,
        }
        assert other == 0.42
        assert result.repaired is False
        assert result.attempt_count == 1
        assert result.raw_text == self.GOOD

    def test_prompt_carries_grounding_and_candidates(self, stub):
        stub.script = [("ok", self.GOOD)]
        backend(stub).elicit_distribution("the guideline text", DIALOGUE, self.IDS)
        prompt = stub.requests[0]["body"]["messages"][0]["content"]
        assert "the guideline text" in prompt
        assert "orthostatic_hypotension" in prompt

    def test_unfenced_block_still_strict(self, stub):
        stub.script = [
            ("ok", "orthostatic_hypotension: 0.5\ncervical_spondylosis: 0.3\nvertigo: 0.1\nother: 0.1")
        ]
        result = backend(stub).elicit_distribution("g", DIALOGUE, self.IDS)
        assert result.repaired is False

    def test_malformed_then_valid_reprompt(self, stub):
        stub.script = [("ok", "I think it's probably vertigo."), ("ok", self.GOOD)]
        result = backend(stub).elicit_distribution("g", DIALOGUE, self.IDS)
        assert result.repaired is False
        assert result.attempt_count == 2
        reprompt = stub.requests[1]["body"]["messages"][0]["content"]
        assert "could not be parsed" in reprompt

    def test_repair_extracts_numbers_from_prose(self, stub):
        prose = (
            "Likely orthostatic_hypotension: 0.5 here, with cervical_spondylosis: 0.3 "
            "and vertigo: 0.1; other: 0.1 covers the rest."
        )
        stub.script = [("ok", "no numbers at all"), ("ok", prose)]
        result = backend(stub).elicit_distribution("g", DIALOGUE, self.IDS)
        weights, other = result.value
        assert weights["orthostatic_hypotension"] == 0.5
        assert other == 0.1
        assert result.repaired is True
        assert result.attempt_count == 2

    def test_repair_clamps_negative_weights(self, stub):
        prose = (
            "orthostatic_hypotension: -0.2 cervical_spondylosis: 0.6 "
            "vertigo: 0.3 other: 0.1"
        )
        stub.script = [("ok", prose), ("ok", prose)]
        result = backend(stub).elicit_distribution("g", DIALOGUE, self.IDS)
        weights, _ = result.value
        assert weights["orthostatic_hypotension"] == 0.0
        assert result.repaired is True

    def test_negative_fails_strict_but_reprompt_recovers(self, stub):
        bad = (
            "orthostatic_hypotension: -0.2\ncervical_spondylosis: 0.6\n"
            "vertigo: 0.3\nother: 0.3"
        )
        stub.script = [("ok", bad), ("ok", self.GOOD)]
        result = backend(stub).elicit_distribution("g", DIALOGUE, self.IDS)
        assert result.repaired is False
        assert result.attempt_count == 2

    def test_unparseable_after_repair(self, stub):
        stub.script = [("ok", "nothing here"), ("ok", "still nothing")]
        with pytest.raises(BackendError, match="unparseable numeric block"):
            backend(stub).elicit_distribution("g", DIALOGUE, self.IDS)

    def test_all_zero_vector_rejected(self, stub):
        zeros = (
            "orthostatic_hypotension: 0\ncervical_spondylosis: 0\n"
            "vertigo: 0\nother: 0"
        )
        stub.script = [("ok", zeros)]
        with pytest.raises(BackendError, match="all-zero"):
            backend(stub).elicit_distribution("g", DIALOGUE, self.IDS)

    def test_no_reprompt_when_budget_spent(self, stub):
        prose = (
            "orthostatic_hypotension: 0.5 and cervical_spondylosis: 0.3 then "
            "vertigo: 0.1 with other: 0.1"
        )
        stub.script = [("ok", prose)]
        result = backend(stub, max_retries=0).elicit_distribution(
            "g", DIALOGUE, self.IDS
        )
        assert result.repaired is True
        assert result.attempt_count == 1
        assert len(stub.requests) == 1

    def test_needs_candidates(self, stub):
        with pytest.raises(BackendError, match="at least one candidate"):
            backend(stub).elicit_distribution("g", DIALOGUE, [])


class TestGenerateQuestions:
    DIST = DiseaseDistribution(
        entries={"orthostatic_hypotension": 0.6, "vertigo": 0.4}, other_mass=0.0
    )

    def test_numbered_list_with_rationales(self, stub):
        stub.script = [
            (
                "ok",
                "1. Does standing trigger it? | separates postural causes\n"
                "2. Any hearing changes? | flags inner-ear disease",
            )
        ]
        result = backend(stub).generate_questions("u", DIALOGUE, self.DIST, k=5)
        assert [q.text for q in result.value] == [
            "Does standing trigger it?",
            "Any hearing changes?",
        ]
        assert result.value[0].rationale == "separates postural causes"
        assert [q.id for q in result.value] == [0, 1]

    def test_duplicates_shrink_pool(self, stub):
        stub.script = [
            ("ok", "1. Does standing trigger it?\n2. does standing  trigger it?\n3. New one")
        ]
        result = backend(stub).generate_questions("u", DIALOGUE, self.DIST, k=5)
        assert len(result.value) == 2

    def test_truncates_to_k(self, stub):
        stub.script = [("ok", "\n".join(f"{i}. Question {i}?" for i in range(1, 8)))]
        result = backend(stub).generate_questions("u", DIALOGUE, self.DIST, k=3)
        assert len(result.value) == 3

    def test_empty_pool_after_reprompt(self, stub):
        stub.script = [("ok", "no list here"), ("ok", "still prose")]
        with pytest.raises(BackendError, match="empty question pool"):
            backend(stub).generate_questions("u", DIALOGUE, self.DIST, k=5)

    def test_prompt_shows_ranked_distribution(self, stub):
        stub.script = [("ok", "1. Anything?")]
        backend(stub).generate_questions("u", DIALOGUE, self.DIST, k=5)
        prompt = stub.requests[0]["body"]["messages"][0]["content"]
        assert "orthostatic_hypotension: 0.6000" in prompt
        assert prompt.index("orthostatic_hypotension") < prompt.index("vertigo")


class TestSimulateResponses:
    def test_distinct_answers(self, stub):
        stub.script = [
            ("ok", "1. The room spins\n2. I feel light-headed\n3. I lose balance")
        ]
        result = backend(stub).simulate_responses(QUESTION, DIALOGUE)
        assert result.value == [
            "The room spins",
            "I feel light-headed",
            "I lose balance",
        ]

    def test_truncates_to_l_max(self, stub):
        stub.script = [("ok", "\n".join(f"{i}. Answer {i}" for i in range(1, 8)))]
        result = backend(stub).simulate_responses(QUESTION, DIALOGUE, l_max=5)
        assert len(result.value) == 5

    def test_single_answer_rejected(self, stub):
        stub.script = [("ok", "1. Yes"), ("ok", "1. Yes")]
        with pytest.raises(BackendError, match="fewer than 2 distinct"):
            backend(stub).simulate_responses(QUESTION, DIALOGUE)

    def test_reprompt_can_recover(self, stub):
        stub.script = [("ok", "just prose"), ("ok", "1. Yes\n2. No")]
        result = backend(stub).simulate_responses(QUESTION, DIALOGUE)
        assert result.value == ["Yes", "No"]
        assert result.attempt_count == 2


class TestLikelihoodRow:
    def test_strict_row(self, stub):
        stub.script = [("ok", "```\n1: 0.4\n2: 0.1\n3: 0.2\n```")]
        result = backend(stub).elicit_likelihood_row(
            QUESTION, ["a", "b", "c"], OH, DIALOGUE
        )
        assert result.value == [0.4, 0.1, 0.2]
        assert result.repaired is False

    def test_overrange_clamped_and_flagged(self, stub):
        stub.script = [("ok", "1: 1.3\n2: 0.4")]
        result = backend(stub).elicit_likelihood_row(QUESTION, ["a", "b"], OH, DIALOGUE)
        assert result.value == [1.0, 0.4]
        assert result.repaired is True

    def test_missing_index_goes_through_repair(self, stub):
        stub.script = [("ok", "1: 0.4"), ("ok", "row: 1: 0.4 then 2: 0.2")]
        result = backend(stub).elicit_likelihood_row(QUESTION, ["a", "b"], OH, DIALOGUE)
        assert result.value == [0.4, 0.2]
        assert result.repaired is True

    def test_prompt_names_condition(self, stub):
        stub.script = [("ok", "1: 0.5\n2: 0.5")]
        backend(stub).elicit_likelihood_row(QUESTION, ["a", "b"], OH, DIALOGUE)
        prompt = stub.requests[0]["body"]["messages"][0]["content"]
        assert "Orthostatic hypotension" in prompt
        assert "1. a" in prompt

    def test_requires_disease_context(self, stub):
        bare = DiseaseEntry("x", "X", "")
        with pytest.raises(BackendError, match="no guideline context"):
            backend(stub).elicit_likelihood_row(QUESTION, ["a"], bare, DIALOGUE)

    def test_requires_responses(self, stub):
        with pytest.raises(BackendError, match="at least one response"):
            backend(stub).elicit_likelihood_row(QUESTION, [], OH, DIALOGUE)

    def test_single_cell_convenience(self, stub):
        stub.script = [("ok", "1: 0.4\n2: 0.1")]
        result = backend(stub).elicit_likelihood(
            "b", OH, QUESTION, ["a", "b"], DIALOGUE
        )
        assert result.value == 0.1


class TestTextOperations:
    def test_humanize_collapses_whitespace(self, stub):
        stub.script = [("ok", "Do you  feel dizzy\nwhen standing up?")]
        result = backend(stub).humanize_question("Assess orthostatic symptoms")
        assert result.value == "Do you feel dizzy when standing up?"

    def test_patient_reply_uses_persona_and_temperature(self, stub):
        profile = PatientProfile(
            case_id="c",
            opening_statement="I feel dizzy.",
            symptoms=("dizziness",),
            age=58,
            intention="get answers",
            personality="anxious",
            facts={"onset": "two weeks ago"},
            ground_truth="vertigo",
        )
        stub.script = [("ok", "It started about two weeks ago.")]
        result = backend(stub).respond_as_patient(profile, "When did it start?", DIALOGUE)
        assert result.value == "It started about two weeks ago."
        body = stub.requests[0]["body"]
        assert body["temperature"] == 0.7
        prompt = body["messages"][0]["content"]
        assert "Personality: anxious" in prompt
        assert "- onset: two weeks ago" in prompt
        assert "When did it start?" in prompt

    def test_patient_reply_without_persona_method(self, stub):
        bare = SimpleNamespace(
            case_id="c", opening_statement="I feel dizzy.", facts={}
        )
        stub.script = [("ok", "Not sure.")]
        result = backend(stub).respond_as_patient(bare, "Any fever?", DIALOGUE)
        assert result.value == "Not sure."
        prompt = stub.requests[0]["body"]["messages"][0]["content"]
        assert "Opening statement: I feel dizzy." in prompt
